#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "tensorlift/params.hpp"
#include "tensorlift/tensor.hpp"

namespace tensorlift {

/**
 * Rank-one (Segre) embedding: maps a depth-K, width-S stack h to the order-K
 * tensor whose (i_1,...,i_K) entry is the product h_1[i_1] * ... * h_K[i_K].
 * In flat row-major form this is the iterated Kronecker product of the layers.
 */
inline DenseTensor segre_embed(const ParamStack& h) {
    const int K = h.depth(), S = h.width();
    Eigen::VectorXd v = h.layer(0).transpose();
    for (int k = 1; k < K; ++k) {
        Eigen::VectorXd next(v.size() * S);
        for (Eigen::Index i = 0; i < v.size(); ++i)
            next.segment(i * S, S) = v(i) * h.layer(k).transpose();
        v = std::move(next);
    }
    return DenseTensor(K, S, std::move(v));
}

/// Dimension of the set of rank <= 1 order-K tensors (nonzero part), K*(S-1)+1.
inline int rank_one_dim(int K, int S) { return K * (S - 1) + 1; }

/// Dimension bound for sums of two rank-one terms: the join construction gives
/// 2*(K*(S-1)+1) parameters but the variety is defective for matrices (K = 2).
inline int rank_two_join_dim(int K, int S) {
    return K == 2 ? 4 * (S - 1) : 2 * K * (S - 1) + 2;
}

/**
 * A stack together with the finite set of its scale-normalized class
 * representatives.  Normalized means every layer has the same sup norm; the
 * class of h contains exactly 2^(K-1) such stacks, differing by per-layer
 * signs with product +1.
 */
class DiagNormalized {
public:
    explicit DiagNormalized(ParamStack canonical) : canonical_(std::move(canonical)) {}

    const ParamStack& canonical() const { return canonical_; }

    std::int64_t rep_count() const {
        return std::int64_t(1) << (canonical_.depth() - 1);
    }

    /// Applies the sign pattern encoded by `mask` over the first K-1 layers;
    /// the last layer's sign is forced so the pattern multiplies to +1.
    ParamStack rep(std::uint64_t mask) const {
        const int K = canonical_.depth();
        ParamStack out = canonical_;
        int parity = 0;
        for (int k = 0; k + 1 < K; ++k) {
            if ((mask >> k) & 1u) {
                out.layer(k) *= -1.0;
                parity ^= 1;
            }
        }
        if (parity) out.layer(K - 1) *= -1.0;
        return out;
    }

    std::vector<ParamStack> reps() const {
        if (canonical_.depth() > 21)
            throw BudgetExceeded("too many class representatives to materialize");
        std::vector<ParamStack> all;
        all.reserve(static_cast<std::size_t>(rep_count()));
        for (std::int64_t m = 0; m < rep_count(); ++m)
            all.push_back(rep(static_cast<std::uint64_t>(m)));
        return all;
    }

private:
    ParamStack canonical_;
};

/**
 * Scales each layer of h by lambda_k = mu / sup|h_k| with
 * mu = (prod_k sup|h_k|)^(1/K), so all layers end up with sup norm mu and the
 * scale product is 1.  Throws DegenerateParams if any layer is zero.
 */
inline DiagNormalized normalize_to_diag(const ParamStack& h) {
    h.require_nondegenerate("normalize_to_diag input");
    const int K = h.depth();
    double log_mu = 0.0;
    std::vector<double> sup(K);
    for (int k = 0; k < K; ++k) {
        sup[k] = h.layer(k).cwiseAbs().maxCoeff();
        log_mu += std::log(sup[k]);
    }
    const double mu = std::exp(log_mu / K);
    ParamStack out = h;
    for (int k = 0; k < K; ++k) out.layer(k) *= mu / sup[k];
    return DiagNormalized(std::move(out));
}

namespace detail {

/// Per-layer costs of aligning two normalized stacks with either sign choice.
/// For finite p these are sums of |.|^p, for p = inf they are row maxima.
struct SignAlignCosts {
    std::vector<double> same;    // layer cost with sign +1
    std::vector<double> flipped; // layer cost with sign -1
};

inline SignAlignCosts sign_align_costs(const ParamStack& a, const ParamStack& b, double p) {
    const int K = a.depth();
    SignAlignCosts c;
    c.same.resize(K);
    c.flipped.resize(K);
    for (int k = 0; k < K; ++k) {
        auto d_same = (a.layer(k) - b.layer(k)).cwiseAbs();
        auto d_flip = (a.layer(k) + b.layer(k)).cwiseAbs();
        if (std::isinf(p)) {
            c.same[k] = d_same.maxCoeff();
            c.flipped[k] = d_flip.maxCoeff();
        } else {
            c.same[k] = d_same.array().pow(p).sum();
            c.flipped[k] = d_flip.array().pow(p).sum();
        }
    }
    return c;
}

} // namespace detail

/**
 * Distance between the scale classes of h and g in the entrywise p-norm:
 * the minimum of ||h' - g'||_p over normalized representatives h', g' of the
 * two classes.  Fixing the canonical representative of h and minimizing over
 * the 2^(K-1) sign patterns of g is exact, because per-layer signs on h can
 * be absorbed into the pattern applied to g.
 */
inline double class_distance(const ParamStack& h, const ParamStack& g, double p) {
    require_norm_order(p);
    if (h.depth() != g.depth() || h.width() != g.width())
        throw DimensionMismatch("class_distance: stacks must share depth and width");
    const int K = h.depth();
    if (K - 1 > 62) throw BudgetExceeded("class_distance: depth too large to enumerate signs");

    const ParamStack a = normalize_to_diag(h).canonical();
    const ParamStack b = normalize_to_diag(g).canonical();
    const auto costs = detail::sign_align_costs(a, b, p);

    double best = std::numeric_limits<double>::infinity();
    const std::uint64_t patterns = std::uint64_t(1) << (K - 1);
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        int parity = 0;
        double acc = 0.0;
        for (int k = 0; k + 1 < K; ++k) {
            const bool flip = (mask >> k) & 1u;
            parity ^= flip;
            const double c = flip ? costs.flipped[k] : costs.same[k];
            acc = std::isinf(p) ? std::max(acc, c) : acc + c;
        }
        const double last = parity ? costs.flipped[K - 1] : costs.same[K - 1];
        acc = std::isinf(p) ? std::max(acc, last) : acc + last;
        best = std::min(best, acc);
    }
    return std::isinf(p) ? best : std::pow(best, 1.0 / p);
}

/// Outcome of evaluating one side of a two-sided inequality on concrete data.
struct BoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
    bool precondition_met = true;
};

/**
 * Inverse stability of the rank-one embedding: whenever the two embeddings
 * are close relative to their sup norms (precondition below), the class
 * distance is controlled by the embedding distance,
 *
 *   d_p(h, g) <= 7 (K S)^(1/p) min(pinf_h, pinf_g)^(1/K - 1) ||P(h) - P(g)||_q
 *
 * with pinf_* the sup norms of the embeddings and 1/p + 1/q = 1 in the
 * intended use (any p, q >= 1 are accepted).  Note the exponent 1/K - 1 is
 * <= 0, so the min of the powers equals max(pinf_h, pinf_g)^(1/K - 1).
 */
inline BoundCheck check_rk1_stability_bound(const ParamStack& h, const ParamStack& g,
                                            double p, double q) {
    require_norm_order(p);
    require_norm_order(q);
    if (h.depth() != g.depth() || h.width() != g.width())
        throw DimensionMismatch("bound check: stacks must share depth and width");
    const int K = h.depth(), S = h.width();
    const DenseTensor Ph = segre_embed(h), Pg = segre_embed(g);
    const double pinf_h = Ph.sup_norm(), pinf_g = Pg.sup_norm();

    BoundCheck out;
    out.precondition_met =
        (Ph.flat() - Pg.flat()).cwiseAbs().maxCoeff() <= 0.5 * std::max(pinf_h, pinf_g);
    out.lhs = class_distance(h, g, p);
    const double e = 1.0 / K - 1.0;
    out.rhs = 7.0 * root_pow(static_cast<double>(K) * S, p) *
              std::min(std::pow(pinf_h, e), std::pow(pinf_g, e)) *
              lp_norm(Ph.flat() - Pg.flat(), q);
    out.holds = leq_with_slack(out.lhs, out.rhs);
    return out;
}

/**
 * Forward Lipschitz bound of the rank-one embedding with respect to the class
 * distance:
 *
 *   ||P(h) - P(g)||_q <= S^((K-1)/q) K^(1 - 1/q) max(pinf_h, pinf_g)^(1 - 1/K) d_q(h, g).
 *
 * Tight up to a factor K (take h all-ones and g a small multiple of it).
 */
inline BoundCheck check_plip_bound(const ParamStack& h, const ParamStack& g, double q) {
    require_norm_order(q);
    if (h.depth() != g.depth() || h.width() != g.width())
        throw DimensionMismatch("bound check: stacks must share depth and width");
    const int K = h.depth(), S = h.width();
    const DenseTensor Ph = segre_embed(h), Pg = segre_embed(g);
    const double pinf_max = std::max(Ph.sup_norm(), Pg.sup_norm());

    BoundCheck out;
    out.lhs = lp_norm(Ph.flat() - Pg.flat(), q);
    const double k_exp = std::isinf(q) ? 1.0 : 1.0 - 1.0 / q;
    out.rhs = std::pow(static_cast<double>(S), std::isinf(q) ? 0.0 : (K - 1.0) / q) *
              std::pow(static_cast<double>(K), k_exp) *
              std::pow(pinf_max, 1.0 - 1.0 / K) * class_distance(h, g, q);
    out.holds = leq_with_slack(out.lhs, out.rhs);
    return out;
}

/**
 * Numerical rank of the Jacobian of the rank-one embedding at h, viewed as a
 * map R^(K x S) -> R^(S^K).  At generic points this equals K*(S-1)+1, the
 * dimension of the rank-one set.  Columns are ordered layer-major to match
 * ParamStack::vec().
 */
inline int segre_jacobian_rank(const ParamStack& h, double tol = 1e-10) {
    const int K = h.depth(), S = h.width();
    const std::int64_t n = pow_entries(S, K);
    if (n * K * S > (std::int64_t(1) << 28))
        throw BudgetExceeded("segre_jacobian_rank: Jacobian too large");

    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(K) * S);
    std::vector<int> idx(K);
    std::vector<double> prefix(K + 1), suffix(K + 1);
    for (std::int64_t t = 0; t < n; ++t) {
        std::int64_t r = t;
        for (int k = K - 1; k >= 0; --k) {
            idx[k] = static_cast<int>(r % S);
            r /= S;
        }
        prefix[0] = 1.0;
        for (int k = 0; k < K; ++k) prefix[k + 1] = prefix[k] * h(k, idx[k]);
        suffix[K] = 1.0;
        for (int k = K - 1; k >= 0; --k) suffix[k] = suffix[k + 1] * h(k, idx[k]);
        for (int k = 0; k < K; ++k)
            J(t, static_cast<Eigen::Index>(k) * S + idx[k]) = prefix[k] * suffix[k + 1];
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(J);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > tol * s(0)) ++rank;
    return rank;
}

} // namespace tensorlift
