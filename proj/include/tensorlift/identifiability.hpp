#pragma once

#include <optional>
#include <string>

#include "tensorlift/lifting.hpp"
#include "tensorlift/segre.hpp"

namespace tensorlift {

/// Result of testing whether hstar attains the noiseless global minimum for
/// data generated by hbar: equivalent to P(hstar) - P(hbar) lying in the
/// operator kernel, checked via the kernel-complement projection.
struct MinimizerCheck {
    bool is_minimizer = false;
    double relative_residual = 0.0;
};

inline MinimizerCheck check_minimizer_characterization(const LiftedOperator& op,
                                                       const ParamStack& hbar,
                                                       const ParamStack& hstar,
                                                       double tol = 1e-9) {
    const Eigen::VectorXd D = segre_embed(hstar).flat() - segre_embed(hbar).flat();
    const double scale = std::max({segre_embed(hbar).flat().norm(),
                                   segre_embed(hstar).flat().norm(), 1e-30});
    MinimizerCheck r;
    r.relative_residual = op.project_out_kernel(D).norm() / scale;
    r.is_minimizer = r.relative_residual <= tol;
    return r;
}

enum class IdentStatus { GenericallyIdentifiable, NotIdentifiable, Inconclusive };

struct IdentifiabilityVerdict {
    IdentStatus status = IdentStatus::Inconclusive;
    int operator_rank = 0;
    /// Twice the dimension of the rank-one set, the sufficient generic threshold.
    int generic_threshold = 0;
    std::optional<int> model_linear_dim;
    std::string note;
};

/**
 * Dimension-counting verdict.  Rank at least twice the rank-one dimension
 * certifies identifiability of generic stacks; an embedded linear space of
 * dimension q with 2q exceeding the rank rules identifiability out; anything
 * else stays inconclusive.  For the built-in models the linear dimension is
 * recorded on the ModelCollection.
 */
inline IdentifiabilityVerdict dimension_verdict(int operator_rank, int depth, int width,
                                                std::optional<int> model_linear_dim = {}) {
    if (operator_rank < 0) throw InvalidParameters("operator rank must be nonnegative");
    IdentifiabilityVerdict v;
    v.operator_rank = operator_rank;
    v.generic_threshold = 2 * rank_one_dim(depth, width);
    v.model_linear_dim = model_linear_dim;
    if (operator_rank >= v.generic_threshold) {
        v.status = IdentStatus::GenericallyIdentifiable;
        v.note = "rank " + std::to_string(operator_rank) + " >= " +
                 std::to_string(v.generic_threshold) +
                 ", twice the rank-one dimension; generic stacks are identifiable";
    } else if (model_linear_dim && 2 * *model_linear_dim > operator_rank) {
        v.status = IdentStatus::NotIdentifiable;
        v.note = "an embedded linear space of dimension " + std::to_string(*model_linear_dim) +
                 " satisfies 2*" + std::to_string(*model_linear_dim) + " > rank " +
                 std::to_string(operator_rank) + "; distinct minimizers exist";
    } else {
        v.status = IdentStatus::Inconclusive;
        v.note = "rank " + std::to_string(operator_rank) +
                 " is below the generic threshold " + std::to_string(v.generic_threshold) +
                 " (difference-of-pairs dimension is at most " +
                 std::to_string(rank_two_join_dim(depth, width)) +
                 "), and no large embedded linear space is known";
    }
    return v;
}

/// A certified pair of inequivalent stacks whose factor products coincide.
struct NonIdentWitness {
    ParamStack first;
    ParamStack second;
    double class_dist = 0.0;
    double relative_residual = 0.0;
};

namespace detail {

/// Scales every layer of a stack so the embedding picks up the factor t,
/// flipping the first layer's sign when t is negative.
inline ParamStack scale_embedding(const ParamStack& h, double t) {
    ParamStack out = h;
    const double mag = std::pow(std::abs(t), 1.0 / h.depth());
    out.data() *= mag;
    if (t < 0.0) out.layer(0) *= -1.0;
    return out;
}

inline std::optional<NonIdentWitness> validate_witness(const LiftedOperator& op,
                                                       const ParamStack& a, const ParamStack& b,
                                                       double sep, double tol) {
    if (!a.is_nondegenerate() || !b.is_nondegenerate()) return std::nullopt;
    const MinimizerCheck mc = check_minimizer_characterization(op, a, b, tol);
    if (!mc.is_minimizer) return std::nullopt;
    const double d = class_distance(a, b, 2.0);
    if (d < sep) return std::nullopt;
    return NonIdentWitness{a, b, d, mc.relative_residual};
}

/// Collinear (or vanishing) operator columns yield exact witnesses built from
/// indicator stacks: if column i equals t times column j, the indicator stack
/// of i and the rescaled indicator stack of j produce the same output.
inline std::optional<NonIdentWitness> find_column_witness(const LiftedOperator& op, double sep,
                                                          double tol) {
    const int K = op.depth(), S = op.width();
    const Eigen::MatrixXd& A = op.matrix();
    const double scale = std::max(op.sigma_max(), 1e-30);
    DenseTensor shape(K, S);
    std::vector<int> idx;

    for (std::int64_t i = 0; i < A.cols(); ++i) {
        if (A.col(i).norm() > 1e-10 * scale) continue;
        shape.unflatten(i, idx);
        const ParamStack a = ParamStack::indicator(K, S, idx);
        if (auto w = validate_witness(op, a, scale_embedding(a, 2.0), sep, tol)) return w;
    }
    if (A.cols() > 2048) return std::nullopt;  // pair scan is quadratic, keep it cheap
    for (std::int64_t i = 0; i < A.cols(); ++i) {
        const double ni = A.col(i).norm();
        if (ni <= 1e-10 * scale) continue;
        for (std::int64_t j = i + 1; j < A.cols(); ++j) {
            const double nj = A.col(j).norm();
            if (nj <= 1e-10 * scale) continue;
            const double t = A.col(i).dot(A.col(j)) / (nj * nj);
            if ((A.col(i) - t * A.col(j)).norm() > 1e-10 * scale) continue;
            shape.unflatten(i, idx);
            const ParamStack a = ParamStack::indicator(K, S, idx);
            shape.unflatten(j, idx);
            const ParamStack b = scale_embedding(ParamStack::indicator(K, S, idx), t);
            if (auto w = validate_witness(op, a, b, sep, tol)) return w;
        }
    }
    return std::nullopt;
}

/// Exact minimization of ||P(stack with layer k replaced) - Y|| over that
/// layer; the embedding is linear in a single layer, so this is small least
/// squares.
inline void embed_layer_step(ParamStack& stack, int layer, const Eigen::VectorXd& Y) {
    const int S = stack.width();
    Eigen::MatrixXd G(Y.size(), S);
    ParamStack probe = stack;
    for (int j = 0; j < S; ++j) {
        probe.layer(layer).setZero();
        probe(layer, j) = 1.0;
        G.col(j) = segre_embed(probe).flat();
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd v = svd.solve(Y);
    if (v.allFinite()) stack.layer(layer) = v.transpose();
}

} // namespace detail

/**
 * Searches for two inequivalent stacks with identical factor products.  First
 * scans the materialized operator for collinear columns, which certify exact
 * witnesses built from indicator stacks.  Failing that, runs `trials`
 * randomly started alternating fits of a kernel tensor by a difference of two
 * rank-one embeddings: h and g chase T + P(g) and P(h) - T respectively,
 * while T is refreshed as the normalized kernel projection of P(h) - P(g).
 * Fitting a unit-norm kernel target keeps the pair away from the trivial
 * h = g solution.  Any candidate is validated through the minimizer
 * characterization and a class separation threshold before being returned.
 * Absence of a witness is not a proof of identifiability.
 */
inline std::optional<NonIdentWitness> search_nonidentifiability_witness(
    const LiftedOperator& op, int trials, std::uint64_t seed, double sep = 0.1,
    double tol = 1e-9) {
    if (trials < 0) throw InvalidParameters("trial count must be nonnegative");
    if (auto w = detail::find_column_witness(op, sep, tol)) return w;
    if (op.kernel_dim() == 0) return std::nullopt;

    const int K = op.depth(), S = op.width();
    const Eigen::MatrixXd N = op.kernel_basis();
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(seed, static_cast<std::uint64_t>(trial));
        Eigen::VectorXd T = N * rng.normal_vector(N.cols());
        if (T.norm() < 1e-14) continue;
        T.normalize();
        ParamStack h(rng.normal_matrix(K, S));
        ParamStack g(rng.normal_matrix(K, S));

        for (int sweep = 0; sweep < 80; ++sweep) {
            for (int k = 0; k < K; ++k)
                detail::embed_layer_step(h, k, T + segre_embed(g).flat());
            for (int k = 0; k < K; ++k)
                detail::embed_layer_step(g, k, segre_embed(h).flat() - T);

            const Eigen::VectorXd D = segre_embed(h).flat() - segre_embed(g).flat();
            const double nd = D.norm();
            if (nd < 1e-14) break;
            if (op.project_out_kernel(D).norm() <= 1e-12 * nd) break;

            Eigen::VectorXd Tk = N * (N.transpose() * D);
            if (Tk.norm() > 1e-14) T = Tk / Tk.norm();
            const double c = std::pow(nd, -1.0 / K);
            h.data() *= c;
            g.data() *= c;
        }
        if (auto w = detail::validate_witness(op, h, g, sep, tol)) return w;
    }
    return std::nullopt;
}

} // namespace tensorlift
