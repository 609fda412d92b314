#pragma once

#include <limits>
#include <vector>

#include "tensorlift/lifting.hpp"
#include "tensorlift/models.hpp"
#include "tensorlift/segre.hpp"

namespace tensorlift {

/**
 * Optimal null-space constant of a single tensor: ||T|| divided by its
 * distance to the operator kernel.  Infinite when T sits in the kernel
 * (within 1e-12 relative), which is exactly the situation that falsifies a
 * restricted null-space property on any sample set containing T.
 */
inline double gamma_of_tensor(const LiftedOperator& op, const DenseTensor& T) {
    const double n = T.flat().norm();
    if (n == 0.0) throw InvalidParameters("gamma_of_tensor: zero tensor");
    const double off = op.project_out_kernel(T.flat()).norm();
    if (off <= 1e-12 * n) return std::numeric_limits<double>::infinity();
    return n / off;
}

struct NspEstimate {
    double gamma_hat = 0.0;
    double rho = 0.0;
    int n_samples = 0;
    int n_effective = 0;
    int n_discarded = 0;
    bool failed = false;
    /// Flat tensor attaining the current gamma_hat (empty before any sample).
    Eigen::VectorXd worst;
};

/**
 * Monte-Carlo lower estimate of the null-space constant over differences of
 * embedded model stacks, restricted to ||A T|| <= rho.  Model pairs are
 * cycled through `models` x `models`; each sample draws one stack from each
 * side through its own counter-derived stream.  Samples outside the ball are
 * rescaled onto it when both models are scale closed, otherwise discarded.
 * Entries of `extra_diffs` (flat tensors) are audited first, which lets a
 * caller feed certified kernel differences from a witness search.
 *
 * The estimate is a supremum over samples: it never decreases when samples
 * are added, and `failed` records whether some nonzero sample lies in the
 * kernel, falsifying the property for every finite gamma.
 */
inline NspEstimate estimate_gamma(const LiftedOperator& op,
                                  const std::vector<ModelCollection>& models, double rho,
                                  int n_samples, std::uint64_t seed,
                                  const std::vector<Eigen::VectorXd>& extra_diffs = {}) {
    if (models.empty()) throw InvalidParameters("estimate_gamma: need at least one model");
    if (!(rho > 0.0)) throw InvalidParameters("estimate_gamma: rho must be positive");
    if (n_samples < 0) throw InvalidParameters("estimate_gamma: negative sample count");
    for (const ModelCollection& m : models)
        if (m.depth != op.depth() || m.width != op.width())
            throw DimensionMismatch("estimate_gamma: model shape does not match the operator");

    const bool scale_closed = [&] {
        for (const ModelCollection& m : models)
            if (!m.scale_closed) return false;
        return true;
    }();

    NspEstimate est;
    est.rho = rho;

    auto audit = [&](Eigen::VectorXd T) {
        ++est.n_samples;
        const double n = T.norm();
        if (n <= 1e-14) return;
        const double image = op.apply_flat(T).norm();
        if (image > rho) {
            if (!scale_closed) {
                ++est.n_discarded;
                return;
            }
            T *= rho / image;
        }
        ++est.n_effective;
        const double g = gamma_of_tensor(op, DenseTensor(op.depth(), op.width(), T));
        if (std::isinf(g)) est.failed = true;
        if (g > est.gamma_hat) {
            est.gamma_hat = g;
            est.worst = T;
        }
    };

    for (const Eigen::VectorXd& T : extra_diffs) {
        if (T.size() != op.domain_dim())
            throw DimensionMismatch("estimate_gamma: extra sample has wrong length");
        audit(T);
    }

    const std::size_t n_pairs = models.size() * models.size();
    for (int i = 0; i < n_samples; ++i) {
        Rng rng(seed, static_cast<std::uint64_t>(i));
        const std::size_t pair = static_cast<std::size_t>(i) % n_pairs;
        const ModelCollection& ma = models[pair % models.size()];
        const ModelCollection& mb = models[pair / models.size()];
        const ParamStack h = ma.sample(rng);
        const ParamStack g = mb.sample(rng);
        audit(segre_embed(h).flat() - segre_embed(g).flat());
    }
    return est;
}

/// Parameters under which the property must hold whenever recovery from
/// noise level delta is stable with constant C: the constant scales like
/// sqrt(K) * S^((K-1)/2) times the largest singular value, and the ball
/// radius is the noise level itself.
struct DerivedNsp {
    double gamma = 0.0;
    double rho = 0.0;
};

inline DerivedNsp derive_nsp_from_stability(double stability_constant, double sigma_max, int depth,
                                            int width, double delta) {
    if (!(stability_constant > 0.0) || !(sigma_max > 0.0) || !(delta > 0.0))
        throw InvalidParameters("derive_nsp_from_stability: constants must be positive");
    DerivedNsp d;
    d.gamma = stability_constant * std::pow(static_cast<double>(width), (depth - 1) / 2.0) *
              std::sqrt(static_cast<double>(depth)) * sigma_max;
    d.rho = delta;
    return d;
}

} // namespace tensorlift
