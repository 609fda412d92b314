#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "tensorlift/factors.hpp"
#include "tensorlift/params.hpp"
#include "tensorlift/rng.hpp"

namespace tlt {

/// Random structured family with small shapes: depth <= 3, width <= 4, output
/// at most 4x4, every layer populated by at least one placement.
inline tensorlift::FactorFamily random_family(tensorlift::Rng& rng) {
    const int K = 1 + static_cast<int>(rng.below(3));
    const int S = 2 + static_cast<int>(rng.below(3));
    std::vector<int> dims(K + 1);
    for (int& d : dims) d = 1 + static_cast<int>(rng.below(4));
    std::vector<std::vector<tensorlift::Placement>> pl(K);
    for (int k = 0; k < K; ++k) {
        const int count = 1 + static_cast<int>(rng.below(2 * dims[k] * dims[k + 1]));
        for (int c = 0; c < count; ++c) {
            tensorlift::Placement p;
            p.row = static_cast<int>(rng.below(dims[k]));
            p.col = static_cast<int>(rng.below(dims[k + 1]));
            p.param = static_cast<int>(rng.below(S));
            p.coeff = rng.normal();
            pl[k].push_back(p);
        }
    }
    return tensorlift::FactorFamily(K, S, std::move(dims), std::move(pl));
}

inline tensorlift::ParamStack random_stack(int K, int S, tensorlift::Rng& rng) {
    return tensorlift::ParamStack(rng.normal_matrix(K, S));
}

/// Gaussian stack resampled until every layer is clearly nonzero.
inline tensorlift::ParamStack random_nondegenerate_stack(int K, int S, tensorlift::Rng& rng) {
    for (;;) {
        tensorlift::ParamStack h = random_stack(K, S, rng);
        bool ok = true;
        for (int k = 0; k < K; ++k)
            if (h.layer(k).norm() < 1e-6) ok = false;
        if (ok) return h;
    }
}

/// Entrywise p-norm of a stack difference, written out longhand on purpose:
/// test oracles avoid the library's norm helpers.
inline double stack_diff_norm(const tensorlift::ParamStack& a, const tensorlift::ParamStack& b,
                              double p) {
    double acc = 0.0;
    for (int k = 0; k < a.depth(); ++k) {
        for (int j = 0; j < a.width(); ++j) {
            const double d = std::abs(a(k, j) - b(k, j));
            acc = std::isinf(p) ? std::max(acc, d) : acc + std::pow(d, p);
        }
    }
    return std::isinf(p) ? acc : std::pow(acc, 1.0 / p);
}

/// All scale-normalized representatives of the class of h, built from first
/// principles: normalize layer sup norms to their geometric mean, then apply
/// every sign pattern with product +1.
inline std::vector<tensorlift::ParamStack> all_normalized_reps(const tensorlift::ParamStack& h) {
    const int K = h.depth();
    double log_mu = 0.0;
    for (int k = 0; k < K; ++k) log_mu += std::log(h.layer(k).cwiseAbs().maxCoeff());
    const double mu = std::exp(log_mu / K);

    tensorlift::ParamStack base = h;
    for (int k = 0; k < K; ++k) base.layer(k) *= mu / h.layer(k).cwiseAbs().maxCoeff();

    std::vector<tensorlift::ParamStack> reps;
    for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << K); ++mask) {
        int parity = 0;
        for (int k = 0; k < K; ++k) parity ^= static_cast<int>((mask >> k) & 1u);
        if (parity != 0) continue;
        tensorlift::ParamStack r = base;
        for (int k = 0; k < K; ++k)
            if ((mask >> k) & 1u) r.layer(k) *= -1.0;
        reps.push_back(std::move(r));
    }
    return reps;
}

/// Brute-force class distance: minimize over all representative pairs.
inline double class_distance_oracle(const tensorlift::ParamStack& h,
                                    const tensorlift::ParamStack& g, double p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : all_normalized_reps(h))
        for (const auto& b : all_normalized_reps(g))
            best = std::min(best, stack_diff_norm(a, b, p));
    return best;
}

} // namespace tlt
