#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace tensorlift {

/**
 * Deterministic counter-based random streams.
 *
 * Every consumer derives its own Rng from (master_seed, stream_id), so
 * Monte-Carlo loops can be sharded across threads and still produce
 * byte-identical results in any execution order.  The generator is
 * splitmix64 with a Box-Muller normal transform; nothing here depends on
 * implementation-defined standard-library distributions.
 */
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Mixes a master seed with a stream index into an independent stream seed.
inline std::uint64_t derive_stream(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s ^= stream * 0xd6e8feb86659fd93ULL;
    std::uint64_t b = splitmix64(s);
    return a ^ (b + 0x2545f4914f6cdd1dULL);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    Rng(std::uint64_t master, std::uint64_t stream) : state_(derive_stream(master, stream)) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in (0, 1); never returns 0 so log() below is safe.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (the spare draw is cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u = uniform();
        double v = uniform();
        double r = std::sqrt(-2.0 * std::log(u));
        double a = 2.0 * M_PI * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection-free modulo is fine here; n is tiny compared to 2^64.
        return next_u64() % n;
    }

    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                m(i, j) = normal();
        return m;
    }

    Eigen::VectorXd normal_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
        return v;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace tensorlift
