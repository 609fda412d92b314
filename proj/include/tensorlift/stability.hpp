#pragma once

#include <vector>

#include "tensorlift/lifting.hpp"
#include "tensorlift/models.hpp"
#include "tensorlift/norms.hpp"
#include "tensorlift/segre.hpp"

namespace tensorlift {

/// First-stage error transfer: embedding error per unit of noise-plus-residual.
inline double first_stage_bound(double gamma, double sigma_min, double delta, double eta) {
    if (!(gamma >= 1.0)) throw InvalidParameters("stability: gamma must be >= 1");
    if (!(sigma_min > 0.0)) throw InvalidParameters("stability: sigma_min must be positive");
    if (delta < 0.0 || eta < 0.0) throw InvalidParameters("stability: delta, eta must be >= 0");
    return gamma / sigma_min * (delta + eta);
}

/**
 * End-to-end class-distance guarantee: with a null-space constant gamma on a
 * ball of adequate radius and embeddings whose sup norms dominate the
 * first-stage error,
 *
 *   d_p <= 7 (K S)^(1/p) (gamma / sigma_min) min(pinf_bar, pinf_star)^(1/K - 1) (delta + eta).
 *
 * The min is taken after raising to the nonpositive exponent, so the smaller
 * sup norm never loosens the bound.
 */
inline double stability_bound(double gamma, double sigma_min, int depth, int width, double p,
                              double pinf_bar, double pinf_star, double delta, double eta) {
    require_norm_order(p);
    if (!(pinf_bar > 0.0) || !(pinf_star > 0.0))
        throw InvalidParameters("stability: embedding sup norms must be positive");
    const double e = 1.0 / depth - 1.0;
    return 7.0 * root_pow(static_cast<double>(depth) * width, p) *
           std::min(std::pow(pinf_bar, e), std::pow(pinf_star, e)) *
           first_stage_bound(gamma, sigma_min, delta, eta);
}

struct SolverSettings {
    int max_sweeps = 100;
    int restarts = 8;
    /// Relative change of the residual below which a run stops early.
    double tol = 1e-10;
    /// Residual target; reaching it ends the run (0 = run to convergence).
    double eta_target = 0.0;
};

struct FitResult {
    explicit FitResult(ParamStack p) : params(std::move(p)) {}

    ParamStack params;
    double residual = 0.0;
    int sweeps = 0;
    int restart_index = 0;
    /// False when a sweep increased the residual beyond rounding, which can
    /// happen for constrained models after projection.
    bool objective_decreased = true;
};

namespace detail {

struct SweepWorkspace {
    std::vector<Eigen::MatrixXd> prefix;  // prefix[k] = M_1 ... M_k, prefix[0] = I
    std::vector<Eigen::MatrixXd> suffix;  // suffix[k] = M_{k+1} ... M_K, suffix[K] = I
};

inline void refresh_products(const FactorFamily& f, const ParamStack& h, SweepWorkspace& ws) {
    const int K = f.depth();
    ws.prefix.resize(K + 1);
    ws.suffix.resize(K + 1);
    ws.prefix[0] = Eigen::MatrixXd::Identity(f.out_rows(), f.out_rows());
    for (int k = 0; k < K; ++k)
        ws.prefix[k + 1] = ws.prefix[k] * f.layer_matrix(k, h.layer(k).transpose());
    ws.suffix[K] = Eigen::MatrixXd::Identity(f.out_cols(), f.out_cols());
    for (int k = K - 1; k >= 0; --k)
        ws.suffix[k] = f.layer_matrix(k, h.layer(k).transpose()) * ws.suffix[k + 1];
}

} // namespace detail

/**
 * Alternating least squares for min ||M_1(h_1) ... M_K(h_K) - X||_F over
 * stacks of the given model.  Each layer update is an exact linear solve
 * (the product is linear in one layer); constrained models are enforced by
 * projection after every sweep.  Runs `restarts` independent starts from the
 * model sampler and keeps the best residual.
 */
inline FitResult fit_factors(const FactorFamily& f, const Eigen::MatrixXd& X,
                             const ModelCollection& model, const SolverSettings& settings,
                             std::uint64_t seed) {
    if (X.rows() != f.out_rows() || X.cols() != f.out_cols())
        throw DimensionMismatch("fit_factors: data shape mismatch");
    if (model.depth != f.depth() || model.width != f.width())
        throw DimensionMismatch("fit_factors: model shape does not match the family");
    if (settings.restarts < 1 || settings.max_sweeps < 1)
        throw InvalidParameters("fit_factors: restarts and max_sweeps must be >= 1");

    const int K = f.depth(), S = f.width();
    const Eigen::VectorXd x = vec_cm(X);
    FitResult best(ParamStack::zero(K, S));
    best.residual = std::numeric_limits<double>::infinity();

    detail::SweepWorkspace ws;
    for (int restart = 0; restart < settings.restarts; ++restart) {
        Rng rng(seed, static_cast<std::uint64_t>(restart));
        ParamStack h = model.sample(rng);
        double prev = (eval_product(f, h) - X).norm();
        bool decreased = true;
        int sweeps_used = 0;

        for (int sweep = 0; sweep < settings.max_sweeps; ++sweep) {
            detail::refresh_products(f, h, ws);
            for (int k = 0; k < K; ++k) {
                Eigen::MatrixXd J(x.size(), S);
                for (int j = 0; j < S; ++j) {
                    const Eigen::MatrixXd col =
                        ws.prefix[k] * f.layer_unit_matrix(k, j) * ws.suffix[k + 1];
                    J.col(j) = Eigen::Map<const Eigen::VectorXd>(col.data(), col.size());
                }
                Eigen::BDCSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
                const Eigen::VectorXd v = svd.solve(x);
                if (v.allFinite()) {
                    h.layer(k) = v.transpose();
                    // The next layer's solve only needs the prefix through k;
                    // suffixes keep this sweep's starting values by design.
                    ws.prefix[k + 1] = ws.prefix[k] * f.layer_matrix(k, v);
                }
            }
            model.project(h);
            const double res = (eval_product(f, h) - X).norm();
            ++sweeps_used;
            if (res > prev * (1.0 + 1e-9) + 1e-15) decreased = false;
            const bool converged = std::abs(prev - res) <= settings.tol * std::max(1.0, prev);
            prev = res;
            if (res <= settings.eta_target || converged) break;
        }

        if (prev < best.residual) {
            best.params = h;
            best.residual = prev;
            best.sweeps = sweeps_used;
            best.restart_index = restart;
            best.objective_decreased = decreased;
        }
        if (best.residual <= settings.eta_target) break;
    }
    return best;
}

struct ExperimentConfig {
    double delta = 0.0;
    double p = 2.0;
    std::uint64_t seed = 0;
    SolverSettings solver;
    /// Null-space constant assumed valid on the ball of radius rho.
    double gamma = 1.0;
    double rho = std::numeric_limits<double>::infinity();
};

struct StabilityReport {
    std::uint64_t seed = 0;
    double delta = 0.0;
    double eta = 0.0;
    double embedding_error = 0.0;  // ||P(h*) - P(hbar)||_2
    double class_dist = 0.0;
    double bound = 0.0;
    double first_stage = 0.0;
    bool in_ball = false;        // delta + eta <= rho
    bool embeddings_close = false;  // first stage error <= half the larger sup norm
    bool degenerate = false;     // the fitted stack has a zero layer
    bool applicable = false;     // all preconditions met
    bool holds = true;           // class_dist <= bound when applicable
    bool objective_decreased = true;
};

/**
 * One planted-recovery run: draw hbar from the model, observe the factor
 * product plus Frobenius-normalized noise of size delta, fit a stack, and
 * audit the class-distance guarantee with the supplied null-space constant.
 * Rows that miss a precondition are reported as not applicable rather than
 * as violations.
 */
inline StabilityReport run_recovery_experiment(const FactorFamily& f, const LiftedOperator& op,
                                               const ModelCollection& model,
                                               const ExperimentConfig& cfg) {
    StabilityReport rep;
    rep.seed = cfg.seed;
    rep.delta = cfg.delta;

    Rng draw(cfg.seed, 0);
    ParamStack hbar = model.sample(draw);
    for (int attempt = 0; attempt < 100 && !hbar.is_nondegenerate(); ++attempt)
        hbar = model.sample(draw);
    hbar.require_nondegenerate("planted stack");

    const Eigen::MatrixXd X0 = eval_product(f, hbar);
    Eigen::MatrixXd X = X0;
    if (cfg.delta > 0.0) {
        Rng noise(cfg.seed, 1);
        Eigen::MatrixXd E = noise.normal_matrix(X.rows(), X.cols());
        E /= E.norm();
        X += cfg.delta * E;
    }

    const FitResult fit = fit_factors(f, X, model, cfg.solver, derive_stream(cfg.seed, 2));
    rep.eta = fit.residual;
    rep.objective_decreased = fit.objective_decreased;
    rep.degenerate = !fit.params.is_nondegenerate();

    const Eigen::VectorXd Pbar = segre_embed(hbar).flat();
    const Eigen::VectorXd Pstar = segre_embed(fit.params).flat();
    rep.embedding_error = (Pstar - Pbar).norm();
    rep.first_stage = first_stage_bound(cfg.gamma, op.sigma_min(), cfg.delta, rep.eta);
    rep.in_ball = cfg.delta + rep.eta <= cfg.rho;

    const double pinf_bar = Pbar.cwiseAbs().maxCoeff();
    const double pinf_star = Pstar.cwiseAbs().maxCoeff();
    rep.embeddings_close =
        !rep.degenerate && rep.first_stage <= 0.5 * std::max(pinf_bar, pinf_star);
    rep.applicable = rep.in_ball && rep.embeddings_close;

    if (!rep.degenerate) {
        rep.class_dist = class_distance(hbar, fit.params, cfg.p);
        rep.bound = stability_bound(cfg.gamma, op.sigma_min(), f.depth(), f.width(), cfg.p,
                                    pinf_bar, pinf_star, cfg.delta, rep.eta);
        if (rep.applicable) rep.holds = leq_with_slack(rep.class_dist, rep.bound, 1e-9);
    }
    return rep;
}

} // namespace tensorlift
