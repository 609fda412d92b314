#pragma once

#include <cstdlib>
#include <optional>
#include <string>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "tensorlift/factors.hpp"
#include "tensorlift/rng.hpp"
#include "tensorlift/segre.hpp"
#include "tensorlift/tensor.hpp"

namespace tensorlift {

/// Default cap on dense entries for materialized operators (m*n*S^K doubles).
inline constexpr std::int64_t default_entry_budget = 100'000'000;

/// Budget override from the environment, used by the command-line tools.
inline std::int64_t entry_budget_from_env(std::int64_t fallback = default_entry_budget) {
    if (const char* s = std::getenv("TENSORLIFT_BUDGET")) {
        char* end = nullptr;
        const long long v = std::strtoll(s, &end, 10);
        if (end != s && v > 0) return static_cast<std::int64_t>(v);
    }
    return fallback;
}

/**
 * The unique linear map taking rank-one embeddings to factor products:
 * matrix() * flat(P(h)) equals vec_cm(M_1(h_1) ... M_K(h_K)) for every stack.
 * Column t is the factor product at the indicator stack of multi-index t, so
 * operator columns and tensor flat indices agree by construction.
 *
 * The SVD is computed once at materialization and reused for rank, kernel,
 * least squares and kernel-complement projections.
 */
class LiftedOperator {
public:
    LiftedOperator(const FactorFamily& f, Eigen::MatrixXd matrix, double rank_tol)
        : depth_(f.depth()), width_(f.width()), out_rows_(f.out_rows()), out_cols_(f.out_cols()),
          matrix_(std::move(matrix)) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix_, Eigen::ComputeThinU | Eigen::ComputeFullV);
        sing_ = svd.singularValues();
        U_ = svd.matrixU();
        V_ = svd.matrixV();
        sigma_max_ = sing_.size() > 0 ? sing_(0) : 0.0;
        rank_ = 0;
        for (Eigen::Index i = 0; i < sing_.size(); ++i)
            if (sing_(i) > rank_tol * sigma_max_ && sing_(i) > 0.0) ++rank_;
        sigma_min_ = rank_ > 0 ? sing_(rank_ - 1) : 0.0;
    }

    int depth() const { return depth_; }
    int width() const { return width_; }
    int out_rows() const { return out_rows_; }
    int out_cols() const { return out_cols_; }
    std::int64_t domain_dim() const { return matrix_.cols(); }

    const Eigen::MatrixXd& matrix() const { return matrix_; }
    int rank() const { return rank_; }
    /// Smallest nonzero singular value; zero only for the zero operator.
    double sigma_min() const { return sigma_min_; }
    double sigma_max() const { return sigma_max_; }

    /// Orthonormal basis of the kernel (columns); empty when the kernel is trivial.
    Eigen::MatrixXd kernel_basis() const { return V_.rightCols(V_.cols() - rank_); }

    std::int64_t kernel_dim() const { return matrix_.cols() - rank_; }

    Eigen::VectorXd apply_flat(const Eigen::VectorXd& t) const { return matrix_ * t; }

    Eigen::MatrixXd apply(const DenseTensor& T) const {
        Eigen::VectorXd y = matrix_ * T.flat();
        return Eigen::Map<const Eigen::MatrixXd>(y.data(), out_rows_, out_cols_);
    }

    /// Orthogonal projection onto the row space (the kernel's complement).
    Eigen::VectorXd project_out_kernel(const Eigen::VectorXd& t) const {
        const auto Vr = V_.leftCols(rank_);
        return Vr * (Vr.transpose() * t);
    }

    /// Minimum-norm least-squares solution of matrix() * t = vec_cm(X).
    Eigen::VectorXd min_norm_solution_flat(const Eigen::VectorXd& b) const {
        Eigen::VectorXd coeffs = U_.leftCols(rank_).transpose() * b;
        for (int i = 0; i < rank_; ++i) coeffs(i) /= sing_(i);
        return V_.leftCols(rank_) * coeffs;
    }

private:
    int depth_;
    int width_;
    int out_rows_;
    int out_cols_;
    Eigen::MatrixXd matrix_;
    Eigen::VectorXd sing_;
    Eigen::MatrixXd U_;
    Eigen::MatrixXd V_;
    int rank_ = 0;
    double sigma_min_ = 0.0;
    double sigma_max_ = 0.0;
};

namespace detail {

inline void fill_columns(const FactorFamily& f, int k, const Eigen::MatrixXd& prefix,
                         std::int64_t base, Eigen::MatrixXd& out) {
    const int S = f.width();
    if (k == f.depth()) {
        out.col(base) = Eigen::Map<const Eigen::VectorXd>(prefix.data(), prefix.size());
        return;
    }
    for (int j = 0; j < S; ++j)
        fill_columns(f, k + 1, prefix * f.layer_unit_matrix(k, j), base * S + j, out);
}

} // namespace detail

/**
 * Materializes the lifted operator as a dense (m*n) x S^K matrix by running
 * every indicator stack through the factor product.  Prefix products are
 * shared across columns, so the work grows with the output size rather than
 * with depth times the column count.
 */
inline LiftedOperator materialize_lifting(const FactorFamily& f,
                                          std::int64_t budget = default_entry_budget,
                                          double rank_tol = 1e-10) {
    const std::int64_t cols = pow_entries(f.width(), f.depth());
    const std::int64_t rows = static_cast<std::int64_t>(f.out_rows()) * f.out_cols();
    if (rows * cols > budget)
        throw BudgetExceeded("materialize_lifting: " + std::to_string(rows * cols) +
                             " entries exceed the budget of " + std::to_string(budget));

    Eigen::MatrixXd A(rows, cols);
    if (f.depth() == 1) {
        for (int j = 0; j < f.width(); ++j) {
            const Eigen::MatrixXd M = f.layer_unit_matrix(0, j);
            A.col(j) = Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
        }
    } else {
        for (int j = 0; j < f.width(); ++j)
            detail::fill_columns(f, 1, f.layer_unit_matrix(0, j), j, A);
    }
    return LiftedOperator(f, std::move(A), rank_tol);
}

/**
 * Estimates the operator rank without materializing it: runs R independent
 * Gaussian stacks through the factor product and returns the numerical rank
 * of the resulting (m*n) x R column block.  With probability one this equals
 * min(R, rank), so R at least as large as the expected rank recovers it.
 * Each probe draws from its own counter-derived stream, so results do not
 * depend on evaluation order.
 */
inline int estimate_rank_random(const FactorFamily& f, int probes, std::uint64_t seed,
                                double rank_tol = 1e-10) {
    if (probes < 1) throw InvalidParameters("estimate_rank_random: need at least one probe");
    const std::int64_t rows = static_cast<std::int64_t>(f.out_rows()) * f.out_cols();
    Eigen::MatrixXd B(rows, probes);
    for (int r = 0; r < probes; ++r) {
        Rng rng(seed, static_cast<std::uint64_t>(r));
        ParamStack h(rng.normal_matrix(f.depth(), f.width()));
        B.col(r) = vec_cm(eval_product(f, h));
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(B);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rank_tol * s(0)) ++rank;
    return rank;
}

/// Minimum-norm minimizer of ||A t - vec(X)|| over all order-K tensors.
inline DenseTensor solve_lifted_least_squares(const LiftedOperator& op, const Eigen::MatrixXd& X) {
    if (X.rows() != op.out_rows() || X.cols() != op.out_cols())
        throw DimensionMismatch("solve_lifted_least_squares: data shape mismatch");
    Eigen::VectorXd t = op.min_norm_solution_flat(vec_cm(X));
    return DenseTensor(op.depth(), op.width(), std::move(t));
}

/// Both sides of the exact objective split
///   ||A P(h) - X||^2 = ||A (P(h) - T*)||^2 + ||A T* - X||^2,
/// valid whenever T* minimizes ||A T - X|| over all tensors.
struct TwoStageCheck {
    double total = 0.0;      // ||A P(h) - X||^2
    double model_term = 0.0; // ||A (P(h) - T*)||^2
    double data_term = 0.0;  // ||A T* - X||^2, the h-independent constant
    double relative_error = 0.0;
    bool holds = false;
};

inline TwoStageCheck check_two_stage_equivalence(const LiftedOperator& op, const ParamStack& h,
                                                 const Eigen::MatrixXd& X, const DenseTensor& Tstar,
                                                 double rel_tol = 1e-8) {
    if (X.rows() != op.out_rows() || X.cols() != op.out_cols())
        throw DimensionMismatch("check_two_stage_equivalence: data shape mismatch");
    const Eigen::VectorXd b = vec_cm(X);
    const Eigen::VectorXd Ph = segre_embed(h).flat();
    const Eigen::VectorXd t = Tstar.flat();
    TwoStageCheck r;
    r.total = (op.apply_flat(Ph) - b).squaredNorm();
    r.model_term = op.apply_flat(Ph - t).squaredNorm();
    r.data_term = (op.apply_flat(t) - b).squaredNorm();
    const double scale = std::max({r.total, r.model_term + r.data_term, 1e-30});
    r.relative_error = std::abs(r.total - r.model_term - r.data_term) / scale;
    r.holds = r.relative_error <= rel_tol;
    return r;
}

inline TwoStageCheck check_two_stage_equivalence(const FactorFamily& f, const ParamStack& h,
                                                 const Eigen::MatrixXd& X,
                                                 std::int64_t budget = default_entry_budget) {
    const LiftedOperator op = materialize_lifting(f, budget);
    return check_two_stage_equivalence(op, h, X, solve_lifted_least_squares(op, X));
}

} // namespace tensorlift
