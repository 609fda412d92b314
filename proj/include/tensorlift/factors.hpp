#pragma once

#include <vector>

#include <Eigen/Core>

#include "tensorlift/params.hpp"

namespace tensorlift {

/// One structured entry of a factor matrix: entry (row, col) of layer k gets
/// the contribution coeff * h_k[param].  Entries may repeat parameters and
/// several placements may target the same entry (contributions add up).
struct Placement {
    int row = 0;
    int col = 0;
    int param = 0;
    double coeff = 1.0;
};

/**
 * A depth-K family of structured linear factors h |-> M_1(h_1) ... M_K(h_K).
 * Layer k maps the width-S parameter vector h_k linearly to a dims[k] x
 * dims[k+1] matrix through its placement list, so the factor product is a
 * dims[0] x dims[K] matrix depending multilinearly on the stack.
 */
class FactorFamily {
public:
    FactorFamily(int depth, int width, std::vector<int> dims,
                 std::vector<std::vector<Placement>> placements)
        : depth_(depth), width_(width), dims_(std::move(dims)),
          placements_(std::move(placements)) {
        if (depth_ < 1) throw InvalidParameters("factor family depth must be >= 1");
        if (width_ < 2) throw InvalidParameters("factor family width must be >= 2");
        if (static_cast<int>(dims_.size()) != depth_ + 1)
            throw DimensionMismatch("factor family needs depth+1 dimensions");
        for (int d : dims_)
            if (d < 1) throw InvalidParameters("factor dimensions must be >= 1");
        if (static_cast<int>(placements_.size()) != depth_)
            throw DimensionMismatch("factor family needs one placement list per layer");
        for (int k = 0; k < depth_; ++k) {
            for (const Placement& pl : placements_[k]) {
                if (pl.row < 0 || pl.row >= dims_[k] || pl.col < 0 || pl.col >= dims_[k + 1])
                    throw InvalidParameters("placement entry out of range");
                if (pl.param < 0 || pl.param >= width_)
                    throw InvalidParameters("placement parameter index out of range");
            }
        }
    }

    int depth() const { return depth_; }
    int width() const { return width_; }
    int out_rows() const { return dims_.front(); }
    int out_cols() const { return dims_.back(); }
    const std::vector<int>& dims() const { return dims_; }
    const std::vector<std::vector<Placement>>& placements() const { return placements_; }

    /// Dense factor matrix of layer k at parameter vector v.
    template <typename Derived>
    Eigen::MatrixXd layer_matrix(int k, const Eigen::MatrixBase<Derived>& v) const {
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dims_[k], dims_[k + 1]);
        for (const Placement& pl : placements_[k]) M(pl.row, pl.col) += pl.coeff * v(pl.param);
        return M;
    }

    /// Factor matrix of layer k with the j-th unit parameter vector.
    Eigen::MatrixXd layer_unit_matrix(int k, int j) const {
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dims_[k], dims_[k + 1]);
        for (const Placement& pl : placements_[k])
            if (pl.param == j) M(pl.row, pl.col) += pl.coeff;
        return M;
    }

private:
    int depth_;
    int width_;
    std::vector<int> dims_;
    std::vector<std::vector<Placement>> placements_;
};

/// Evaluates the factor product M_1(h_1) ... M_K(h_K) at a stack.
inline Eigen::MatrixXd eval_product(const FactorFamily& f, const ParamStack& h) {
    if (h.depth() != f.depth() || h.width() != f.width())
        throw DimensionMismatch("eval_product: stack shape does not match the family");
    Eigen::MatrixXd M = f.layer_matrix(0, h.layer(0).transpose());
    for (int k = 1; k < f.depth(); ++k) M = M * f.layer_matrix(k, h.layer(k).transpose());
    return M;
}

/// Column-major flattening, the fixed vectorization for factor products.
inline Eigen::VectorXd vec_cm(const Eigen::MatrixXd& M) {
    return Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
}

/// Identity-placement family on an S x 1 shape: the product is h_1 itself.
/// Handy both in tests and as the depth-one base case.
inline FactorFamily identity_column_family(int width) {
    std::vector<std::vector<Placement>> pl(1);
    for (int i = 0; i < width; ++i) pl[0].push_back({i, 0, i, 1.0});
    return FactorFamily(1, width, {width, 1}, std::move(pl));
}

/// Diagonal family: layer k is diag(h_k), all on an S x S shape.
inline FactorFamily diagonal_family(int depth, int width) {
    std::vector<int> dims(depth + 1, width);
    std::vector<std::vector<Placement>> pl(depth);
    for (int k = 0; k < depth; ++k)
        for (int i = 0; i < width; ++i) pl[k].push_back({i, i, i, 1.0});
    return FactorFamily(depth, width, std::move(dims), std::move(pl));
}

} // namespace tensorlift
