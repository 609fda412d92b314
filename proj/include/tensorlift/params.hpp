#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "tensorlift/errors.hpp"
#include "tensorlift/norms.hpp"

namespace tensorlift {

/**
 * A depth-by-width block of factor parameters: row k holds the width-S
 * parameter vector of layer k.  Layers are 1-based in the math and 0-based
 * here; everything else in the library follows the 0-based convention.
 */
class ParamStack {
public:
    ParamStack(int depth, int width) : rows_(ParamStack::check(depth, width)) {}

    explicit ParamStack(Eigen::MatrixXd rows)
        : rows_(std::move(rows)) {
        check(static_cast<int>(rows_.rows()), static_cast<int>(rows_.cols()));
    }

    int depth() const { return static_cast<int>(rows_.rows()); }
    int width() const { return static_cast<int>(rows_.cols()); }

    /// Parameter vector of one layer, as a row expression.
    auto layer(int k) const { return rows_.row(k); }
    auto layer(int k) { return rows_.row(k); }

    Eigen::MatrixXd& data() { return rows_; }
    const Eigen::MatrixXd& data() const { return rows_; }

    double operator()(int k, int j) const { return rows_(k, j); }
    double& operator()(int k, int j) { return rows_(k, j); }

    /// True when every layer has nonzero Euclidean norm.
    bool is_nondegenerate() const {
        for (int k = 0; k < depth(); ++k)
            if (rows_.row(k).norm() == 0.0) return false;
        return true;
    }

    void require_nondegenerate(const char* what = "parameter stack") const {
        if (!is_nondegenerate())
            throw DegenerateParams(std::string(what) + " has a zero layer");
    }

    /// Flattens row-major (layer 0 first), matching the entrywise norms below.
    Eigen::VectorXd vec() const {
        Eigen::VectorXd v(rows_.size());
        for (int k = 0; k < depth(); ++k)
            v.segment(static_cast<Eigen::Index>(k) * width(), width()) = rows_.row(k).transpose();
        return v;
    }

    double entrywise_norm(double p) const { return lp_norm(rows_, p); }

    static ParamStack zero(int depth, int width) {
        ParamStack h(depth, width);
        h.rows_.setZero();
        return h;
    }

    static ParamStack ones(int depth, int width) {
        ParamStack h(depth, width);
        h.rows_.setOnes();
        return h;
    }

    /**
     * Indicator stack for a multi-index: layer k is the standard basis vector
     * selecting entry idx[k].  These are the stacks whose rank-one embedding
     * is a coordinate tensor.
     */
    static ParamStack indicator(int depth, int width, const std::vector<int>& idx) {
        if (static_cast<int>(idx.size()) != depth)
            throw DimensionMismatch("indicator: index length must equal depth");
        ParamStack h = zero(depth, width);
        for (int k = 0; k < depth; ++k) {
            if (idx[k] < 0 || idx[k] >= width)
                throw InvalidParameters("indicator: index entry out of range");
            h(k, idx[k]) = 1.0;
        }
        return h;
    }

private:
    static Eigen::MatrixXd check(int depth, int width) {
        if (depth < 1) throw InvalidParameters("stack depth must be >= 1");
        if (width < 2) throw InvalidParameters("stack width must be >= 2");
        return Eigen::MatrixXd(depth, width);
    }

    Eigen::MatrixXd rows_;
};

} // namespace tensorlift
