#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "tensorlift/errors.hpp"
#include "tensorlift/norms.hpp"

namespace tensorlift {

/// Number of entries of an order-`order` tensor with `size` points per mode,
/// guarding against overflow along the way.
inline std::int64_t pow_entries(int size, int order) {
    std::int64_t n = 1;
    for (int k = 0; k < order; ++k) {
        if (n > (static_cast<std::int64_t>(1) << 56) / size)
            throw BudgetExceeded("tensor entry count overflows the supported range");
        n *= size;
    }
    return n;
}

/**
 * Dense order-K tensor with all modes of equal size S, stored flat in
 * row-major order (the last mode index varies fastest).  The flat layout is
 * the column order of materialized lifted operators, so flat(i) here and
 * operator column i always refer to the same multi-index.
 */
class DenseTensor {
public:
    DenseTensor(int order, int size)
        : order_(check_order(order)), size_(check_size(size)), data_(pow_entries(size, order)) {
        data_.setZero();
    }

    DenseTensor(int order, int size, Eigen::VectorXd flat)
        : order_(check_order(order)), size_(check_size(size)), data_(std::move(flat)) {
        if (data_.size() != pow_entries(size, order))
            throw DimensionMismatch("flat data length does not match order and mode size");
        if (!data_.allFinite())
            throw InvalidParameters("tensor entries must be finite");
    }

    int order() const { return order_; }
    int mode_size() const { return size_; }
    std::int64_t entries() const { return data_.size(); }

    const Eigen::VectorXd& flat() const { return data_; }
    Eigen::VectorXd& flat() { return data_; }

    std::int64_t flat_index(const std::vector<int>& idx) const {
        if (static_cast<int>(idx.size()) != order_)
            throw DimensionMismatch("multi-index length does not match tensor order");
        std::int64_t t = 0;
        for (int k = 0; k < order_; ++k) {
            if (idx[k] < 0 || idx[k] >= size_) throw InvalidParameters("multi-index out of range");
            t = t * size_ + idx[k];
        }
        return t;
    }

    void unflatten(std::int64_t t, std::vector<int>& idx) const {
        idx.resize(order_);
        for (int k = order_ - 1; k >= 0; --k) {
            idx[k] = static_cast<int>(t % size_);
            t /= size_;
        }
    }

    double operator()(const std::vector<int>& idx) const { return data_(flat_index(idx)); }
    double& operator()(const std::vector<int>& idx) { return data_(flat_index(idx)); }

    double norm(double p) const { return lp_norm(data_, p); }
    double sup_norm() const { return data_.cwiseAbs().maxCoeff(); }

private:
    static int check_order(int order) {
        if (order < 1) throw InvalidParameters("tensor order must be >= 1");
        return order;
    }
    static int check_size(int size) {
        if (size < 2) throw InvalidParameters("tensor mode size must be >= 2");
        return size;
    }

    int order_;
    int size_;
    Eigen::VectorXd data_;
};

} // namespace tensorlift
