#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "tensorlift/params.hpp"
#include "tensorlift/rng.hpp"

namespace tensorlift {

/**
 * A parameter model: a set of admissible stacks given by a membership test,
 * a random sampler, and a projector used by constrained solvers.  Stacks of
 * a model may be degenerate (a row-sparsity level of zero allows zero rows);
 * class-level operations will reject those separately where it matters.
 */
struct ModelCollection {
    std::string name;
    int depth = 0;
    int width = 0;
    std::function<bool(const ParamStack&)> contains;
    std::function<ParamStack(Rng&)> sample;
    std::function<void(ParamStack&)> project;
    /// Closed under scaling every entry by the same factor; lets estimators
    /// rescale difference samples without leaving the model.
    bool scale_closed = true;
    /// Dimension of the largest linear space inside the embedded image of the
    /// model, used by identifiability's necessary dimension test.  Fixing all
    /// layers but the last and varying the last freely keeps the embedding
    /// linear in it, so the unconstrained model gives width and the L-sparse
    /// model gives L.
    int linear_space_dim = 0;
};

inline ModelCollection make_full_model(int depth, int width) {
    ModelCollection m;
    m.name = "full";
    m.depth = depth;
    m.width = width;
    m.contains = [](const ParamStack&) { return true; };
    m.sample = [depth, width](Rng& rng) { return ParamStack(rng.normal_matrix(depth, width)); };
    m.project = [](ParamStack&) {};
    m.scale_closed = true;
    m.linear_space_dim = width;
    return m;
}

/// Keeps the L entries of largest magnitude in each layer (ties broken by
/// lower index), zeroing the rest.
inline void project_rows_to_sparsity(ParamStack& h, int level) {
    const int S = h.width();
    if (level >= S) return;
    std::vector<int> order(S);
    for (int k = 0; k < h.depth(); ++k) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return std::abs(h(k, a)) > std::abs(h(k, b));
        });
        for (int r = level; r < S; ++r) h(k, order[r]) = 0.0;
    }
}

inline ModelCollection make_row_sparse_model(int depth, int width, int level) {
    if (level < 0 || level > width)
        throw InvalidParameters("row sparsity level must lie in [0, width]");
    ModelCollection m;
    m.name = "row-sparse-" + std::to_string(level);
    m.depth = depth;
    m.width = width;
    m.contains = [level](const ParamStack& h) {
        for (int k = 0; k < h.depth(); ++k) {
            int nnz = 0;
            for (int j = 0; j < h.width(); ++j)
                if (h(k, j) != 0.0) ++nnz;
            if (nnz > level) return false;
        }
        return true;
    };
    m.sample = [depth, width, level](Rng& rng) {
        ParamStack h = ParamStack::zero(depth, width);
        for (int k = 0; k < depth; ++k) {
            // Draw a uniform support of the requested size, then fill it.
            std::vector<int> idx(width);
            std::iota(idx.begin(), idx.end(), 0);
            for (int j = 0; j < level; ++j) {
                const int pick = j + static_cast<int>(rng.below(width - j));
                std::swap(idx[j], idx[pick]);
                h(k, idx[j]) = rng.normal();
            }
        }
        return h;
    };
    m.project = [level](ParamStack& h) { project_rows_to_sparsity(h, level); };
    m.scale_closed = true;
    m.linear_space_dim = std::min(level, width);
    return m;
}

} // namespace tensorlift
