#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tensorlift/factors.hpp"
#include "tensorlift/lifting.hpp"
#include "tensorlift/segre.hpp"

namespace tensorlift {

/// Directed edge of a convolutional network, oriented from the deeper node
/// toward the root.  `depth` counts edges separating it from the root, so
/// depth 1 touches the root.  `support` lists the circular tap offsets of the
/// kernel living on the edge.
struct ConvEdge {
    std::string src;
    std::string dst;
    int depth = 0;
    std::vector<int> support;

    friend bool operator==(const ConvEdge&, const ConvEdge&) = default;
};

/**
 * A layered convolutional DAG on circular signals of fixed length.  Signals
 * enter at the leaves, every edge applies a circular convolution with its
 * kernel, merging nodes add, and the root emits the output.  Validation
 * enforces the layered structure: consistent edge depths, all leaves at the
 * common depth K, no dead ends, and a constant total tap count per depth
 * (the shared parameter width).
 *
 * Construction canonicalizes the description: nodes and leaves are sorted,
 * supports are sorted, and edges are ordered by (depth, dst, src, support).
 * Parameter slots are assigned in that edge order, offsets ascending, so a
 * stack row k lists the depth-(k+1) kernels' taps in a reproducible layout.
 */
class ConvTopology {
public:
    struct Slot {
        int edge = 0;    // index into edges()
        int offset = 0;  // tap offset within that edge's kernel
    };

    ConvTopology(int signal_len, std::vector<std::string> nodes, std::string root,
                 std::vector<std::string> leaves, std::vector<ConvEdge> edges)
        : n_(signal_len), nodes_(std::move(nodes)), root_(std::move(root)),
          leaves_(std::move(leaves)), edges_(std::move(edges)) {
        validate_and_index();
    }

    int signal_len() const { return n_; }
    int depth() const { return depth_; }
    int width() const { return width_; }
    int max_support_size() const { return max_support_; }

    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::string& root() const { return root_; }
    const std::vector<std::string>& leaves() const { return leaves_; }
    const std::vector<ConvEdge>& edges() const { return edges_; }

    int node_depth(const std::string& id) const {
        auto it = node_depth_.find(id);
        if (it == node_depth_.end()) throw InvalidParameters("unknown node: " + id);
        return it->second;
    }

    /// Edge indices of one depth level, canonical order; levels are 1-based.
    const std::vector<int>& edges_at_depth(int d) const {
        if (d < 1 || d > depth_) throw InvalidParameters("edge depth out of range");
        return by_depth_[d - 1];
    }

    /// Slot tables, one per layer (0-based layer k covers depth k+1).
    const std::vector<std::vector<Slot>>& slots() const { return slots_; }

    int slot_of(int edge_index, int offset) const {
        const ConvEdge& e = edges_[edge_index];
        const auto it = std::lower_bound(e.support.begin(), e.support.end(), offset);
        if (it == e.support.end() || *it != offset)
            throw InvalidParameters("offset is not a tap of this edge");
        return slot_base_[edge_index] + static_cast<int>(it - e.support.begin());
    }

    /// Leaf-to-root paths as edge-index sequences ordered root-first, i.e.
    /// entry k holds the depth-(k+1) edge.
    const std::vector<std::vector<int>>& paths() const { return paths_; }

    /// Index into leaves() of the leaf a path starts from.
    int path_leaf(int path_index) const { return path_leaf_.at(path_index); }

    /// Paths through a given leaf (indices into paths()).
    const std::vector<int>& leaf_paths(int leaf_index) const { return leaf_paths_[leaf_index]; }

    /// Number of multi-indices whose slots trace a leaf-to-root path.
    std::int64_t valid_index_count() const {
        std::int64_t total = 0;
        for (const auto& p : paths_) {
            std::int64_t prod = 1;
            for (int e : p) prod *= static_cast<std::int64_t>(edges_[e].support.size());
            total += prod;
        }
        return total;
    }

    /// Kernel vector of an edge read out of a stack: length-N signal carrying
    /// the edge's parameters at its tap offsets.
    Eigen::VectorXd edge_kernel(int edge_index, const ParamStack& h) const {
        const ConvEdge& e = edges_[edge_index];
        check_stack(h);
        Eigen::VectorXd c = Eigen::VectorXd::Zero(n_);
        for (int o : e.support) c(o) = h(e.depth - 1, slot_of(edge_index, o));
        return c;
    }

    void check_stack(const ParamStack& h) const {
        if (h.depth() != depth_ || h.width() != width_)
            throw DimensionMismatch("stack shape does not match the topology");
    }

private:
    void validate_and_index();

    int n_;
    std::vector<std::string> nodes_;
    std::string root_;
    std::vector<std::string> leaves_;
    std::vector<ConvEdge> edges_;

    int depth_ = 0;
    int width_ = 0;
    int max_support_ = 0;
    std::map<std::string, int> node_depth_;
    std::vector<std::vector<int>> by_depth_;
    std::vector<std::vector<Slot>> slots_;
    std::vector<int> slot_base_;
    std::vector<std::vector<int>> paths_;
    std::vector<int> path_leaf_;
    std::vector<std::vector<int>> leaf_paths_;
};

inline void ConvTopology::validate_and_index() {
    if (n_ < 2) throw InvalidTopology("signal length must be >= 2");
    if (nodes_.empty()) throw InvalidTopology("node list is empty");

    std::sort(nodes_.begin(), nodes_.end());
    if (std::adjacent_find(nodes_.begin(), nodes_.end()) != nodes_.end())
        throw InvalidTopology("duplicate node id");
    const std::set<std::string> node_set(nodes_.begin(), nodes_.end());
    auto known = [&](const std::string& id) { return node_set.count(id) != 0; };

    if (!known(root_)) throw InvalidTopology("root is not a listed node");
    std::sort(leaves_.begin(), leaves_.end());
    if (leaves_.empty()) throw InvalidTopology("leaf list is empty");
    if (std::adjacent_find(leaves_.begin(), leaves_.end()) != leaves_.end())
        throw InvalidTopology("duplicate leaf id");
    for (const auto& l : leaves_) {
        if (!known(l)) throw InvalidTopology("leaf is not a listed node: " + l);
        if (l == root_) throw InvalidTopology("root cannot be a leaf");
    }

    for (ConvEdge& e : edges_) {
        if (!known(e.src) || !known(e.dst))
            throw InvalidTopology("edge references unknown node " + e.src + " -> " + e.dst);
        if (e.support.empty()) throw InvalidTopology("edge with empty support");
        std::sort(e.support.begin(), e.support.end());
        if (std::adjacent_find(e.support.begin(), e.support.end()) != e.support.end())
            throw InvalidTopology("duplicate support offset");
        if (e.support.front() < 0 || e.support.back() >= n_)
            throw InvalidTopology("support offset outside the signal range");
    }
    if (edges_.empty()) throw InvalidTopology("edge list is empty");

    // Depth assignment: the root sits at depth 0 and each edge lifts its
    // source one level above its destination.  Conflicts mean some node has
    // root-paths of different lengths; unreachable nodes mean cycles or
    // disconnected pieces.
    node_depth_.clear();
    node_depth_[root_] = 0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const ConvEdge& e : edges_) {
            auto dst = node_depth_.find(e.dst);
            if (dst == node_depth_.end()) continue;
            const int d = dst->second + 1;
            auto [it, inserted] = node_depth_.try_emplace(e.src, d);
            if (inserted)
                changed = true;
            else if (it->second != d)
                throw InvalidTopology("node " + e.src + " has paths of different lengths to the root");
        }
    }
    for (const auto& id : nodes_)
        if (!node_depth_.count(id)) throw InvalidTopology("node cannot reach the root: " + id);

    depth_ = 0;
    for (const auto& [id, d] : node_depth_) depth_ = std::max(depth_, d);
    for (const ConvEdge& e : edges_) {
        const int d = node_depth_[e.src];
        if (node_depth_[e.dst] != d - 1)
            throw InvalidTopology("edge does not connect adjacent levels");
        if (e.depth != d)
            throw InvalidTopology("edge " + e.src + " -> " + e.dst + " declares depth " +
                                  std::to_string(e.depth) + " but sits at depth " +
                                  std::to_string(d));
    }

    // Leaves are exactly the nodes without inbound edges, all at the bottom.
    std::set<std::string> has_inbound, has_outbound;
    for (const ConvEdge& e : edges_) {
        has_inbound.insert(e.dst);
        has_outbound.insert(e.src);
    }
    for (const auto& id : nodes_) {
        const bool is_leaf = std::binary_search(leaves_.begin(), leaves_.end(), id);
        if (is_leaf) {
            if (has_inbound.count(id)) throw InvalidTopology("leaf has an inbound edge: " + id);
            if (node_depth_[id] != depth_)
                throw InvalidTopology("leaf " + id + " is not at the common depth");
        } else if (id != root_ && !has_inbound.count(id)) {
            throw InvalidTopology("interior node receives no signal: " + id);
        }
        if (id != root_ && !has_outbound.count(id))
            throw InvalidTopology("node cannot forward its signal: " + id);
    }
    for (const auto& id : nodes_)
        if (!std::binary_search(leaves_.begin(), leaves_.end(), id) && id != root_ &&
            node_depth_[id] == depth_)
            throw InvalidTopology("non-leaf node at leaf depth: " + id);

    // Canonical edge order, then slot assignment with a constant width check.
    std::stable_sort(edges_.begin(), edges_.end(), [](const ConvEdge& a, const ConvEdge& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        if (a.dst != b.dst) return a.dst < b.dst;
        if (a.src != b.src) return a.src < b.src;
        return a.support < b.support;
    });
    by_depth_.assign(depth_, {});
    for (int i = 0; i < static_cast<int>(edges_.size()); ++i)
        by_depth_[edges_[i].depth - 1].push_back(i);

    slots_.assign(depth_, {});
    slot_base_.assign(edges_.size(), 0);
    width_ = -1;
    max_support_ = 0;
    for (int d = 0; d < depth_; ++d) {
        int s = 0;
        for (int ei : by_depth_[d]) {
            slot_base_[ei] = s;
            for (int o : edges_[ei].support) slots_[d].push_back({ei, o});
            s += static_cast<int>(edges_[ei].support.size());
            max_support_ = std::max(max_support_, static_cast<int>(edges_[ei].support.size()));
        }
        if (width_ < 0)
            width_ = s;
        else if (width_ != s)
            throw InvalidTopology("total tap count differs between depths " +
                                  std::to_string(d) + " and " + std::to_string(d + 1));
    }
    if (width_ < 2) throw InvalidTopology("parameter width per depth must be >= 2");

    // Path enumeration, one DFS per leaf over root-ward edges.
    std::map<std::string, std::vector<int>> outbound;
    for (int i = 0; i < static_cast<int>(edges_.size()); ++i)
        outbound[edges_[i].src].push_back(i);

    paths_.clear();
    path_leaf_.clear();
    leaf_paths_.assign(leaves_.size(), {});
    std::vector<int> stack;
    auto dfs = [&](auto&& self, const std::string& at, int leaf_index) -> void {
        if (at == root_) {
            std::vector<int> p(stack.rbegin(), stack.rend());
            leaf_paths_[leaf_index].push_back(static_cast<int>(paths_.size()));
            paths_.push_back(std::move(p));
            path_leaf_.push_back(leaf_index);
            return;
        }
        for (int ei : outbound[at]) {
            stack.push_back(ei);
            self(self, edges_[ei].dst, leaf_index);
            stack.pop_back();
        }
    };
    for (int li = 0; li < static_cast<int>(leaves_.size()); ++li) dfs(dfs, leaves_[li], li);
}

/// Circular convolution of two length-N signals.
inline Eigen::VectorXd circular_convolve(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::Index n = a.size();
    if (b.size() != n) throw DimensionMismatch("circular_convolve: length mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (a(i) == 0.0) continue;
        for (Eigen::Index j = 0; j < n; ++j) out((i + j) % n) += a(i) * b(j);
    }
    return out;
}

/**
 * Convolves the kernels along one leaf-to-root path at the given stack: the
 * length-N filter a Dirac at that leaf would produce if all other paths were
 * silent.  The path is given by its index into ConvTopology::paths().
 */
inline Eigen::VectorXd path_convolution(const ConvTopology& t, int path_index,
                                        const ParamStack& h) {
    if (path_index < 0 || path_index >= static_cast<int>(t.paths().size()))
        throw InvalidPath("path index out of range");
    t.check_stack(h);
    const std::vector<int>& p = t.paths()[path_index];
    Eigen::VectorXd out = t.edge_kernel(p[0], h);
    for (std::size_t k = 1; k < p.size(); ++k)
        out = circular_convolve(out, t.edge_kernel(p[k], h));
    return out;
}

/**
 * Structured factor family of a topology: layer k is the block matrix routing
 * depth-(k+1) node signals to depth-k nodes, each edge contributing the
 * circulant of its kernel.  Blocks follow the sorted node order per level
 * and the product maps stacked leaf inputs (leaves in sorted order) to the
 * root signal.
 */
inline FactorFamily assemble_factors(const ConvTopology& t) {
    const int N = t.signal_len(), K = t.depth();

    // Node order per level: sorted ids, positions cached.
    std::vector<std::vector<std::string>> level(K + 1);
    for (const auto& id : t.nodes()) level[t.node_depth(id)].push_back(id);
    std::vector<std::map<std::string, int>> pos(K + 1);
    for (int d = 0; d <= K; ++d) {
        std::sort(level[d].begin(), level[d].end());
        for (int i = 0; i < static_cast<int>(level[d].size()); ++i) pos[d][level[d][i]] = i;
    }

    std::vector<int> dims(K + 1);
    for (int d = 0; d <= K; ++d) dims[d] = N * static_cast<int>(level[d].size());

    std::vector<std::vector<Placement>> placements(K);
    for (int d = 1; d <= K; ++d) {
        for (int ei : t.edges_at_depth(d)) {
            const ConvEdge& e = t.edges()[ei];
            const int row_base = N * pos[d - 1][e.dst];
            const int col_base = N * pos[d][e.src];
            for (int o : e.support) {
                const int s = t.slot_of(ei, o);
                for (int j = 0; j < N; ++j)
                    placements[d - 1].push_back({row_base + (j + o) % N, col_base + j, s, 1.0});
            }
        }
    }
    return FactorFamily(K, t.width(), std::move(dims), std::move(placements));
}

/// One output entry hit more than once while probing a leaf with a Dirac.
struct OverlapReport {
    std::string leaf;
    int position = 0;
    std::int64_t count = 0;
};

struct TopologyVerdict {
    bool passes = false;
    /// Every path's tap sums are collision-free and, per leaf, the paths'
    /// output supports are pairwise disjoint.  Computed by direct path
    /// enumeration, independently of the signal-propagation loop, and always
    /// coincides with passes.
    bool supports_disjoint = false;
    std::vector<OverlapReport> offending;
    std::int64_t valid_index_count = 0;
    /// Kernel dimension of the lifted operator implied by the verdict; exact
    /// whenever passes is true.
    std::int64_t kernel_dim = 0;
};

/**
 * Exact combinatorial certificate: pushes an integer Dirac from every leaf
 * through the all-ones network and demands every root sample be 0 or 1.
 * A count of two or more means two tap chains land on the same output
 * position, which is precisely when distinct valid multi-indices collide.
 * All arithmetic is on 64-bit integers, so the verdict carries no rounding.
 */
inline TopologyVerdict algo_check(const ConvTopology& t) {
    const int N = t.signal_len(), K = t.depth();
    TopologyVerdict v;
    v.valid_index_count = t.valid_index_count();
    v.kernel_dim = pow_entries(t.width(), K) - v.valid_index_count;
    v.passes = true;

    // Outbound adjacency once, reused for each leaf probe.
    std::map<std::string, std::vector<int>> outbound;
    for (int i = 0; i < static_cast<int>(t.edges().size()); ++i)
        outbound[t.edges()[i].src].push_back(i);

    // Nodes by decreasing depth so every signal is complete before it is used.
    std::vector<std::string> order(t.nodes());
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        return t.node_depth(a) > t.node_depth(b);
    });

    for (const std::string& leaf : t.leaves()) {
        std::map<std::string, std::vector<std::int64_t>> signal;
        signal[leaf].assign(N, 0);
        signal[leaf][0] = 1;

        for (const std::string& u : order) {
            auto su = signal.find(u);
            if (su == signal.end()) continue;
            for (int ei : outbound[u]) {
                const ConvEdge& e = t.edges()[ei];
                auto& sv = signal[e.dst];
                if (sv.empty()) sv.assign(N, 0);
                for (int o : e.support)
                    for (int i = 0; i < N; ++i) sv[(i + o) % N] += su->second[i];
            }
        }

        const auto& y = signal[t.root()];
        for (int i = 0; i < N; ++i) {
            if (y[i] == 0 || y[i] == 1) continue;
            v.passes = false;
            v.offending.push_back({leaf, i, y[i]});
        }
    }

    // Second, independent route to the same property: enumerate every path's
    // tap-offset sums directly.  Passing demands each path to be free of
    // internal collisions and, within a leaf, the paths' output supports to
    // be pairwise disjoint (supports may overlap across leaves).
    v.supports_disjoint = true;
    std::vector<std::set<int>> supp(t.paths().size());
    for (std::size_t pi = 0; pi < t.paths().size(); ++pi) {
        std::map<int, std::int64_t> counts;
        auto rec = [&](auto&& self, std::size_t k, int sum) -> void {
            if (k == t.paths()[pi].size()) {
                ++counts[sum];
                return;
            }
            for (int o : t.edges()[t.paths()[pi][k]].support)
                self(self, k + 1, (sum + o) % N);
        };
        rec(rec, 0, 0);
        for (const auto& [pos, c] : counts) {
            if (c > 1) v.supports_disjoint = false;
            supp[pi].insert(pos);
        }
    }
    for (std::size_t li = 0; li < t.leaves().size(); ++li) {
        const auto& ps = t.leaf_paths(static_cast<int>(li));
        for (std::size_t a = 0; a < ps.size(); ++a)
            for (std::size_t b = a + 1; b < ps.size(); ++b)
                for (int pos : supp[ps[a]])
                    if (supp[ps[b]].count(pos)) v.supports_disjoint = false;
    }
    return v;
}

struct KernelCheck {
    std::int64_t expected_dim = 0;
    std::int64_t actual_dim = 0;
    /// Largest kernel-basis coordinate on path-consistent multi-indices.
    double max_valid_coordinate = 0.0;
    bool holds = false;
};

namespace detail {

/// Flat tensor indices whose slot tuples follow some leaf-to-root path.
inline std::vector<std::int64_t> valid_flat_indices(const ConvTopology& t) {
    const int K = t.depth();
    DenseTensor shape(K, t.width());
    std::vector<std::int64_t> out;
    std::vector<int> idx(K);
    for (const auto& p : t.paths()) {
        auto rec = [&](auto&& self, int k) -> void {
            if (k == K) {
                out.push_back(shape.flat_index(idx));
                return;
            }
            const int ei = p[k];
            for (int o : t.edges()[ei].support) {
                idx[k] = t.slot_of(ei, o);
                self(self, k + 1);
            }
        };
        rec(rec, 0);
    }
    return out;
}

} // namespace detail

/**
 * Audits the kernel structure of a certified topology against the
 * materialized operator: the kernel dimension must be the number of
 * non-path multi-indices, and every kernel basis vector must vanish on the
 * path-consistent coordinates.  Refuses topologies that fail the
 * combinatorial check, since the characterization is only proven for them.
 */
inline KernelCheck verify_kernel_characterization(const ConvTopology& t,
                                                  std::int64_t budget = default_entry_budget) {
    const TopologyVerdict v = algo_check(t);
    if (!v.passes)
        throw TopologyNotCertified("kernel characterization requires a passing topology");

    const LiftedOperator op = materialize_lifting(assemble_factors(t), budget);
    KernelCheck r;
    r.expected_dim = v.kernel_dim;
    r.actual_dim = op.kernel_dim();
    const Eigen::MatrixXd ker = op.kernel_basis();
    for (std::int64_t i : detail::valid_flat_indices(t))
        for (Eigen::Index c = 0; c < ker.cols(); ++c)
            r.max_valid_coordinate = std::max(r.max_valid_coordinate, std::abs(ker(i, c)));
    r.holds = r.expected_dim == r.actual_dim && r.max_valid_coordinate <= 1e-10;
    return r;
}

/**
 * Aggregated class distance over all leaf-to-root paths: restrict both stacks
 * to each path's taps (zero-padding rows to a common width), take the
 * per-path class distance, and combine with the p-norm across paths.
 */
inline double network_class_distance(const ConvTopology& t, const ParamStack& h,
                                     const ParamStack& g, double p) {
    require_norm_order(p);
    t.check_stack(h);
    t.check_stack(g);
    const int K = t.depth();
    const int W = std::max(2, t.max_support_size());

    double acc = 0.0;
    for (std::size_t pi = 0; pi < t.paths().size(); ++pi) {
        ParamStack rh = ParamStack::zero(K, W);
        ParamStack rg = ParamStack::zero(K, W);
        for (int k = 0; k < K; ++k) {
            const int ei = t.paths()[pi][k];
            int col = 0;
            for (int o : t.edges()[ei].support) {
                const int s = t.slot_of(ei, o);
                rh(k, col) = h(k, s);
                rg(k, col) = g(k, s);
                ++col;
            }
        }
        if (!rh.is_nondegenerate() || !rg.is_nondegenerate())
            throw DegenerateParams("a kernel on path " + std::to_string(pi) + " is zero");
        const double d = class_distance(rh, rg, p);
        acc = std::isinf(p) ? std::max(acc, d) : acc + std::pow(d, p);
    }
    return std::isinf(p) ? acc : std::pow(acc, 1.0 / p);
}

struct NetworkBound {
    double bound = 0.0;
    /// Noise-plus-residual small enough for the guarantee regime.
    bool snr_ok = false;
    /// Smallest kernel sup norm of the reference stack (only when supplied).
    double min_kernel_sup = 0.0;
    bool eps_ok = false;
    bool eps_checked = false;
};

/**
 * Path-aggregated recovery guarantee for a certified topology: with every
 * kernel's sup norm at least epsilon,
 *
 *   distance <= 7 (K S')^(1/p) epsilon^(1 - K) (delta + eta) / sqrt(N),
 *
 * with S' the largest kernel size, valid in the regime
 * delta + eta <= sqrt(N) epsilon^K / 2.  When a reference stack is supplied,
 * its kernels are audited against epsilon.
 */
inline NetworkBound convnet_stability_bound(const ConvTopology& t, double p, double epsilon,
                                            double delta, double eta,
                                            const ParamStack* hbar = nullptr) {
    require_norm_order(p);
    if (!(epsilon > 0.0)) throw InvalidParameters("epsilon must be positive");
    if (delta < 0.0 || eta < 0.0) throw InvalidParameters("delta, eta must be >= 0");
    if (!algo_check(t).passes)
        throw TopologyNotCertified("stability bound requires a passing topology");

    const int K = t.depth();
    const double rootN = std::sqrt(static_cast<double>(t.signal_len()));
    NetworkBound r;
    r.bound = 7.0 * root_pow(static_cast<double>(K) * t.max_support_size(), p) *
              std::pow(epsilon, 1.0 - K) * (delta + eta) / rootN;
    r.snr_ok = delta + eta <= rootN * std::pow(epsilon, K) / 2.0;
    if (hbar != nullptr) {
        t.check_stack(*hbar);
        double worst = std::numeric_limits<double>::infinity();
        for (int ei = 0; ei < static_cast<int>(t.edges().size()); ++ei)
            worst = std::min(worst, t.edge_kernel(ei, *hbar).cwiseAbs().maxCoeff());
        r.min_kernel_sup = worst;
        r.eps_ok = worst >= epsilon;
        r.eps_checked = true;
    }
    return r;
}

/**
 * Single-chain dyadic topology: K kernels of two taps each, the depth-k
 * kernel reaching offsets {0, 2^k}.  Rejected unless all 2^K subset sums of
 * the offsets are distinct modulo N, which is exactly when the combinatorial
 * certificate passes; N = 2^(K+1) always qualifies.
 */
inline ConvTopology make_haar_topology(int depth, int signal_len) {
    if (depth < 1) throw InvalidParameters("depth must be >= 1");
    if (signal_len < 2) throw InvalidParameters("signal length must be >= 2");
    for (int k = 1; k <= depth; ++k)
        if ((std::int64_t(1) << k) >= signal_len)
            throw InvalidParameters("offset 2^" + std::to_string(k) +
                                    " does not fit a signal of length " +
                                    std::to_string(signal_len));

    std::vector<char> seen(signal_len, 0);
    for (std::int64_t mask = 0; mask < (std::int64_t(1) << depth); ++mask) {
        std::int64_t sum = 0;
        for (int k = 1; k <= depth; ++k)
            if ((mask >> (k - 1)) & 1) sum += std::int64_t(1) << k;
        const int r = static_cast<int>(sum % signal_len);
        if (seen[r])
            throw InvalidParameters("tap offset sums collide modulo " +
                                    std::to_string(signal_len));
        seen[r] = 1;
    }

    auto name = [&](int d) {
        if (d == 0) return std::string("root");
        if (d == depth) return std::string("leaf");
        return "v" + std::to_string(d);
    };
    std::vector<std::string> nodes;
    for (int d = 0; d <= depth; ++d) nodes.push_back(name(d));
    std::vector<ConvEdge> edges;
    for (int d = 1; d <= depth; ++d)
        edges.push_back({name(d), name(d - 1), d, {0, 1 << d}});
    return ConvTopology(signal_len, std::move(nodes), name(0), {name(depth)}, std::move(edges));
}

} // namespace tensorlift
