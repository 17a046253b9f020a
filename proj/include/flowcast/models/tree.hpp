#pragma once

// Binary regression trees and the exact greedy grower shared by CART, random forests and
// gradient boosting.
//
// Growth is level-wise. Every column is presorted once (nonzero entries only, ascending by
// value then row); a level is grown by one scan per column that routes each row to its node's
// running prefix statistics. Zero-valued rows of a column are accounted for as a single block
// (node total minus nonzero total) inserted between the negative and positive entries, so one-hot
// columns cost O(nonzeros) per level rather than O(rows).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "flowcast/dataset.hpp"
#include "flowcast/error.hpp"
#include "flowcast/rng.hpp"

namespace flowcast {

/// Internal node when feature >= 0 (row[feature] <= threshold goes left), leaf otherwise.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class RegressionTree {
public:
    RegressionTree() = default;
    RegressionTree(std::vector<TreeNode> nodes, std::size_t width) : nodes_(std::move(nodes)), width_(width) {}

    static RegressionTree leaf(double value, std::size_t width) { return RegressionTree({TreeNode{.value = value}}, width); }

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t width() const { return width_; }

    /// Index of the leaf reached by `row`.
    std::uint32_t leaf_index(std::span<const double> row) const {
        std::uint32_t i = 0;
        while (!nodes_[i].is_leaf()) {
            const auto& n = nodes_[i];
            i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return i;
    }

    double predict(std::span<const double> row) const {
        if (row.size() != width_) {
            throw Error("row width " + std::to_string(row.size()) + " does not match model width " + std::to_string(width_));
        }
        return nodes_[leaf_index(row)].value;
    }

    /// Maximum number of internal nodes on a root-to-leaf path.
    std::size_t depth() const { return depth_from(0); }

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.is_leaf(); }));
    }

    friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

private:
    std::size_t depth_from(std::uint32_t i) const {
        const auto& n = nodes_[i];
        return n.is_leaf() ? 0 : 1 + std::max(depth_from(n.left), depth_from(n.right));
    }

    std::vector<TreeNode> nodes_;
    std::size_t width_ = 0;
};

/// Per-column sorted nonzero entries of a training matrix. Build once, reuse for every tree.
class ColumnIndex {
public:
    struct Entry {
        double value;
        std::uint32_t row;
    };

    explicit ColumnIndex(const TrainingView& data) : rows_(data.rows()), offsets_(data.cols + 1, 0) {
        if (data.rows() > std::numeric_limits<std::uint32_t>::max()) throw Error("too many rows for the tree grower");
        std::vector<std::size_t> counts(data.cols, 0);
        for (std::size_t r = 0; r < data.rows(); ++r) {
            const auto row = data.row(r);
            for (std::size_t c = 0; c < data.cols; ++c) counts[c] += row[c] != 0.0;
        }
        for (std::size_t c = 0; c < data.cols; ++c) offsets_[c + 1] = offsets_[c] + counts[c];
        entries_.resize(offsets_.back());
        std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
        for (std::size_t r = 0; r < data.rows(); ++r) {
            const auto row = data.row(r);
            for (std::size_t c = 0; c < data.cols; ++c) {
                if (row[c] != 0.0) entries_[fill[c]++] = {row[c], static_cast<std::uint32_t>(r)};
            }
        }
        for (std::size_t c = 0; c < data.cols; ++c) {
            std::sort(entries_.begin() + static_cast<std::ptrdiff_t>(offsets_[c]),
                      entries_.begin() + static_cast<std::ptrdiff_t>(offsets_[c + 1]),
                      [](const Entry& a, const Entry& b) { return a.value != b.value ? a.value < b.value : a.row < b.row; });
        }
    }

    std::span<const Entry> nonzero(std::size_t col) const {
        return {entries_.data() + offsets_[col], offsets_[col + 1] - offsets_[col]};
    }
    bool dense(std::size_t col) const { return offsets_[col + 1] - offsets_[col] == rows_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return offsets_.size() - 1; }

private:
    std::size_t rows_;
    std::vector<std::size_t> offsets_;
    std::vector<Entry> entries_;
};

/// Weighted sums of first/second-order terms over a set of rows; `n` is the summed row weight.
struct SplitStats {
    double g = 0.0;
    double h = 0.0;
    double n = 0.0;

    void add(const SplitStats& o) {
        g += o.g;
        h += o.h;
        n += o.n;
    }
    SplitStats minus(const SplitStats& o) const { return {g - o.g, h - o.h, n - o.n}; }
};

/// Squared-error CART: `g` carries the label sum. Gain is the variance reduction
/// n*Var(parent) - n_L*Var(left) - n_R*Var(right) = n_L*n_R/n * (mean_L - mean_R)^2.
struct VarianceReduction {
    double gain(const SplitStats& left, const SplitStats& right, const SplitStats& parent) const {
        const double d = left.g / left.n - right.g / right.n;
        return left.n * right.n / parent.n * d * d;
    }
    double leaf(const SplitStats& s, double lo, double hi) const { return std::clamp(s.g / s.n, lo, hi); }
};

/// Second-order boosting objective with L1 (alpha) and L2 (lambda) leaf-weight penalties.
struct RegularizedGain {
    double alpha = 0.0;
    double lambda = 1.0;

    double soft_threshold(double g) const {
        if (g > alpha) return g - alpha;
        if (g < -alpha) return g + alpha;
        return 0.0;
    }
    double score(const SplitStats& s) const {
        const double t = soft_threshold(s.g);
        return t * t / (s.h + lambda);
    }
    double gain(const SplitStats& left, const SplitStats& right, const SplitStats& parent) const {
        return 0.5 * (score(left) + score(right) - score(parent));
    }
    /// w = -sign(G) * max(0, |G| - alpha) / (H + lambda)
    double leaf(const SplitStats& s, double, double) const { return -soft_threshold(s.g) / (s.h + lambda); }
};

struct GrowConfig {
    std::size_t max_depth = 12;
    double min_samples_leaf = 1.0;
    double min_gain = 0.0;  ///< a split must improve the objective by strictly more than this
    /// Columns the tree may use (ascending). Empty means all columns.
    std::vector<std::uint32_t> columns;
    /// Candidate columns sampled per node from `columns`; 0 means all of them.
    std::size_t features_per_node = 0;
};

struct GrownTree {
    RegressionTree tree;
    std::vector<std::int32_t> row_leaf;  ///< leaf node per training row, -1 for zero-weight rows
};

/// Relative margin a gain must clear to replace the current best split. Right-hand statistics
/// come from subtraction, so equal partitions reached through different columns can differ in
/// the last bits.
inline constexpr double kGainTieTolerance = 1e-10;

/// Grows one tree. `g`/`h` are per-row first/second-order terms, `weight` per-row integer
/// multiplicities (bootstrap counts); an empty weight span means weight 1 everywhere.
/// Splits are chosen by the largest gain; ties go to the lowest column, then lowest threshold.
template <class Criterion>
GrownTree grow_tree(const TrainingView& data, const ColumnIndex& index, std::span<const double> g,
                    std::span<const double> h, std::span<const std::uint32_t> weight, const GrowConfig& config,
                    const Criterion& criterion, Rng* rng = nullptr) {
    const std::size_t rows = data.rows();
    const std::size_t cols = data.cols;
    if (rows == 0) throw Error("cannot grow a tree on an empty training set");
    if (config.max_depth < 1) throw Error("max_depth must be at least 1");

    std::vector<std::uint32_t> allowed = config.columns;
    if (allowed.empty()) {
        allowed.resize(cols);
        for (std::size_t c = 0; c < cols; ++c) allowed[c] = static_cast<std::uint32_t>(c);
    }
    const std::size_t per_node = config.features_per_node == 0 ? allowed.size() : std::min(config.features_per_node, allowed.size());
    const bool sample_nodes = per_node < allowed.size();
    if (sample_nodes && rng == nullptr) throw Error("per-node feature sampling needs a random generator");

    struct NodeState {
        std::uint32_t tree_index;
        SplitStats total;
        double lo, hi;  ///< range of g over the node's rows
        double best_gain;
        std::int32_t best_feature = -1;
        double best_threshold = 0.0;
    };

    auto row_weight = [&](std::size_t r) -> double { return weight.empty() ? 1.0 : static_cast<double>(weight[r]); };

    std::vector<TreeNode> nodes(1);
    std::vector<std::int32_t> node_of(rows, -1);
    std::vector<NodeState> active;
    {
        NodeState root{0, {}, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), config.min_gain};
        for (std::size_t r = 0; r < rows; ++r) {
            const double w = row_weight(r);
            if (w == 0.0) continue;
            node_of[r] = 0;
            root.total.add({w * g[r], w * h[r], w});
            root.lo = std::min(root.lo, g[r]);
            root.hi = std::max(root.hi, g[r]);
        }
        if (root.total.n == 0.0) throw Error("cannot grow a tree with zero total sample weight");
        active.push_back(root);
    }

    std::vector<std::uint8_t> mask;
    std::vector<std::uint8_t> column_used(cols, 0);
    std::vector<SplitStats> left, nz_total;
    std::vector<double> last;
    std::vector<std::uint8_t> has_last, zero_done;
    std::vector<std::uint32_t> scratch;

    for (std::size_t depth = 0; depth < config.max_depth && !active.empty(); ++depth) {
        const std::size_t n_active = active.size();
        std::vector<std::uint8_t> splittable(n_active, 0);
        bool any = false;
        for (std::size_t a = 0; a < n_active; ++a) {
            const auto& s = active[a];
            splittable[a] = s.total.n >= 2.0 * config.min_samples_leaf && s.lo < s.hi;
            any |= splittable[a] != 0;
        }
        if (!any) break;

        std::fill(column_used.begin(), column_used.end(), 0);
        if (sample_nodes) {
            mask.assign(n_active * cols, 0);
            for (std::size_t a = 0; a < n_active; ++a) {
                if (!splittable[a]) continue;
                scratch = allowed;
                for (std::size_t k = 0; k < per_node; ++k) {
                    std::swap(scratch[k], scratch[k + uniform_index(*rng, scratch.size() - k)]);
                    mask[a * cols + scratch[k]] = 1;
                    column_used[scratch[k]] = 1;
                }
            }
        } else {
            for (auto c : allowed) column_used[c] = 1;
        }
        auto uses = [&](std::size_t a, std::size_t c) {
            return splittable[a] && (!sample_nodes || mask[a * cols + c]);
        };

        left.assign(n_active, {});
        nz_total.assign(n_active, {});
        last.assign(n_active, 0.0);
        has_last.assign(n_active, 0);
        zero_done.assign(n_active, 0);

        for (std::size_t c = 0; c < cols; ++c) {
            if (!column_used[c]) continue;
            const auto entries = index.nonzero(c);
            const bool dense = index.dense(c);

            std::fill(left.begin(), left.end(), SplitStats{});
            std::fill(has_last.begin(), has_last.end(), 0);
            std::fill(zero_done.begin(), zero_done.end(), dense ? 1 : 0);
            if (!dense) {
                std::fill(nz_total.begin(), nz_total.end(), SplitStats{});
                for (const auto& e : entries) {
                    const auto a = node_of[e.row];
                    if (a < 0 || !uses(static_cast<std::size_t>(a), c)) continue;
                    const double w = row_weight(e.row);
                    nz_total[static_cast<std::size_t>(a)].add({w * g[e.row], w * h[e.row], w});
                }
            }

            auto push = [&](std::size_t a, double v, const SplitStats& s) {
                auto& st = active[a];
                if (has_last[a] && v != last[a]) {
                    const SplitStats& l = left[a];
                    const SplitStats r = st.total.minus(l);
                    if (l.n >= config.min_samples_leaf && r.n >= config.min_samples_leaf) {
                        const double gain = criterion.gain(l, r, st.total);
                        // gains within rounding of the incumbent count as ties and keep the earlier split
                        if (gain > st.best_gain + kGainTieTolerance * std::fabs(st.best_gain)) {
                            double threshold = last[a] + (v - last[a]) * 0.5;
                            if (!(threshold < v)) threshold = last[a];
                            st.best_gain = gain;
                            st.best_feature = static_cast<std::int32_t>(c);
                            st.best_threshold = threshold;
                        }
                    }
                }
                left[a].add(s);
                last[a] = v;
                has_last[a] = 1;
            };
            auto push_zero_block = [&](std::size_t a) {
                zero_done[a] = 1;
                const SplitStats z = active[a].total.minus(nz_total[a]);
                if (z.n > 0.0) push(a, 0.0, z);
            };

            for (const auto& e : entries) {
                const auto sa = node_of[e.row];
                if (sa < 0) continue;
                const auto a = static_cast<std::size_t>(sa);
                if (!uses(a, c)) continue;
                if (e.value > 0.0 && !zero_done[a]) push_zero_block(a);
                const double w = row_weight(e.row);
                push(a, e.value, {w * g[e.row], w * h[e.row], w});
            }
            if (!dense) {
                for (std::size_t a = 0; a < n_active; ++a) {
                    if (!zero_done[a] && uses(a, c)) push_zero_block(a);
                }
            }
        }

        // Materialize splits; children become the next level's active nodes.
        std::vector<NodeState> next;
        std::vector<std::int32_t> child_of(n_active * 2, -1);
        for (std::size_t a = 0; a < n_active; ++a) {
            auto& st = active[a];
            if (st.best_feature < 0) continue;
            const auto first_child = static_cast<std::uint32_t>(nodes.size());
            nodes.resize(nodes.size() + 2);
            auto& node = nodes[st.tree_index];
            node.feature = st.best_feature;
            node.threshold = st.best_threshold;
            node.left = first_child;
            node.right = first_child + 1;
            for (std::uint32_t side = 0; side < 2; ++side) {
                child_of[2 * a + side] = static_cast<std::int32_t>(next.size());
                next.push_back({first_child + side, {}, std::numeric_limits<double>::infinity(),
                                -std::numeric_limits<double>::infinity(), config.min_gain});
            }
        }
        if (next.empty()) break;

        for (std::size_t r = 0; r < rows; ++r) {
            if (node_of[r] < 0) continue;
            const auto a = static_cast<std::size_t>(node_of[r]);
            const auto& st = active[a];
            if (st.best_feature < 0) continue;
            const bool go_left = data.at(r, static_cast<std::size_t>(st.best_feature)) <= st.best_threshold;
            const auto child = child_of[2 * a + (go_left ? 0 : 1)];
            auto& cs = next[static_cast<std::size_t>(child)];
            const double w = row_weight(r);
            cs.total.add({w * g[r], w * h[r], w});
            cs.lo = std::min(cs.lo, g[r]);
            cs.hi = std::max(cs.hi, g[r]);
            node_of[r] = -2 - child;  // relabelled below; keeps unsplit nodes distinguishable
        }
        // Unsplit nodes become leaves now.
        for (std::size_t a = 0; a < n_active; ++a) {
            if (active[a].best_feature < 0) {
                nodes[active[a].tree_index].value = criterion.leaf(active[a].total, active[a].lo, active[a].hi);
            }
        }
        for (std::size_t r = 0; r < rows; ++r) {
            if (node_of[r] >= 0) {
                node_of[r] = -1;  // row sits in a finished leaf; recorded in the final pass
            } else if (node_of[r] <= -2) {
                node_of[r] = -2 - node_of[r];
            }
        }
        active = std::move(next);
    }

    for (const auto& st : active) nodes[st.tree_index].value = criterion.leaf(st.total, st.lo, st.hi);

    GrownTree out{RegressionTree(std::move(nodes), cols), std::vector<std::int32_t>(rows, -1)};
    for (std::size_t r = 0; r < rows; ++r) {
        if (row_weight(r) != 0.0) out.row_leaf[r] = static_cast<std::int32_t>(out.tree.leaf_index(data.row(r)));
    }
    return out;
}

}  // namespace flowcast
