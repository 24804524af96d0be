#include "clv/tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

#include <nlohmann/json.hpp>

namespace clv {

// ---------------------------------------------------------------------------
// ForcedSplitSpec
// ---------------------------------------------------------------------------

int ForcedSplitSpec::leaf_slots() const {
    if (nodes.empty()) return 0;
    int slots = 0;
    for (const auto& n : nodes) slots += (n.left < 0) + (n.right < 0);
    return slots;
}

int ForcedSplitSpec::depth() const {
    if (nodes.empty()) return 0;
    // nodes form a tree rooted at 0; depth via recursion over indices
    std::vector<int> depth_of(nodes.size(), 1);
    int max_depth = 0;
    // children always appear after parents (construction order), so one
    // forward pass suffices
    for (size_t i = 0; i < nodes.size(); ++i) {
        max_depth = std::max(max_depth, depth_of[i]);
        if (nodes[i].left >= 0) depth_of[nodes[i].left] = depth_of[i] + 1;
        if (nodes[i].right >= 0) depth_of[nodes[i].right] = depth_of[i] + 1;
    }
    return max_depth;
}

namespace {

nlohmann::json forced_node_to_json(const ForcedSplitSpec& spec, int idx) {
    const auto& n = spec.nodes[static_cast<size_t>(idx)];
    nlohmann::json j;
    j["feature"] = n.feature;
    if (n.left >= 0) j["left"] = forced_node_to_json(spec, n.left);
    if (n.right >= 0) j["right"] = forced_node_to_json(spec, n.right);
    return j;
}

int forced_node_from_json(const nlohmann::json& j, ForcedSplitSpec& spec) {
    for (const auto& [key, value] : j.items()) {
        if (key != "feature" && key != "left" && key != "right")
            throw ConfigError("unexpected key in forced-split spec: " + key);
        (void)value;
    }
    const int idx = static_cast<int>(spec.nodes.size());
    spec.nodes.emplace_back();
    spec.nodes[static_cast<size_t>(idx)].feature = j.at("feature").get<std::string>();
    if (j.contains("left"))
        spec.nodes[static_cast<size_t>(idx)].left = forced_node_from_json(j.at("left"), spec);
    if (j.contains("right"))
        spec.nodes[static_cast<size_t>(idx)].right = forced_node_from_json(j.at("right"), spec);
    return idx;
}

} // namespace

nlohmann::json ForcedSplitSpec::to_json() const {
    if (nodes.empty()) return nlohmann::json(nullptr);
    return forced_node_to_json(*this, 0);
}

ForcedSplitSpec ForcedSplitSpec::from_json(const nlohmann::json& j) {
    ForcedSplitSpec spec;
    if (j.is_null()) return spec;
    forced_node_from_json(j, spec);
    return spec;
}

// ---------------------------------------------------------------------------
// Binning
// ---------------------------------------------------------------------------

std::vector<double> candidate_thresholds(const Eigen::VectorXd& column, int max_bins) {
    if (max_bins < 2) throw ConfigError("max_bins must be >= 2");
    std::vector<double> vals;
    vals.reserve(static_cast<size_t>(column.size()));
    for (int i = 0; i < column.size(); ++i)
        if (!is_missing(column[i])) vals.push_back(column[i]);
    if (vals.size() < 2) return {};
    std::sort(vals.begin(), vals.end());

    std::vector<double> distinct;
    for (double v : vals)
        if (distinct.empty() || distinct.back() != v) distinct.push_back(v);
    if (distinct.size() < 2) return {};

    std::vector<double> cuts;
    if (static_cast<int>(distinct.size()) <= max_bins) {
        for (size_t i = 0; i + 1 < distinct.size(); ++i)
            cuts.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    } else {
        const size_t n = vals.size();
        for (int k = 1; k < max_bins; ++k) {
            const size_t pos = (static_cast<size_t>(k) * n) / static_cast<size_t>(max_bins);
            if (pos == 0 || pos >= n) continue;
            const double cut = 0.5 * (vals[pos - 1] + vals[pos]);
            if (cut >= distinct.front() && cut < distinct.back())
                if (cuts.empty() || cuts.back() != cut) cuts.push_back(cut);
        }
    }
    return cuts;
}

BinnedMatrix BinnedMatrix::build(const Eigen::MatrixXd& X, int max_bins) {
    if (max_bins < 2 || max_bins > 254)
        throw ConfigError("max_bins must be in [2, 254]");
    BinnedMatrix binned;
    binned.rows = static_cast<int>(X.rows());
    binned.cols = static_cast<int>(X.cols());
    binned.thresholds.resize(static_cast<size_t>(binned.cols));
    binned.codes.assign(static_cast<size_t>(binned.rows) * static_cast<size_t>(binned.cols), 0);
    for (int f = 0; f < binned.cols; ++f) {
        auto& thr = binned.thresholds[static_cast<size_t>(f)];
        thr = candidate_thresholds(X.col(f), max_bins);
        for (int r = 0; r < binned.rows; ++r) {
            const double v = X(r, f);
            uint8_t code;
            if (is_missing(v)) {
                code = kMissingCode;
            } else {
                const auto it = std::lower_bound(thr.begin(), thr.end(), v);
                code = static_cast<uint8_t>(it - thr.begin());
            }
            binned.codes[static_cast<size_t>(r) * static_cast<size_t>(binned.cols) +
                         static_cast<size_t>(f)] = code;
        }
    }
    return binned;
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

namespace {

struct NodeStats {
    int count = 0;
    double sum = 0.0;
    double ymin = 0.0;
    double ymax = 0.0;
    double mean() const { return count > 0 ? sum / count : 0.0; }
};

NodeStats scan_stats(const Eigen::VectorXd& y, const std::vector<int>& order, int begin,
                     int end) {
    NodeStats s;
    for (int i = begin; i < end; ++i) {
        const double v = y[order[static_cast<size_t>(i)]];
        if (s.count == 0) {
            s.ymin = s.ymax = v;
        } else {
            s.ymin = std::min(s.ymin, v);
            s.ymax = std::max(s.ymax, v);
        }
        s.sum += v;
        ++s.count;
    }
    return s;
}

// Work item for one growable leaf: its row range, stats, histogram and the
// best split found for it. Immutable once pushed to the heap.
struct Work {
    int node = -1;
    int begin = 0, end = 0;
    NodeStats stats;
    std::vector<double> hsum;
    std::vector<int> hcnt;
    bool has_split = false;
    int feature = -1;
    int boundary = -1;  // bin index the split cuts after
    double threshold = 0.0;
    double gain = 0.0;
    int order_key = 0;
};

struct HeapEntry {
    double gain;
    int order_key;
    int work;
    bool operator<(const HeapEntry& other) const {
        if (gain != other.gain) return gain < other.gain;
        return order_key > other.order_key;  // earlier nodes win ties
    }
};

class Grower {
public:
    Grower(const BinnedMatrix& binned, const Eigen::MatrixXd* X, const Eigen::VectorXd& y,
           const TreeFitParams& params, const std::vector<uint8_t>* allowed)
        : binned_(binned), X_(X), y_(y), params_(params), allowed_(allowed),
          stride_(params.max_bins + 1) {
        order_.resize(static_cast<size_t>(binned.rows));
        for (int i = 0; i < binned.rows; ++i) order_[static_cast<size_t>(i)] = i;
    }

    RegressionTree grow(const ForcedSplitSpec* forced,
                        const std::vector<std::string>* feature_names) {
        RegressionTree tree;
        leaf_count_ = 0;

        if (forced && !forced->empty()) {
            if (!feature_names)
                throw SchemaError("forced splits require feature names");
            const NodeStats root_stats = scan_stats(y_, order_, 0, binned_.rows);
            materialize_forced(tree, *forced, 0, 0, binned_.rows, root_stats.mean(),
                               *feature_names);
        } else {
            tree.nodes.emplace_back();
            const NodeStats s = scan_stats(y_, order_, 0, binned_.rows);
            tree.nodes[0].prediction = s.mean();
            ++leaf_count_;
            push_work(tree, 0, 0, binned_.rows, s);
        }

        while (!heap_.empty() && leaf_count_ < params_.max_leaves) {
            const HeapEntry top = heap_.top();
            heap_.pop();
            Work& w = works_[static_cast<size_t>(top.work)];
            if (!w.has_split) continue;
            apply_split(tree, w);
        }

        assign_leaf_ids(tree);
        tree.leaf_count = leaf_count_;
        return tree;
    }

private:
    void materialize_forced(RegressionTree& tree, const ForcedSplitSpec& spec, int spec_idx,
                            int begin, int end, double fallback_mean,
                            const std::vector<std::string>& names) {
        const auto& spec_node = spec.nodes[static_cast<size_t>(spec_idx)];
        int feat = -1;
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == spec_node.feature) { feat = static_cast<int>(i); break; }
        if (feat < 0)
            throw SchemaError("forced split names unknown feature: " + spec_node.feature);
        if (!X_) throw SchemaError("forced splits require the raw feature matrix");
        for (int i = begin; i < end; ++i) {
            const double v = (*X_)(order_[static_cast<size_t>(i)], feat);
            if (!is_missing(v) && v != 0.0 && v != 1.0)
                throw SchemaError("forced split feature is not binary: " + spec_node.feature);
        }

        const int node_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        // partition raw values: absent (0) or missing left, present (1) right
        const auto mid_it = std::stable_partition(
            order_.begin() + begin, order_.begin() + end, [&](int r) {
                const double v = (*X_)(r, feat);
                return is_missing(v) || v <= 0.5;
            });
        const int mid = static_cast<int>(mid_it - order_.begin());

        const NodeStats parent = scan_stats(y_, order_, begin, end);
        const NodeStats left = scan_stats(y_, order_, begin, mid);
        const NodeStats right = scan_stats(y_, order_, mid, end);
        const double parent_mean = parent.count > 0 ? parent.mean() : fallback_mean;

        double gain = 0.0;
        if (left.count > 0 && right.count > 0) {
            gain = left.sum * left.sum / left.count + right.sum * right.sum / right.count -
                   parent.sum * parent.sum / parent.count;
        }

        TreeNode& node = tree.nodes[static_cast<size_t>(node_idx)];
        node.feature = feat;
        node.threshold = 0.5;
        node.missing_left = true;
        node.forced = true;
        node.gain = gain;

        const auto attach_child = [&](int spec_child, int b, int e, const NodeStats& s) {
            const double mean_here = s.count > 0 ? s.mean() : parent_mean;
            if (spec_child >= 0) {
                const int child = static_cast<int>(tree.nodes.size());
                materialize_forced(tree, spec, spec_child, b, e, mean_here, names);
                return child;
            }
            const int child = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes[static_cast<size_t>(child)].prediction = mean_here;
            ++leaf_count_;
            if (s.count > 0) push_work(tree, child, b, e, s);
            return child;
        };

        const int left_child = attach_child(spec_node.left, begin, mid, left);
        tree.nodes[static_cast<size_t>(node_idx)].left = left_child;
        const int right_child = attach_child(spec_node.right, mid, end, right);
        tree.nodes[static_cast<size_t>(node_idx)].right = right_child;
    }

    void push_work(const RegressionTree& tree, int node, int begin, int end,
                   const NodeStats& stats) {
        (void)tree;
        Work w;
        w.node = node;
        w.begin = begin;
        w.end = end;
        w.stats = stats;
        w.order_key = next_order_key_++;
        build_histogram(w);
        find_best_split(w);
        const int idx = static_cast<int>(works_.size());
        works_.push_back(std::move(w));
        if (works_[static_cast<size_t>(idx)].has_split)
            heap_.push({works_[static_cast<size_t>(idx)].gain,
                        works_[static_cast<size_t>(idx)].order_key, idx});
    }

    void build_histogram(Work& w) const {
        const int cols = binned_.cols;
        w.hsum.assign(static_cast<size_t>(cols) * static_cast<size_t>(stride_), 0.0);
        w.hcnt.assign(static_cast<size_t>(cols) * static_cast<size_t>(stride_), 0);
        for (int i = w.begin; i < w.end; ++i) {
            const int r = order_[static_cast<size_t>(i)];
            const double target = y_[r];
            const uint8_t* row =
                binned_.codes.data() + static_cast<size_t>(r) * static_cast<size_t>(cols);
            for (int f = 0; f < cols; ++f) {
                const int slot = row[f] == BinnedMatrix::kMissingCode ? stride_ - 1 : row[f];
                const size_t off =
                    static_cast<size_t>(f) * static_cast<size_t>(stride_) + static_cast<size_t>(slot);
                w.hsum[off] += target;
                w.hcnt[off] += 1;
            }
        }
    }

    void find_best_split(Work& w) const {
        w.has_split = false;
        const int n = w.stats.count;
        if (n < 2 * params_.min_samples_leaf) return;
        if (w.stats.ymax - w.stats.ymin == 0.0) return;  // pure node

        double best_gain = params_.min_gain;  // must strictly exceed
        const double parent_term = w.stats.sum * w.stats.sum / n;
        for (int f = 0; f < binned_.cols; ++f) {
            if (allowed_ && !(*allowed_)[static_cast<size_t>(f)]) continue;
            const auto& thr = binned_.thresholds[static_cast<size_t>(f)];
            if (thr.empty()) continue;
            const size_t base = static_cast<size_t>(f) * static_cast<size_t>(stride_);
            // missing goes to the fixed (left) child
            double left_sum = w.hsum[base + static_cast<size_t>(stride_ - 1)];
            int left_cnt = w.hcnt[base + static_cast<size_t>(stride_ - 1)];
            for (size_t b = 0; b < thr.size(); ++b) {
                left_sum += w.hsum[base + b];
                left_cnt += w.hcnt[base + b];
                const int right_cnt = n - left_cnt;
                if (right_cnt < params_.min_samples_leaf) break;
                if (left_cnt < params_.min_samples_leaf) continue;
                const double right_sum = w.stats.sum - left_sum;
                const double gain = left_sum * left_sum / left_cnt +
                                    right_sum * right_sum / right_cnt - parent_term;
                if (gain > best_gain) {
                    best_gain = gain;
                    w.has_split = true;
                    w.feature = f;
                    w.boundary = static_cast<int>(b);
                    w.threshold = thr[b];
                    w.gain = gain;
                }
            }
        }
    }

    void apply_split(RegressionTree& tree, Work& w) {
        const auto mid_it = std::stable_partition(
            order_.begin() + w.begin, order_.begin() + w.end, [&](int r) {
                const uint8_t code = binned_.code(r, w.feature);
                return code == BinnedMatrix::kMissingCode || code <= w.boundary;
            });
        const int mid = static_cast<int>(mid_it - order_.begin());

        const NodeStats left = scan_stats(y_, order_, w.begin, mid);
        const NodeStats right = scan_stats(y_, order_, mid, w.end);

        const int left_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<size_t>(left_idx)].prediction = left.mean();
        const int right_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<size_t>(right_idx)].prediction = right.mean();

        TreeNode& node = tree.nodes[static_cast<size_t>(w.node)];
        node.feature = w.feature;
        node.threshold = w.threshold;
        node.missing_left = true;
        node.forced = false;
        node.gain = w.gain;
        node.left = left_idx;
        node.right = right_idx;
        node.prediction = 0.0;
        ++leaf_count_;

        // histogram subtraction: scan the smaller child, derive the larger
        Work left_work, right_work;
        left_work.node = left_idx;
        left_work.begin = w.begin;
        left_work.end = mid;
        left_work.stats = left;
        left_work.order_key = next_order_key_++;
        right_work.node = right_idx;
        right_work.begin = mid;
        right_work.end = w.end;
        right_work.stats = right;
        right_work.order_key = next_order_key_++;

        Work& small = left.count <= right.count ? left_work : right_work;
        Work& large = left.count <= right.count ? right_work : left_work;
        build_histogram(small);
        large.hsum.resize(w.hsum.size());
        large.hcnt.resize(w.hcnt.size());
        for (size_t i = 0; i < w.hsum.size(); ++i) {
            large.hsum[i] = w.hsum[i] - small.hsum[i];
            large.hcnt[i] = w.hcnt[i] - small.hcnt[i];
        }
        w.hsum.clear();
        w.hsum.shrink_to_fit();
        w.hcnt.clear();
        w.hcnt.shrink_to_fit();

        for (Work* child : {&left_work, &right_work}) {
            find_best_split(*child);
            const int idx = static_cast<int>(works_.size());
            works_.push_back(std::move(*child));
            if (works_[static_cast<size_t>(idx)].has_split)
                heap_.push({works_[static_cast<size_t>(idx)].gain,
                            works_[static_cast<size_t>(idx)].order_key, idx});
        }
    }

    void assign_leaf_ids(RegressionTree& tree) const {
        if (tree.nodes.empty()) return;
        int next_id = 0;
        assign_leaf_ids_rec(tree, 0, next_id);
    }

    static void assign_leaf_ids_rec(RegressionTree& tree, int idx, int& next_id) {
        TreeNode& node = tree.nodes[static_cast<size_t>(idx)];
        if (node.is_leaf()) {
            node.leaf_id = next_id++;
            return;
        }
        assign_leaf_ids_rec(tree, node.left, next_id);
        assign_leaf_ids_rec(tree, node.right, next_id);
    }

    const BinnedMatrix& binned_;
    const Eigen::MatrixXd* X_;
    const Eigen::VectorXd& y_;
    const TreeFitParams& params_;
    const std::vector<uint8_t>* allowed_;
    const int stride_;
    std::vector<int> order_;
    std::deque<Work> works_;
    std::priority_queue<HeapEntry> heap_;
    int leaf_count_ = 0;
    int next_order_key_ = 0;
};

} // namespace

RegressionTree fit_tree_binned(const BinnedMatrix& binned, const Eigen::MatrixXd* X,
                               const Eigen::VectorXd& y, const TreeFitParams& params,
                               const ForcedSplitSpec* forced,
                               const std::vector<std::string>* feature_names,
                               const std::vector<uint8_t>* allowed_features) {
    if (binned.rows < 1) throw DataError("cannot fit a tree on an empty dataset");
    if (binned.rows != y.size()) throw DataError("X and y row counts differ");
    if (params.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    if (params.min_gain < 0.0) throw ConfigError("min_gain must be >= 0");
    const int forced_leaves = forced ? forced->leaf_slots() : 0;
    if (params.max_leaves < std::max(1, forced_leaves))
        throw ConfigError("max_leaves smaller than the forced leaf count");
    Grower grower(binned, X, y, params, allowed_features);
    return grower.grow(forced, feature_names);
}

RegressionTree fit_regression_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const TreeFitParams& params, const ForcedSplitSpec* forced,
                                   const std::vector<std::string>* feature_names,
                                   const std::vector<uint8_t>* allowed_features) {
    const BinnedMatrix binned = BinnedMatrix::build(X, params.max_bins);
    return fit_tree_binned(binned, &X, y, params, forced, feature_names, allowed_features);
}

// ---------------------------------------------------------------------------
// Prediction and introspection
// ---------------------------------------------------------------------------

RegressionTree::Routed RegressionTree::route(const Eigen::VectorXd& x) const {
    int idx = 0;
    while (true) {
        const TreeNode& node = nodes[static_cast<size_t>(idx)];
        if (node.is_leaf()) return {node.prediction, node.leaf_id};
        const double v = x[node.feature];
        const bool go_left = is_missing(v) ? node.missing_left : v <= node.threshold;
        idx = go_left ? node.left : node.right;
    }
}

void RegressionTree::accumulate_batch(const Eigen::MatrixXd& X, double shrinkage,
                                      Eigen::VectorXd& out) const {
    for (int r = 0; r < X.rows(); ++r) {
        int idx = 0;
        while (true) {
            const TreeNode& node = nodes[static_cast<size_t>(idx)];
            if (node.is_leaf()) {
                out[r] += shrinkage * node.prediction;
                break;
            }
            const double v = X(r, node.feature);
            const bool go_left = is_missing(v) ? node.missing_left : v <= node.threshold;
            idx = go_left ? node.left : node.right;
        }
    }
}

std::vector<double> RegressionTree::gain_by_feature(int n_features) const {
    std::vector<double> gains(static_cast<size_t>(n_features), 0.0);
    for (const auto& node : nodes)
        if (!node.is_leaf()) gains[static_cast<size_t>(node.feature)] += node.gain;
    return gains;
}

nlohmann::json RegressionTree::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& node : nodes) {
        if (node.is_leaf()) {
            arr.push_back({{"leaf_id", node.leaf_id}, {"prediction", node.prediction}});
        } else {
            arr.push_back({{"feature", node.feature},
                           {"threshold", node.threshold},
                           {"missing_left", node.missing_left},
                           {"forced", node.forced},
                           {"gain", node.gain},
                           {"left", node.left},
                           {"right", node.right}});
        }
    }
    return {{"leaf_count", leaf_count}, {"nodes", arr}};
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
    RegressionTree tree;
    tree.leaf_count = j.at("leaf_count").get<int>();
    for (const auto& nj : j.at("nodes")) {
        TreeNode node;
        if (nj.contains("feature")) {
            if (nj.size() != 7) throw VersionError("unexpected field in tree split node");
            node.feature = nj.at("feature").get<int>();
            node.threshold = nj.at("threshold").get<double>();
            node.missing_left = nj.at("missing_left").get<bool>();
            node.forced = nj.at("forced").get<bool>();
            node.gain = nj.at("gain").get<double>();
            node.left = nj.at("left").get<int>();
            node.right = nj.at("right").get<int>();
        } else {
            if (nj.size() != 2) throw VersionError("unexpected field in tree leaf node");
            node.prediction = nj.at("prediction").get<double>();
            node.leaf_id = nj.at("leaf_id").get<int>();
        }
        tree.nodes.push_back(node);
    }
    return tree;
}

} // namespace clv
