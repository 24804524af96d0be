#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "clv/feature_space.hpp"

namespace clv {

/// Prescribed top structure for a tree: a binary tree of binary-feature
/// tests. A missing child slot marks where greedy growth starts. Subtrees
/// may be asymmetric.
struct ForcedSplitSpec {
    struct Node {
        std::string feature;
        int left = -1;   // index into nodes, -1 = growth leaf
        int right = -1;
    };
    std::vector<Node> nodes;  // nodes[0] is the root when non-empty

    bool empty() const { return nodes.empty(); }
    /// Number of growth-leaf slots under the forced structure.
    int leaf_slots() const;
    /// Depth of the forced structure (0 when empty).
    int depth() const;

    nlohmann::json to_json() const;
    static ForcedSplitSpec from_json(const nlohmann::json& j);
};

struct TreeFitParams {
    int max_leaves = 31;
    int min_samples_leaf = 20;
    double min_gain = 0.0;  // a split must reduce SSE by strictly more than this
    int max_bins = 64;
};

struct TreeNode {
    // split fields (feature >= 0)
    int feature = -1;
    double threshold = 0.0;
    bool missing_left = true;
    bool forced = false;
    double gain = 0.0;  // SSE reduction realized by this split
    int left = -1;
    int right = -1;
    // leaf fields (feature < 0)
    double prediction = 0.0;
    int leaf_id = -1;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    int leaf_count = 0;

    struct Routed {
        double prediction = 0.0;
        int leaf_id = 0;
    };

    /// Deterministic routing: left iff value <= threshold; the missing
    /// sentinel follows the node's missing_left flag.
    Routed route(const Eigen::VectorXd& x) const;
    double predict(const Eigen::VectorXd& x) const { return route(x).prediction; }

    /// Adds shrinkage * prediction for every row of X into out.
    void accumulate_batch(const Eigen::MatrixXd& X, double shrinkage,
                          Eigen::VectorXd& out) const;

    /// Per-feature sum of split gains (indices into the fitting matrix).
    std::vector<double> gain_by_feature(int n_features) const;

    nlohmann::json to_json() const;
    static RegressionTree from_json(const nlohmann::json& j);
};

/// Quantile-based candidate thresholds for one feature column: all midpoints
/// when there are at most max_bins distinct finite values, otherwise
/// max_bins-1 quantile cuts. Missing values are ignored here.
std::vector<double> candidate_thresholds(const Eigen::VectorXd& column, int max_bins);

/// Pre-binned view of a feature matrix. Bin b holds values v with
/// thresholds[b-1] < v <= thresholds[b]; values above the last threshold get
/// the final bin; missing values get kMissingCode.
struct BinnedMatrix {
    static constexpr uint8_t kMissingCode = 255;

    int rows = 0;
    int cols = 0;
    std::vector<std::vector<double>> thresholds;  // per feature, ascending
    std::vector<uint8_t> codes;                   // row-major rows x cols

    uint8_t code(int r, int f) const {
        return codes[static_cast<size_t>(r) * static_cast<size_t>(cols) +
                     static_cast<size_t>(f)];
    }

    static BinnedMatrix build(const Eigen::MatrixXd& X, int max_bins);
};

/// Fits a regression tree by best-first variance-reduction growth over the
/// binned candidates, materializing `forced` verbatim at the top when given.
/// feature_names is required with forced specs (they name features);
/// allowed_features, when given, masks features out of greedy split search.
RegressionTree fit_regression_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const TreeFitParams& params,
                                   const ForcedSplitSpec* forced = nullptr,
                                   const std::vector<std::string>* feature_names = nullptr,
                                   const std::vector<uint8_t>* allowed_features = nullptr);

/// Same fit against an existing binned matrix (X is only consulted for
/// forced-split partitioning and may be null without a forced spec).
RegressionTree fit_tree_binned(const BinnedMatrix& binned, const Eigen::MatrixXd* X,
                               const Eigen::VectorXd& y, const TreeFitParams& params,
                               const ForcedSplitSpec* forced = nullptr,
                               const std::vector<std::string>* feature_names = nullptr,
                               const std::vector<uint8_t>* allowed_features = nullptr);

} // namespace clv
