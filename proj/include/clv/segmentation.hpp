#pragma once
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "clv/panel.hpp"
#include "clv/tree.hpp"

namespace clv {

/// Bucket induced by the first two forced levels of the segmentation tree
/// (mortgage, investment in the shipped spec), plus the reserved churn state.
enum class FourClass { s00, s01, s10, s11, churn };

const char* four_class_name(FourClass c);
FourClass four_class_from_name(const std::string& name);

/// Single CV-regression tree with a forced product-holding prefix. Leaves map
/// to segments 1..leaf_count; segment id S is reserved for churn and is never
/// a tree leaf.
struct SegmentationModel {
    RegressionTree tree;
    int n_segments = 0;  // S, including the reserved churn id
    ForcedSplitSpec forced;
    std::vector<std::string> feature_names;
    std::vector<FourClass> four_class_by_segment;           // segment s at index s-1
    std::map<std::string, std::vector<int>> subtree_map;    // S00..S11 and group_01..group_NN

    int churn_segment() const { return n_segments; }
    /// Number of segments realized as tree leaves (<= S-1).
    int used_segments() const { return tree.leaf_count; }

    FourClass four_class_of(int segment) const;
    /// Union of subtree_map entries for the given labels (e.g. {"S01","S11"}).
    std::vector<int> segments_in_subtrees(const std::vector<std::string>& labels) const;

    nlohmann::json to_json() const;
    static SegmentationModel from_json(const nlohmann::json& j);
};

/// Fits the segmentation tree on the non-churned rows of `base_year` with cv
/// as the target and max_leaves = S-1. Features named in `excluded_features`
/// (age-like ones by default) are kept out of greedy split search.
SegmentationModel fit_segmentation(const PanelDataset& train, int base_year,
                                   const ForcedSplitSpec& forced, int n_segments,
                                   const TreeFitParams& params,
                                   const std::vector<std::string>& excluded_features = {
                                       "age_years"});

/// Segment per panel record, aligned with panel.records. Churned records get
/// the churn segment; others route through the tree.
struct SegmentAssignments {
    std::vector<int> segment_by_record;
};

SegmentAssignments assign_segments(const SegmentationModel& model, const PanelDataset& panel);

/// Default forced structure: mortgage at the root, investment second, then a
/// credit-card/savings ladder on the no-mortgage side only; ten growth slots.
ForcedSplitSpec default_forced_splits();

} // namespace clv
