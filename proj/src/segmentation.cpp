#include "clv/segmentation.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace clv {

const char* four_class_name(FourClass c) {
    switch (c) {
        case FourClass::s00: return "S00";
        case FourClass::s01: return "S01";
        case FourClass::s10: return "S10";
        case FourClass::s11: return "S11";
        case FourClass::churn: return "churn";
    }
    throw ConfigError("unknown four-class bucket");
}

FourClass four_class_from_name(const std::string& name) {
    if (name == "S00") return FourClass::s00;
    if (name == "S01") return FourClass::s01;
    if (name == "S10") return FourClass::s10;
    if (name == "S11") return FourClass::s11;
    if (name == "churn") return FourClass::churn;
    throw ConfigError("unknown four-class label: " + name);
}

FourClass SegmentationModel::four_class_of(int segment) const {
    if (segment == churn_segment()) return FourClass::churn;
    if (segment < 1 || segment > used_segments())
        throw ConfigError("segment id out of range: " + std::to_string(segment));
    return four_class_by_segment[static_cast<size_t>(segment - 1)];
}

std::vector<int> SegmentationModel::segments_in_subtrees(
    const std::vector<std::string>& labels) const {
    std::vector<int> out;
    for (const auto& label : labels) {
        auto it = subtree_map.find(label);
        if (it == subtree_map.end()) throw ConfigError("unknown subtree label: " + label);
        out.insert(out.end(), it->second.begin(), it->second.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

void collect_leaf_segments(const RegressionTree& tree, int idx, std::vector<int>& out) {
    const TreeNode& node = tree.nodes[static_cast<size_t>(idx)];
    if (node.is_leaf()) {
        out.push_back(node.leaf_id + 1);
        return;
    }
    collect_leaf_segments(tree, node.left, out);
    collect_leaf_segments(tree, node.right, out);
}

// Group roots are the first non-forced nodes reached from the root; the
// four-class bucket of everything beneath a group root is fixed by the
// branches taken at the first two forced levels (missing levels count as
// "no").
void walk_forced(const RegressionTree& tree, int idx, int depth, bool b1, bool b2,
                 std::vector<std::vector<int>>& groups,
                 std::vector<FourClass>& four_class_by_segment) {
    const TreeNode& node = tree.nodes[static_cast<size_t>(idx)];
    if (!node.is_leaf() && node.forced) {
        walk_forced(tree, node.left, depth + 1, depth == 0 ? false : b1,
                    depth == 1 ? false : b2, groups, four_class_by_segment);
        walk_forced(tree, node.right, depth + 1, depth == 0 ? true : b1,
                    depth == 1 ? true : b2, groups, four_class_by_segment);
        return;
    }
    std::vector<int> segments;
    collect_leaf_segments(tree, idx, segments);
    std::sort(segments.begin(), segments.end());
    const FourClass cls = b1 ? (b2 ? FourClass::s11 : FourClass::s10)
                             : (b2 ? FourClass::s01 : FourClass::s00);
    for (int s : segments) four_class_by_segment[static_cast<size_t>(s - 1)] = cls;
    groups.push_back(std::move(segments));
}

void derive_structure(SegmentationModel& model) {
    model.four_class_by_segment.assign(static_cast<size_t>(model.used_segments()),
                                       FourClass::s00);
    std::vector<std::vector<int>> groups;
    walk_forced(model.tree, 0, 0, false, false, groups, model.four_class_by_segment);

    model.subtree_map.clear();
    for (size_t g = 0; g < groups.size(); ++g) {
        char label[16];
        std::snprintf(label, sizeof(label), "group_%02zu", g + 1);
        model.subtree_map[label] = groups[g];
    }
    for (FourClass c : {FourClass::s00, FourClass::s01, FourClass::s10, FourClass::s11}) {
        std::vector<int> segs;
        for (int s = 1; s <= model.used_segments(); ++s)
            if (model.four_class_by_segment[static_cast<size_t>(s - 1)] == c) segs.push_back(s);
        model.subtree_map[four_class_name(c)] = segs;
    }
}

} // namespace

SegmentationModel fit_segmentation(const PanelDataset& train, int base_year,
                                   const ForcedSplitSpec& forced, int n_segments,
                                   const TreeFitParams& params,
                                   const std::vector<std::string>& excluded_features) {
    if (n_segments < forced.leaf_slots() + 1)
        throw ConfigError("n_segments must exceed the forced leaf count (churn id reserved)");
    if (n_segments < 2) throw ConfigError("n_segments must be >= 2");

    std::vector<int> rows;
    for (size_t i = 0; i < train.records.size(); ++i)
        if (train.records[i].year_index == base_year && !train.records[i].churned)
            rows.push_back(static_cast<int>(i));
    if (rows.empty())
        throw DataError("no non-churned rows in base year " + std::to_string(base_year));

    const int n_features = train.schema.size();
    Eigen::MatrixXd X(static_cast<int>(rows.size()), n_features);
    Eigen::VectorXd y(static_cast<int>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        X.row(static_cast<int>(i)) = train.records[static_cast<size_t>(rows[i])].features;
        y[static_cast<int>(i)] = train.records[static_cast<size_t>(rows[i])].cv;
    }

    std::vector<uint8_t> allowed(static_cast<size_t>(n_features), 1);
    for (const auto& name : excluded_features) {
        const int idx = train.schema.index_of(name);
        if (idx >= 0) allowed[static_cast<size_t>(idx)] = 0;
    }

    TreeFitParams tree_params = params;
    tree_params.max_leaves = n_segments - 1;

    SegmentationModel model;
    model.feature_names = train.schema.names();
    model.forced = forced;
    model.n_segments = n_segments;
    model.tree = fit_regression_tree(X, y, tree_params, forced.empty() ? nullptr : &forced,
                                     &model.feature_names, &allowed);
    derive_structure(model);
    return model;
}

SegmentAssignments assign_segments(const SegmentationModel& model, const PanelDataset& panel) {
    if (panel.schema.names() != model.feature_names)
        throw SchemaError("panel schema does not match the segmentation model");
    SegmentAssignments out;
    out.segment_by_record.reserve(panel.records.size());
    for (const auto& rec : panel.records) {
        if (rec.churned) {
            out.segment_by_record.push_back(model.churn_segment());
        } else {
            out.segment_by_record.push_back(model.tree.route(rec.features).leaf_id + 1);
        }
    }
    return out;
}

ForcedSplitSpec default_forced_splits() {
    ForcedSplitSpec spec;
    const auto add = [&](const std::string& feature) {
        spec.nodes.push_back({feature, -1, -1});
        return static_cast<int>(spec.nodes.size()) - 1;
    };
    const int root = add("mortgage_held");
    const int no_mort = add("investment_held");
    spec.nodes[root].left = no_mort;
    for (int inv_branch = 0; inv_branch < 2; ++inv_branch) {
        const int cc = add("credit_card_held");
        (inv_branch == 0 ? spec.nodes[no_mort].left : spec.nodes[no_mort].right) = cc;
        const int sav_left = add("savings_held");
        spec.nodes[cc].left = sav_left;
        const int sav_right = add("savings_held");
        spec.nodes[cc].right = sav_right;
    }
    const int with_mort = add("investment_held");
    spec.nodes[root].right = with_mort;
    return spec;
}

nlohmann::json SegmentationModel::to_json() const {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& [label, segments] : subtree_map)
        groups.push_back({{"label", label}, {"segments", segments}});
    nlohmann::json four = nlohmann::json::array();
    for (FourClass c : four_class_by_segment) four.push_back(four_class_name(c));
    return {{"feature_names", feature_names},
            {"forced", forced.to_json()},
            {"four_class_by_segment", four},
            {"n_segments", n_segments},
            {"subtree_map", groups},
            {"tree", tree.to_json()}};
}

SegmentationModel SegmentationModel::from_json(const nlohmann::json& j) {
    static const std::vector<std::string> keys = {"feature_names", "forced",
                                                  "four_class_by_segment", "n_segments",
                                                  "subtree_map", "tree"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw VersionError("unexpected field in segmentation model: " + key);
    }
    SegmentationModel model;
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    model.forced = ForcedSplitSpec::from_json(j.at("forced"));
    model.n_segments = j.at("n_segments").get<int>();
    model.tree = RegressionTree::from_json(j.at("tree"));
    for (const auto& name : j.at("four_class_by_segment"))
        model.four_class_by_segment.push_back(four_class_from_name(name.get<std::string>()));
    for (const auto& group : j.at("subtree_map"))
        model.subtree_map[group.at("label").get<std::string>()] =
            group.at("segments").get<std::vector<int>>();
    return model;
}

} // namespace clv
