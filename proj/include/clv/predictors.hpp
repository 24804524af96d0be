#pragma once
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "clv/boosting.hpp"
#include "clv/panel.hpp"
#include "clv/segmentation.hpp"

namespace clv {

/// `full` models see every panel feature and run the first simulated period;
/// `simple` models are restricted to static and progressible features and run
/// every later period.
enum class ModelVariant { full, simple };

const char* model_variant_name(ModelVariant v);
ModelVariant model_variant_from_name(const std::string& s);

/// Multi-class next-segment classifier over base features plus a one-hot
/// previous-segment block.
struct TransitionModel {
    ModelVariant variant = ModelVariant::full;
    int n_segments = 0;
    std::vector<std::string> base_features;
    GradientBoostedEnsemble classifier;

    /// Length-S distribution over next segments; x_base is aligned with
    /// base_features.
    Eigen::VectorXd predict(int s_prev, const Eigen::VectorXd& x_base) const;

    nlohmann::json to_json() const;
    static TransitionModel from_json(const nlohmann::json& j);
};

/// Regressor for v(candidate segment, features); the full variant also takes
/// the previous year's cv as a feature.
struct ValueAssignerModel {
    ModelVariant variant = ModelVariant::full;
    int n_segments = 0;
    std::vector<std::string> base_features;
    bool uses_lagged_cv = false;
    GradientBoostedEnsemble regressor;

    double predict(int candidate_segment, const Eigen::VectorXd& x_base,
                   double lagged_cv = 0.0) const;

    nlohmann::json to_json() const;
    static ValueAssignerModel from_json(const nlohmann::json& j);
};

/// Frequency-estimated transition matrix plus per-segment mean values.
struct MarkovBaseline {
    Eigen::MatrixXd transition;  // S x S, row-stochastic
    Eigen::VectorXd mean_value;  // length S, churn entry 0

    nlohmann::json to_json() const;
    static MarkovBaseline from_json(const nlohmann::json& j);
};

/// One training row per (customer, consecutive year pair). For transitions:
/// X = features at t-1 + one-hot(segment at t-1), y = segment at t. For value
/// assignment: X = features at t-1 + one-hot(segment at t) (+ cv at t-1 when
/// lagged), y = cv at t (0 for churn years).
struct TrainingTable {
    Eigen::MatrixXd X;
    std::vector<int> labels;        // transition targets (class = segment-1)
    Eigen::VectorXd targets;        // value targets
    std::vector<std::string> feature_names;
    int n_base_features = 0;        // leading base-feature columns
    std::vector<std::pair<int, int>> record_pairs;  // (row at t-1, row at t)
};

std::vector<std::string> transition_onehot_names(int n_segments);
std::vector<std::string> candidate_onehot_names(int n_segments);

TrainingTable build_transition_training(const PanelDataset& panel,
                                        const SegmentAssignments& assignments, int n_segments,
                                        const std::vector<std::string>& base_features);

TrainingTable build_value_training(const PanelDataset& panel,
                                   const SegmentAssignments& assignments, int n_segments,
                                   const std::vector<std::string>& base_features,
                                   bool with_lagged_cv);

struct PredictorFitParams {
    int rounds = 100;
    double shrinkage = 0.1;
    TreeFitParams tree;
    int importance_rounds = 15;       // pre-fit pass for full-model selection
    int importance_subsample = 5000;  // rows (strided) in the pass
    int threads = 1;
};

/// Full variant: importance pass on a subsample keeps the top
/// min(feature_budget, available) base features, then fits. Simple variant:
/// fits on the given base features unchanged (budget ignored).
TransitionModel fit_transition(const TrainingTable& table, ModelVariant variant,
                               int n_segments, int feature_budget,
                               const PredictorFitParams& params,
                               BoostFitTrace* trace = nullptr);

ValueAssignerModel fit_value_assigner(const TrainingTable& table, ModelVariant variant,
                                      int n_segments, const PredictorFitParams& params,
                                      BoostFitTrace* trace = nullptr);

/// Transition matrix from hand-supplied (from, to) segment pairs and
/// (segment, cv) observations; rows without observations become uniform.
MarkovBaseline fit_markov_baseline(const std::vector<std::pair<int, int>>& transitions,
                                   const std::vector<std::pair<int, double>>& segment_values,
                                   int n_segments);

MarkovBaseline fit_markov_baseline(const PanelDataset& panel,
                                   const SegmentAssignments& assignments, int n_segments);

/// Row of the transition matrix plus the (state-independent) mean values.
std::pair<Eigen::VectorXd, Eigen::VectorXd> baseline_predict(const MarkovBaseline& baseline,
                                                             int s_prev);

} // namespace clv
