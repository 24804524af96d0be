#pragma once
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "clv/predictors.hpp"
#include "clv/segmentation.hpp"

namespace clv {

/// Size of a top/bottom-x% set: round(x% * n), at least 1.
int top_set_size(double x_percent, int n);

/// Indices ranked by value descending / ascending; ties keep input order.
std::vector<int> rank_desc(const std::vector<double>& values);
std::vector<int> rank_asc(const std::vector<double>& values);

/// Median absolute error; even counts average the two middle values.
double medae(const std::vector<double>& predicted, const std::vector<double>& actual);

/// Mean actual value over the top-x%-by-predicted divided by the mean over
/// the bottom-x%-by-predicted. Empty when the denominator is zero.
std::optional<double> separation(const std::vector<double>& predicted,
                                 const std::vector<double>& actual, double x_percent);

/// Share of the top-x%-by-predicted that is also top-x%-by-actual.
double top_x_precision(const std::vector<double>& predicted,
                       const std::vector<double>& actual, double x_percent);

/// Argmax-match accuracy of predicted next-segment distributions (argmax ties
/// resolve to the lowest segment id); both sides optionally mapped through
/// `class_mapping` (e.g. the four-class bucketing).
double transition_accuracy(const std::vector<Eigen::VectorXd>& predicted,
                           const std::vector<int>& actual_segments,
                           const std::function<int(int)>& class_mapping = nullptr);

/// segment -> bucket index mapping through a segmentation model's first two
/// forced levels (churn keeps its own bucket).
std::function<int(int)> four_class_mapping(const SegmentationModel& model);

struct LiftPoint {
    double x_percent = 0.0;
    std::optional<double> lift;  // empty when baseline uptake is zero
};

/// Lift(x) = uptake rate within the top-x%-by-propensity over the overall
/// uptake rate; Lift(100) = 1 whenever the baseline is nonzero.
std::vector<LiftPoint> lift_curve(const std::vector<double>& propensities,
                                  const std::vector<bool>& actual_uptake,
                                  const std::vector<double>& x_grid);

struct DecileMatrix {
    Eigen::MatrixXd matrix;  // 10x10, rows normalized
    double moved_share = 0.0;
};

/// Decile-to-decile transition shares between two aligned cv snapshots;
/// decile 0 is the lowest-ranked tenth within each year.
DecileMatrix decile_transition_matrix(const std::vector<double>& cv_year_a,
                                      const std::vector<double>& cv_year_b);

/// Transition mass into the target subtrees for a customer currently outside
/// them; NotApplicable when the customer's four-class bucket is already a
/// target.
double propensity(const TransitionModel& model, const SegmentationModel& segmentation,
                  int s_prev, const Eigen::VectorXd& x_base,
                  const std::vector<std::string>& target_subtrees);

struct MetricsReport {
    std::string period_label;
    int n_customers = 0;
    double medae = 0.0;
    std::map<int, std::optional<double>> separation;  // x% -> ratio
    std::map<int, double> top_x_precision;            // x% -> share
    double accuracy_50 = 0.0;  // segment-level argmax accuracy
    double accuracy_4 = 0.0;   // four-class (plus churn bucket) accuracy

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

} // namespace clv
