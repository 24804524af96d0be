#pragma once
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "clv/tree.hpp"

namespace clv {

enum class BoostTask { regression, multiclass };

/// Additive tree ensemble. For multiclass(K) every round holds K trees (one
/// per class); regression rounds hold a single tree.
struct GradientBoostedEnsemble {
    BoostTask task = BoostTask::regression;
    int n_classes = 1;
    double shrinkage = 0.1;
    std::vector<double> init_scores;                 // size n_classes
    std::vector<std::vector<RegressionTree>> rounds; // rounds[r][k]
    std::vector<std::string> feature_names;
    TreeFitParams params;

    /// Raw additive scores, one per class.
    Eigen::VectorXd scores(const Eigen::VectorXd& x) const;
    /// Regression prediction. TaskError for multiclass models.
    double predict(const Eigen::VectorXd& x) const;
    /// Softmax class probabilities. TaskError for regression models.
    Eigen::VectorXd predict_proba(const Eigen::VectorXd& x) const;

    nlohmann::json to_json() const;
    static GradientBoostedEnsemble from_json(const nlohmann::json& j);
};

/// Training-loss sequence; entry 0 is the loss before any round, entry r the
/// loss after round r.
struct BoostFitTrace {
    std::vector<double> loss_per_round;
};

GradientBoostedEnsemble fit_gbdt_regressor(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                           int rounds, double shrinkage,
                                           const TreeFitParams& params,
                                           const std::vector<std::string>& feature_names,
                                           BoostFitTrace* trace = nullptr);

/// Softmax multi-class boosting: init scores are log class frequencies with a
/// one-count floor for absent classes, each round fits one tree per class to
/// that class's softmax residuals.
GradientBoostedEnsemble fit_gbdt_classifier(const Eigen::MatrixXd& X,
                                            const std::vector<int>& labels, int n_classes,
                                            int rounds, double shrinkage,
                                            const TreeFitParams& params,
                                            const std::vector<std::string>& feature_names,
                                            BoostFitTrace* trace = nullptr, int threads = 1);

/// Softmax with max-shift; rows of `scores` are class scores.
Eigen::VectorXd softmax(const Eigen::VectorXd& scores);

/// Total split gain per feature, summed over all trees; features never split
/// on report 0.
std::map<std::string, double> feature_importances(const GradientBoostedEnsemble& model);
std::map<std::string, double> feature_importances(const RegressionTree& tree,
                                                  const std::vector<std::string>& names);

} // namespace clv
