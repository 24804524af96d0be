#include "clv/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "clv/parallel.hpp"
#include "clv/rng.hpp"
#include "clv/text.hpp"

namespace clv {

namespace {

const char* task_name(BoostTask t) {
    return t == BoostTask::regression ? "regression" : "multiclass";
}

BoostTask task_from_name(const std::string& s) {
    if (s == "regression") return BoostTask::regression;
    if (s == "multiclass") return BoostTask::multiclass;
    throw VersionError("unknown ensemble task: " + s);
}

} // namespace

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
    const double shift = scores.maxCoeff();
    Eigen::VectorXd p = (scores.array() - shift).exp();
    p /= p.sum();
    return p;
}

Eigen::VectorXd GradientBoostedEnsemble::scores(const Eigen::VectorXd& x) const {
    Eigen::VectorXd s(n_classes);
    for (int k = 0; k < n_classes; ++k) s[k] = init_scores[static_cast<size_t>(k)];
    for (const auto& round : rounds)
        for (int k = 0; k < n_classes; ++k)
            s[k] += shrinkage * round[static_cast<size_t>(k)].predict(x);
    return s;
}

double GradientBoostedEnsemble::predict(const Eigen::VectorXd& x) const {
    if (task != BoostTask::regression)
        throw TaskError("predict requires a regression ensemble");
    return scores(x)[0];
}

Eigen::VectorXd GradientBoostedEnsemble::predict_proba(const Eigen::VectorXd& x) const {
    if (task != BoostTask::multiclass)
        throw TaskError("predict_proba requires a multiclass ensemble");
    return softmax(scores(x));
}

GradientBoostedEnsemble fit_gbdt_regressor(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                           int rounds, double shrinkage,
                                           const TreeFitParams& params,
                                           const std::vector<std::string>& feature_names,
                                           BoostFitTrace* trace) {
    if (rounds < 0) throw ConfigError("rounds must be >= 0");
    if (!(shrinkage > 0.0 && shrinkage <= 1.0))
        throw ConfigError("shrinkage must be in (0, 1]");
    if (X.rows() < 1) throw DataError("cannot fit on an empty dataset");
    if (static_cast<int>(feature_names.size()) != X.cols())
        throw SchemaError("feature name count does not match matrix width");

    GradientBoostedEnsemble model;
    model.task = BoostTask::regression;
    model.n_classes = 1;
    model.shrinkage = shrinkage;
    model.feature_names = feature_names;
    model.params = params;
    model.init_scores = {y.mean()};

    const BinnedMatrix binned = BinnedMatrix::build(X, params.max_bins);
    Eigen::VectorXd current = Eigen::VectorXd::Constant(X.rows(), model.init_scores[0]);
    if (trace) {
        trace->loss_per_round.clear();
        trace->loss_per_round.push_back((y - current).squaredNorm() / X.rows());
    }
    for (int r = 0; r < rounds; ++r) {
        const Eigen::VectorXd residual = y - current;
        RegressionTree tree = fit_tree_binned(binned, nullptr, residual, params);
        tree.accumulate_batch(X, shrinkage, current);
        model.rounds.push_back({std::move(tree)});
        if (trace) trace->loss_per_round.push_back((y - current).squaredNorm() / X.rows());
    }
    return model;
}

GradientBoostedEnsemble fit_gbdt_classifier(const Eigen::MatrixXd& X,
                                            const std::vector<int>& labels, int n_classes,
                                            int rounds, double shrinkage,
                                            const TreeFitParams& params,
                                            const std::vector<std::string>& feature_names,
                                            BoostFitTrace* trace, int threads) {
    if (n_classes < 2) throw ConfigError("multiclass requires K >= 2");
    if (rounds < 0) throw ConfigError("rounds must be >= 0");
    if (!(shrinkage > 0.0 && shrinkage <= 1.0))
        throw ConfigError("shrinkage must be in (0, 1]");
    const int n = static_cast<int>(X.rows());
    if (n < 1) throw DataError("cannot fit on an empty dataset");
    if (static_cast<int>(labels.size()) != n) throw DataError("label count mismatch");
    if (static_cast<int>(feature_names.size()) != X.cols())
        throw SchemaError("feature name count does not match matrix width");
    for (int label : labels)
        if (label < 0 || label >= n_classes) throw DataError("label out of range");

    GradientBoostedEnsemble model;
    model.task = BoostTask::multiclass;
    model.n_classes = n_classes;
    model.shrinkage = shrinkage;
    model.feature_names = feature_names;
    model.params = params;

    // init = log empirical class frequency; absent classes get a one-count
    // floor so every class keeps nonzero probability
    std::vector<int> counts(static_cast<size_t>(n_classes), 0);
    for (int label : labels) ++counts[static_cast<size_t>(label)];
    model.init_scores.resize(static_cast<size_t>(n_classes));
    for (int k = 0; k < n_classes; ++k)
        model.init_scores[static_cast<size_t>(k)] =
            std::log(static_cast<double>(std::max(counts[static_cast<size_t>(k)], 1)) / n);

    const BinnedMatrix binned = BinnedMatrix::build(X, params.max_bins);

    Eigen::MatrixXd score(n, n_classes);
    for (int k = 0; k < n_classes; ++k)
        score.col(k).setConstant(model.init_scores[static_cast<size_t>(k)]);

    Eigen::MatrixXd proba(n, n_classes);
    const auto refresh_proba = [&]() {
        for (int i = 0; i < n; ++i) {
            const double shift = score.row(i).maxCoeff();
            proba.row(i) = (score.row(i).array() - shift).exp();
            proba.row(i) /= proba.row(i).sum();
        }
    };
    const auto log_loss = [&]() {
        double total = 0.0;
        for (int i = 0; i < n; ++i)
            total -= std::log(std::max(proba(i, labels[static_cast<size_t>(i)]), 1e-300));
        return total / n;
    };

    refresh_proba();
    if (trace) {
        trace->loss_per_round.clear();
        trace->loss_per_round.push_back(log_loss());
    }

    for (int r = 0; r < rounds; ++r) {
        std::vector<RegressionTree> round_trees(static_cast<size_t>(n_classes));
        parallel_for(n_classes, threads, [&](int k) {
            Eigen::VectorXd residual(n);
            for (int i = 0; i < n; ++i)
                residual[i] = (labels[static_cast<size_t>(i)] == k ? 1.0 : 0.0) - proba(i, k);
            round_trees[static_cast<size_t>(k)] = fit_tree_binned(binned, nullptr, residual, params);
        });
        for (int k = 0; k < n_classes; ++k) {
            Eigen::VectorXd col = score.col(k);
            round_trees[static_cast<size_t>(k)].accumulate_batch(X, shrinkage, col);
            score.col(k) = col;
        }
        model.rounds.push_back(std::move(round_trees));
        refresh_proba();
        if (trace) trace->loss_per_round.push_back(log_loss());
    }
    return model;
}

std::map<std::string, double> feature_importances(const RegressionTree& tree,
                                                  const std::vector<std::string>& names) {
    std::map<std::string, double> out;
    const auto gains = tree.gain_by_feature(static_cast<int>(names.size()));
    for (size_t f = 0; f < names.size(); ++f) out[names[f]] = gains[f];
    return out;
}

std::map<std::string, double> feature_importances(const GradientBoostedEnsemble& model) {
    std::vector<double> gains(model.feature_names.size(), 0.0);
    for (const auto& round : model.rounds)
        for (const auto& tree : round) {
            const auto tree_gains = tree.gain_by_feature(static_cast<int>(gains.size()));
            for (size_t f = 0; f < gains.size(); ++f) gains[f] += tree_gains[f];
        }
    std::map<std::string, double> out;
    for (size_t f = 0; f < model.feature_names.size(); ++f)
        out[model.feature_names[f]] = gains[f];
    return out;
}

nlohmann::json GradientBoostedEnsemble::to_json() const {
    nlohmann::json rounds_json = nlohmann::json::array();
    for (const auto& round : rounds) {
        nlohmann::json round_json = nlohmann::json::array();
        for (const auto& tree : round) round_json.push_back(tree.to_json());
        rounds_json.push_back(std::move(round_json));
    }
    std::string joined;
    for (const auto& name : feature_names) {
        joined += name;
        joined += '\n';
    }
    return {{"feature_hash", hex64(fnv1a64(joined))},
            {"feature_names", feature_names},
            {"format_version", 1},
            {"init_scores", init_scores},
            {"n_classes", n_classes},
            {"params",
             {{"max_bins", params.max_bins},
              {"max_leaves", params.max_leaves},
              {"min_gain", params.min_gain},
              {"min_samples_leaf", params.min_samples_leaf}}},
            {"rounds", rounds_json},
            {"shrinkage", shrinkage},
            {"task", task_name(task)}};
}

GradientBoostedEnsemble GradientBoostedEnsemble::from_json(const nlohmann::json& j) {
    static const std::vector<std::string> keys = {"feature_hash", "feature_names",
                                                  "format_version", "init_scores",
                                                  "n_classes",    "params",
                                                  "rounds",       "shrinkage",
                                                  "task"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw VersionError("unexpected field in ensemble: " + key);
    }
    if (!j.contains("format_version") || j.at("format_version").get<int>() != 1)
        throw VersionError("unsupported ensemble format version");
    GradientBoostedEnsemble model;
    model.task = task_from_name(j.at("task").get<std::string>());
    model.n_classes = j.at("n_classes").get<int>();
    model.shrinkage = j.at("shrinkage").get<double>();
    model.init_scores = j.at("init_scores").get<std::vector<double>>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    std::string joined;
    for (const auto& name : model.feature_names) {
        joined += name;
        joined += '\n';
    }
    if (j.at("feature_hash").get<std::string>() != hex64(fnv1a64(joined)))
        throw VersionError("ensemble feature hash mismatch");
    const auto& pj = j.at("params");
    model.params.max_bins = pj.at("max_bins").get<int>();
    model.params.max_leaves = pj.at("max_leaves").get<int>();
    model.params.min_gain = pj.at("min_gain").get<double>();
    model.params.min_samples_leaf = pj.at("min_samples_leaf").get<int>();
    for (const auto& round_json : j.at("rounds")) {
        std::vector<RegressionTree> round;
        for (const auto& tree_json : round_json)
            round.push_back(RegressionTree::from_json(tree_json));
        model.rounds.push_back(std::move(round));
    }
    return model;
}

} // namespace clv
