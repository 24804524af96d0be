#include "clv/predictors.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace clv {

const char* model_variant_name(ModelVariant v) {
    return v == ModelVariant::full ? "full" : "simple";
}

ModelVariant model_variant_from_name(const std::string& s) {
    if (s == "full") return ModelVariant::full;
    if (s == "simple") return ModelVariant::simple;
    throw VersionError("unknown model variant: " + s);
}

std::vector<std::string> transition_onehot_names(int n_segments) {
    std::vector<std::string> names;
    names.reserve(static_cast<size_t>(n_segments));
    for (int s = 1; s <= n_segments; ++s)
        names.push_back("prev_segment_is_" + std::to_string(s));
    return names;
}

std::vector<std::string> candidate_onehot_names(int n_segments) {
    std::vector<std::string> names;
    names.reserve(static_cast<size_t>(n_segments));
    for (int s = 1; s <= n_segments; ++s)
        names.push_back("candidate_segment_is_" + std::to_string(s));
    return names;
}

namespace {

// Consecutive-year row pairs (t-1 non-churned, t present), pooled across all
// years of the panel.
std::vector<std::pair<int, int>> consecutive_pairs(const PanelDataset& panel) {
    std::vector<std::pair<int, int>> pairs;
    const PanelIndex index(panel);
    for (const auto& id : panel.customer_ids()) {
        const auto& rows = index.rows_of(id);
        for (size_t i = 0; i + 1 < rows.size(); ++i) {
            const auto& prev = panel.records[static_cast<size_t>(rows[i])];
            const auto& next = panel.records[static_cast<size_t>(rows[i + 1])];
            if (prev.churned) continue;
            if (next.year_index != prev.year_index + 1) continue;
            pairs.emplace_back(rows[i], rows[i + 1]);
        }
    }
    return pairs;
}

std::vector<int> base_indices(const PanelDataset& panel,
                              const std::vector<std::string>& base_features) {
    if (base_features.empty()) throw ConfigError("base feature list is empty");
    return column_indices(panel.schema.names(), base_features);
}

} // namespace

TrainingTable build_transition_training(const PanelDataset& panel,
                                        const SegmentAssignments& assignments, int n_segments,
                                        const std::vector<std::string>& base_features) {
    const auto cols = base_indices(panel, base_features);
    const auto pairs = consecutive_pairs(panel);
    if (pairs.empty()) throw DataError("panel provides no consecutive year pairs");

    TrainingTable table;
    table.feature_names = base_features;
    const auto onehot = transition_onehot_names(n_segments);
    table.feature_names.insert(table.feature_names.end(), onehot.begin(), onehot.end());
    table.n_base_features = static_cast<int>(base_features.size());
    table.record_pairs = pairs;

    const int width = static_cast<int>(table.feature_names.size());
    table.X.setZero(static_cast<int>(pairs.size()), width);
    table.labels.reserve(pairs.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
        const auto& prev = panel.records[static_cast<size_t>(pairs[i].first)];
        for (size_t c = 0; c < cols.size(); ++c)
            table.X(static_cast<int>(i), static_cast<int>(c)) = prev.features[cols[c]];
        const int s_prev = assignments.segment_by_record[static_cast<size_t>(pairs[i].first)];
        table.X(static_cast<int>(i), table.n_base_features + s_prev - 1) = 1.0;
        const int s_next = assignments.segment_by_record[static_cast<size_t>(pairs[i].second)];
        table.labels.push_back(s_next - 1);
    }
    return table;
}

TrainingTable build_value_training(const PanelDataset& panel,
                                   const SegmentAssignments& assignments, int n_segments,
                                   const std::vector<std::string>& base_features,
                                   bool with_lagged_cv) {
    const auto cols = base_indices(panel, base_features);
    const auto pairs = consecutive_pairs(panel);
    if (pairs.empty()) throw DataError("panel provides no consecutive year pairs");

    TrainingTable table;
    table.feature_names = base_features;
    const auto onehot = candidate_onehot_names(n_segments);
    table.feature_names.insert(table.feature_names.end(), onehot.begin(), onehot.end());
    if (with_lagged_cv) table.feature_names.push_back("cv_lag1");
    table.n_base_features = static_cast<int>(base_features.size());
    table.record_pairs = pairs;

    const int width = static_cast<int>(table.feature_names.size());
    table.X.setZero(static_cast<int>(pairs.size()), width);
    table.targets.resize(static_cast<int>(pairs.size()));
    for (size_t i = 0; i < pairs.size(); ++i) {
        const auto& prev = panel.records[static_cast<size_t>(pairs[i].first)];
        const auto& next = panel.records[static_cast<size_t>(pairs[i].second)];
        for (size_t c = 0; c < cols.size(); ++c)
            table.X(static_cast<int>(i), static_cast<int>(c)) = prev.features[cols[c]];
        const int s_next = assignments.segment_by_record[static_cast<size_t>(pairs[i].second)];
        table.X(static_cast<int>(i), table.n_base_features + s_next - 1) = 1.0;
        if (with_lagged_cv) table.X(static_cast<int>(i), width - 1) = prev.cv;
        table.targets[static_cast<int>(i)] = next.cv;
    }
    return table;
}

namespace {

// Importance pass on a strided subsample; returns the kept base-feature
// column indices in ascending order. The one-hot block never competes for
// the budget.
std::vector<int> select_by_importance(const TrainingTable& table, bool classification,
                                      int n_segments, int feature_budget,
                                      const PredictorFitParams& params) {
    const int n_base = table.n_base_features;
    if (feature_budget <= 0) throw ConfigError("feature budget must be positive");
    if (feature_budget >= n_base) {
        std::vector<int> all(static_cast<size_t>(n_base));
        for (int i = 0; i < n_base; ++i) all[static_cast<size_t>(i)] = i;
        return all;
    }

    const int n = static_cast<int>(table.X.rows());
    const int stride = std::max(1, n / std::max(1, params.importance_subsample));
    std::vector<int> rows;
    for (int i = 0; i < n; i += stride) rows.push_back(i);

    Eigen::MatrixXd Xs(static_cast<int>(rows.size()), table.X.cols());
    for (size_t i = 0; i < rows.size(); ++i)
        Xs.row(static_cast<int>(i)) = table.X.row(rows[i]);

    std::vector<double> gains;
    if (classification) {
        std::vector<int> ys;
        ys.reserve(rows.size());
        for (int r : rows) ys.push_back(table.labels[static_cast<size_t>(r)]);
        const auto probe =
            fit_gbdt_classifier(Xs, ys, n_segments, params.importance_rounds, params.shrinkage,
                                params.tree, table.feature_names, nullptr, params.threads);
        std::vector<double> all(table.feature_names.size(), 0.0);
        for (const auto& round : probe.rounds)
            for (const auto& tree : round) {
                const auto g = tree.gain_by_feature(static_cast<int>(all.size()));
                for (size_t f = 0; f < all.size(); ++f) all[f] += g[f];
            }
        gains = std::move(all);
    } else {
        Eigen::VectorXd ys(static_cast<int>(rows.size()));
        for (size_t i = 0; i < rows.size(); ++i)
            ys[static_cast<int>(i)] = table.targets[rows[i]];
        const auto probe = fit_gbdt_regressor(Xs, ys, params.importance_rounds, params.shrinkage,
                                              params.tree, table.feature_names);
        std::vector<double> all(table.feature_names.size(), 0.0);
        for (const auto& round : probe.rounds)
            for (const auto& tree : round) {
                const auto g = tree.gain_by_feature(static_cast<int>(all.size()));
                for (size_t f = 0; f < all.size(); ++f) all[f] += g[f];
            }
        gains = std::move(all);
    }

    std::vector<int> order(static_cast<size_t>(n_base));
    for (int i = 0; i < n_base; ++i) order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return gains[static_cast<size_t>(a)] > gains[static_cast<size_t>(b)];
    });
    order.resize(static_cast<size_t>(feature_budget));
    std::sort(order.begin(), order.end());
    return order;
}

// Column-reduced copy of a training table keeping `kept` base features plus
// every trailing block column.
TrainingTable reduce_table(const TrainingTable& table, const std::vector<int>& kept) {
    TrainingTable out;
    out.labels = table.labels;
    out.targets = table.targets;
    out.record_pairs = table.record_pairs;
    out.n_base_features = static_cast<int>(kept.size());
    const int tail = static_cast<int>(table.X.cols()) - table.n_base_features;
    out.X.resize(table.X.rows(), out.n_base_features + tail);
    for (size_t i = 0; i < kept.size(); ++i) {
        out.feature_names.push_back(table.feature_names[static_cast<size_t>(kept[i])]);
        out.X.col(static_cast<int>(i)) = table.X.col(kept[i]);
    }
    for (int t = 0; t < tail; ++t) {
        out.feature_names.push_back(
            table.feature_names[static_cast<size_t>(table.n_base_features + t)]);
        out.X.col(out.n_base_features + t) = table.X.col(table.n_base_features + t);
    }
    return out;
}

} // namespace

TransitionModel fit_transition(const TrainingTable& table, ModelVariant variant,
                               int n_segments, int feature_budget,
                               const PredictorFitParams& params, BoostFitTrace* trace) {
    const TrainingTable* training = &table;
    TrainingTable reduced;
    if (variant == ModelVariant::full) {
        const auto kept = select_by_importance(table, true, n_segments, feature_budget, params);
        if (static_cast<int>(kept.size()) < table.n_base_features) {
            reduced = reduce_table(table, kept);
            training = &reduced;
        }
    }
    TransitionModel model;
    model.variant = variant;
    model.n_segments = n_segments;
    model.base_features.assign(
        training->feature_names.begin(),
        training->feature_names.begin() + training->n_base_features);
    model.classifier =
        fit_gbdt_classifier(training->X, training->labels, n_segments, params.rounds,
                            params.shrinkage, params.tree, training->feature_names, trace,
                            params.threads);
    return model;
}

ValueAssignerModel fit_value_assigner(const TrainingTable& table, ModelVariant variant,
                                      int n_segments, const PredictorFitParams& params,
                                      BoostFitTrace* trace) {
    ValueAssignerModel model;
    model.variant = variant;
    model.n_segments = n_segments;
    model.base_features.assign(table.feature_names.begin(),
                               table.feature_names.begin() + table.n_base_features);
    model.uses_lagged_cv = !table.feature_names.empty() &&
                           table.feature_names.back() == "cv_lag1";
    model.regressor = fit_gbdt_regressor(table.X, table.targets, params.rounds,
                                         params.shrinkage, params.tree, table.feature_names,
                                         trace);
    return model;
}

Eigen::VectorXd TransitionModel::predict(int s_prev, const Eigen::VectorXd& x_base) const {
    if (s_prev < 1 || s_prev > n_segments)
        throw ConfigError("previous segment out of range: " + std::to_string(s_prev));
    if (x_base.size() != static_cast<int>(base_features.size()))
        throw SchemaError("transition input does not match the model's base features");
    Eigen::VectorXd x(x_base.size() + n_segments);
    x.head(x_base.size()) = x_base;
    x.tail(n_segments).setZero();
    x[x_base.size() + s_prev - 1] = 1.0;
    return classifier.predict_proba(x);
}

double ValueAssignerModel::predict(int candidate_segment, const Eigen::VectorXd& x_base,
                                   double lagged_cv) const {
    if (candidate_segment < 1 || candidate_segment > n_segments)
        throw ConfigError("candidate segment out of range: " + std::to_string(candidate_segment));
    if (x_base.size() != static_cast<int>(base_features.size()))
        throw SchemaError("value input does not match the model's base features");
    const int width = static_cast<int>(x_base.size()) + n_segments + (uses_lagged_cv ? 1 : 0);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(width);
    x.head(x_base.size()) = x_base;
    x[x_base.size() + candidate_segment - 1] = 1.0;
    if (uses_lagged_cv) x[width - 1] = lagged_cv;
    return regressor.predict(x);
}

MarkovBaseline fit_markov_baseline(const std::vector<std::pair<int, int>>& transitions,
                                   const std::vector<std::pair<int, double>>& segment_values,
                                   int n_segments) {
    if (n_segments < 1) throw ConfigError("n_segments must be >= 1");
    if (transitions.empty()) throw DataError("no observed transitions");

    MarkovBaseline baseline;
    baseline.transition.setZero(n_segments, n_segments);
    baseline.mean_value.setZero(n_segments);

    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n_segments, n_segments);
    for (const auto& [from, to] : transitions) {
        if (from < 1 || from > n_segments || to < 1 || to > n_segments)
            throw DataError("transition segment out of range");
        counts(from - 1, to - 1) += 1.0;
    }
    for (int s = 0; s < n_segments; ++s) {
        const double total = counts.row(s).sum();
        if (total > 0.0) {
            baseline.transition.row(s) = counts.row(s) / total;
        } else {
            baseline.transition.row(s).setConstant(1.0 / n_segments);
        }
    }

    Eigen::VectorXd value_sum = Eigen::VectorXd::Zero(n_segments);
    Eigen::VectorXd value_cnt = Eigen::VectorXd::Zero(n_segments);
    for (const auto& [segment, cv] : segment_values) {
        if (segment < 1 || segment > n_segments)
            throw DataError("value segment out of range");
        value_sum[segment - 1] += cv;
        value_cnt[segment - 1] += 1.0;
    }
    for (int s = 0; s < n_segments; ++s)
        baseline.mean_value[s] = value_cnt[s] > 0.0 ? value_sum[s] / value_cnt[s] : 0.0;
    baseline.mean_value[n_segments - 1] = 0.0;  // churn
    return baseline;
}

MarkovBaseline fit_markov_baseline(const PanelDataset& panel,
                                   const SegmentAssignments& assignments, int n_segments) {
    std::vector<std::pair<int, int>> transitions;
    for (const auto& [a, b] : consecutive_pairs(panel))
        transitions.emplace_back(assignments.segment_by_record[static_cast<size_t>(a)],
                                 assignments.segment_by_record[static_cast<size_t>(b)]);
    std::vector<std::pair<int, double>> segment_values;
    segment_values.reserve(panel.records.size());
    for (size_t i = 0; i < panel.records.size(); ++i)
        segment_values.emplace_back(assignments.segment_by_record[i], panel.records[i].cv);
    return fit_markov_baseline(transitions, segment_values, n_segments);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> baseline_predict(const MarkovBaseline& baseline,
                                                             int s_prev) {
    const int n = static_cast<int>(baseline.transition.rows());
    if (s_prev < 1 || s_prev > n) throw ConfigError("segment out of range");
    return {baseline.transition.row(s_prev - 1).transpose(), baseline.mean_value};
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto n_rows = static_cast<int>(j.size());
    if (n_rows == 0) return {};
    const auto n_cols = static_cast<int>(j.at(0).size());
    Eigen::MatrixXd m(n_rows, n_cols);
    for (int r = 0; r < n_rows; ++r)
        for (int c = 0; c < n_cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
    return m;
}

void check_keys(const nlohmann::json& j, const std::vector<std::string>& keys,
                const char* what) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw VersionError(std::string("unexpected field in ") + what + ": " + key);
    }
}

} // namespace

nlohmann::json TransitionModel::to_json() const {
    return {{"base_features", base_features},
            {"classifier", classifier.to_json()},
            {"n_segments", n_segments},
            {"variant", model_variant_name(variant)}};
}

TransitionModel TransitionModel::from_json(const nlohmann::json& j) {
    check_keys(j, {"base_features", "classifier", "n_segments", "variant"},
               "transition model");
    TransitionModel model;
    model.variant = model_variant_from_name(j.at("variant").get<std::string>());
    model.n_segments = j.at("n_segments").get<int>();
    model.base_features = j.at("base_features").get<std::vector<std::string>>();
    model.classifier = GradientBoostedEnsemble::from_json(j.at("classifier"));
    return model;
}

nlohmann::json ValueAssignerModel::to_json() const {
    return {{"base_features", base_features},
            {"n_segments", n_segments},
            {"regressor", regressor.to_json()},
            {"uses_lagged_cv", uses_lagged_cv},
            {"variant", model_variant_name(variant)}};
}

ValueAssignerModel ValueAssignerModel::from_json(const nlohmann::json& j) {
    check_keys(j, {"base_features", "n_segments", "regressor", "uses_lagged_cv", "variant"},
               "value assigner");
    ValueAssignerModel model;
    model.variant = model_variant_from_name(j.at("variant").get<std::string>());
    model.n_segments = j.at("n_segments").get<int>();
    model.base_features = j.at("base_features").get<std::vector<std::string>>();
    model.uses_lagged_cv = j.at("uses_lagged_cv").get<bool>();
    model.regressor = GradientBoostedEnsemble::from_json(j.at("regressor"));
    return model;
}

nlohmann::json MarkovBaseline::to_json() const {
    nlohmann::json values = nlohmann::json::array();
    for (int s = 0; s < mean_value.size(); ++s) values.push_back(mean_value[s]);
    return {{"mean_value", values}, {"transition", matrix_to_json(transition)}};
}

MarkovBaseline MarkovBaseline::from_json(const nlohmann::json& j) {
    check_keys(j, {"mean_value", "transition"}, "baseline");
    MarkovBaseline baseline;
    baseline.transition = matrix_from_json(j.at("transition"));
    const auto values = j.at("mean_value").get<std::vector<double>>();
    baseline.mean_value.resize(static_cast<int>(values.size()));
    for (size_t s = 0; s < values.size(); ++s)
        baseline.mean_value[static_cast<int>(s)] = values[s];
    return baseline;
}

} // namespace clv
