#include "clv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "clv/parallel.hpp"
#include "clv/rng.hpp"
#include "clv/text.hpp"

namespace clv {

namespace {

nlohmann::json tree_params_to_json(const TreeFitParams& p) {
    return {{"max_bins", p.max_bins},
            {"max_leaves", p.max_leaves},
            {"min_gain", p.min_gain},
            {"min_samples_leaf", p.min_samples_leaf}};
}

TreeFitParams tree_params_from_json(const nlohmann::json& j, TreeFitParams base) {
    for (const auto& [key, value] : j.items()) {
        if (key == "max_bins") base.max_bins = value.get<int>();
        else if (key == "max_leaves") base.max_leaves = value.get<int>();
        else if (key == "min_gain") base.min_gain = value.get<double>();
        else if (key == "min_samples_leaf") base.min_samples_leaf = value.get<int>();
        else throw ConfigError("unknown tree-params key: " + key);
    }
    return base;
}

} // namespace

nlohmann::json RunConfig::to_json() const {
    return {{"accuracy4_exclude_churn", accuracy4_exclude_churn},
            {"base_year", base_year},
            {"churn_absorbing", churn_absorbing},
            {"discount", discount},
            {"ensemble_tree", tree_params_to_json(ensemble_tree)},
            {"forced_splits", forced.to_json()},
            {"full_transition_budget", full_transition_budget},
            {"generator", generator.to_json()},
            {"horizon", horizon},
            {"seed", seed},
            {"segmentation_excluded", segmentation_excluded},
            {"segmentation_tree", tree_params_to_json(segmentation_tree)},
            {"segments", segments},
            {"shrinkage", shrinkage},
            {"simple_transition_budget", simple_transition_budget},
            {"simple_transition_features", simple_transition_features},
            {"simple_value_budget", simple_value_budget},
            {"simple_value_features", simple_value_features},
            {"threads", threads},
            {"transition_rounds", transition_rounds},
            {"value_rounds", value_rounds}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "accuracy4_exclude_churn") cfg.accuracy4_exclude_churn = value.get<bool>();
        else if (key == "base_year") cfg.base_year = value.get<int>();
        else if (key == "churn_absorbing") cfg.churn_absorbing = value.get<bool>();
        else if (key == "discount") cfg.discount = value.get<double>();
        else if (key == "ensemble_tree")
            cfg.ensemble_tree = tree_params_from_json(value, cfg.ensemble_tree);
        else if (key == "forced_splits") cfg.forced = ForcedSplitSpec::from_json(value);
        else if (key == "full_transition_budget") cfg.full_transition_budget = value.get<int>();
        else if (key == "generator") cfg.generator = GeneratorConfig::from_json(value);
        else if (key == "horizon") cfg.horizon = value.get<int>();
        else if (key == "seed") cfg.seed = value.get<uint64_t>();
        else if (key == "segmentation_excluded")
            cfg.segmentation_excluded = value.get<std::vector<std::string>>();
        else if (key == "segmentation_tree")
            cfg.segmentation_tree = tree_params_from_json(value, cfg.segmentation_tree);
        else if (key == "segments") cfg.segments = value.get<int>();
        else if (key == "shrinkage") cfg.shrinkage = value.get<double>();
        else if (key == "simple_transition_budget")
            cfg.simple_transition_budget = value.get<int>();
        else if (key == "simple_transition_features")
            cfg.simple_transition_features = value.get<std::vector<std::string>>();
        else if (key == "simple_value_budget") cfg.simple_value_budget = value.get<int>();
        else if (key == "simple_value_features")
            cfg.simple_value_features = value.get<std::vector<std::string>>();
        else if (key == "threads") cfg.threads = value.get<int>();
        else if (key == "transition_rounds") cfg.transition_rounds = value.get<int>();
        else if (key == "value_rounds") cfg.value_rounds = value.get<int>();
        else throw ConfigError("unknown run-config key: " + key);
    }
    return cfg;
}

std::string RunConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

ModelBundle train_bundle(const PanelDataset& panel, const RunConfig& config) {
    panel.validate();
    if (panel.records.empty()) throw DataError("cannot train on an empty panel");
    if (config.segments < 2) throw ConfigError("segments must be >= 2");
    if (config.threads < 1) throw ConfigError("threads must be >= 1");

    const int base_year = config.base_year < 0 ? panel.year_min() : config.base_year;
    const ForcedSplitSpec forced =
        config.forced.empty() ? default_forced_splits() : config.forced;

    ModelBundle bundle;
    bundle.schema = panel.schema;
    bundle.segmentation = fit_segmentation(panel, base_year, forced, config.segments,
                                           config.segmentation_tree,
                                           config.segmentation_excluded);
    const SegmentAssignments assignments = assign_segments(bundle.segmentation, panel);

    const auto clamp_list = [](std::vector<std::string> names, int budget) {
        if (budget > 0 && static_cast<int>(names.size()) > budget)
            names.resize(static_cast<size_t>(budget));
        return names;
    };
    const auto all_names = panel.schema.names();
    const auto simple_transition_features =
        config.simple_transition_features.empty()
            ? clamp_list(panel.schema.progressible_names(), config.simple_transition_budget)
            : config.simple_transition_features;
    const auto simple_value_features =
        config.simple_value_features.empty()
            ? clamp_list(panel.schema.progressible_names(), config.simple_value_budget)
            : config.simple_value_features;

    PredictorFitParams transition_params;
    transition_params.rounds = config.transition_rounds;
    transition_params.shrinkage = config.shrinkage;
    transition_params.tree = config.ensemble_tree;
    transition_params.threads = config.threads;

    {
        const auto table =
            build_transition_training(panel, assignments, config.segments, all_names);
        bundle.transition_full = fit_transition(table, ModelVariant::full, config.segments,
                                                config.full_transition_budget,
                                                transition_params);
    }
    {
        const auto table = build_transition_training(panel, assignments, config.segments,
                                                     simple_transition_features);
        bundle.transition_simple = fit_transition(table, ModelVariant::simple, config.segments,
                                                  config.simple_transition_budget,
                                                  transition_params);
    }

    PredictorFitParams value_params = transition_params;
    value_params.rounds = config.value_rounds;
    {
        const auto table = build_value_training(panel, assignments, config.segments, all_names,
                                                /*with_lagged_cv=*/true);
        bundle.value_full =
            fit_value_assigner(table, ModelVariant::full, config.segments, value_params);
    }
    {
        const auto table = build_value_training(panel, assignments, config.segments,
                                                simple_value_features,
                                                /*with_lagged_cv=*/false);
        bundle.value_simple =
            fit_value_assigner(table, ModelVariant::simple, config.segments, value_params);
    }

    bundle.baseline = fit_markov_baseline(panel, assignments, config.segments);
    bundle.progression = ProgressionRules::defaults_for(panel.schema);
    bundle.seed = config.seed;
    bundle.config_hash = config.hash();
    bundle.year_min = panel.year_min();
    bundle.year_max = panel.year_max();
    bundle.base_year = base_year;
    return bundle;
}

namespace {

Eigen::VectorXd extract_columns(const Eigen::VectorXd& x, const std::vector<int>& idx) {
    Eigen::VectorXd out(static_cast<int>(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i) out[static_cast<int>(i)] = x[idx[i]];
    return out;
}

bool contains(const std::vector<std::string>& names, const std::string& name) {
    return std::find(names.begin(), names.end(), name) != names.end();
}

} // namespace

SimulationModels make_learned_models(const ModelBundle& bundle) {
    SimulationModels models;
    models.n_segments = bundle.n_segments();

    const auto full_space = bundle.schema.names();
    for (const auto& name : full_space)
        if (contains(bundle.transition_simple.base_features, name) ||
            contains(bundle.value_simple.base_features, name))
            models.simple_space.push_back(name);
    models.simple_from_full = column_indices(full_space, models.simple_space);

    const auto tf_idx = column_indices(full_space, bundle.transition_full.base_features);
    const auto vf_idx = column_indices(full_space, bundle.value_full.base_features);
    const auto ts_idx = column_indices(models.simple_space,
                                       bundle.transition_simple.base_features);
    const auto vs_idx = column_indices(models.simple_space, bundle.value_simple.base_features);

    models.first_transition = [&bundle, tf_idx](int s_prev, const Eigen::VectorXd& x) {
        return bundle.transition_full.predict(s_prev, extract_columns(x, tf_idx));
    };
    models.first_value = [&bundle, vf_idx](int s, const Eigen::VectorXd& x, double cv0) {
        return bundle.value_full.predict(s, extract_columns(x, vf_idx), cv0);
    };
    models.later_transition = [&bundle, ts_idx](int s_prev, const Eigen::VectorXd& x) {
        return bundle.transition_simple.predict(s_prev, extract_columns(x, ts_idx));
    };
    models.later_value = [&bundle, vs_idx](int s, const Eigen::VectorXd& x) {
        return bundle.value_simple.predict(s, extract_columns(x, vs_idx));
    };
    return models;
}

SimulationModels make_baseline_models(const ModelBundle& bundle) {
    SimulationModels models;
    models.n_segments = bundle.n_segments();

    const auto full_space = bundle.schema.names();
    for (const auto& name : full_space)
        if (contains(bundle.transition_simple.base_features, name) ||
            contains(bundle.value_simple.base_features, name))
            models.simple_space.push_back(name);
    models.simple_from_full = column_indices(full_space, models.simple_space);

    const auto row = [&bundle](int s_prev, const Eigen::VectorXd&) {
        return Eigen::VectorXd(bundle.baseline.transition.row(s_prev - 1).transpose());
    };
    models.first_transition = row;
    models.later_transition = row;
    models.first_value = [&bundle](int s, const Eigen::VectorXd&, double) {
        return bundle.baseline.mean_value[s - 1];
    };
    models.later_value = [&bundle](int s, const Eigen::VectorXd&) {
        return bundle.baseline.mean_value[s - 1];
    };
    return models;
}

std::vector<SimulatedCustomer> simulate_panel(const ModelBundle& bundle,
                                              const PanelDataset& panel, int from_year,
                                              int horizon, double discount, bool use_baseline,
                                              bool churn_absorbing, int threads) {
    const SegmentAssignments assignments = assign_segments(bundle.segmentation, panel);
    SimulationModels models =
        use_baseline ? make_baseline_models(bundle) : make_learned_models(bundle);
    if (churn_absorbing) models = make_absorbing(std::move(models));

    std::vector<int> rows;
    for (size_t i = 0; i < panel.records.size(); ++i)
        if (panel.records[i].year_index == from_year && !panel.records[i].churned)
            rows.push_back(static_cast<int>(i));
    if (rows.empty())
        throw DataError("no active customers at year " + std::to_string(from_year));

    std::vector<SimulatedCustomer> out(rows.size());
    const ProgressionRules& rules = bundle.progression;
    parallel_for(static_cast<int>(rows.size()), threads, [&](int i) {
        const auto& rec = panel.records[static_cast<size_t>(rows[static_cast<size_t>(i)])];
        CustomerStart start;
        start.segment = assignments.segment_by_record[static_cast<size_t>(rows[static_cast<size_t>(i)])];
        start.features = rec.features;
        start.cv = rec.cv;
        out[static_cast<size_t>(i)].customer_id = rec.customer_id;
        out[static_cast<size_t>(i)].result =
            simulate_customer(start, horizon, discount, models, rules);
    });
    return out;
}

void write_simulation_csv(const std::string& path,
                          const std::vector<SimulatedCustomer>& results) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    const int horizon = results.empty() ? 0 : results.front().result.horizon;
    out << "customer_id";
    for (int t = 1; t <= horizon; ++t) out << ",cv_" << t;
    out << ",clv\n";
    for (const auto& r : results) {
        out << r.customer_id;
        for (double cv : r.result.per_year_cv) out << ',' << format_double(cv);
        out << ',' << format_double(r.result.clv) << "\n";
    }
}

void write_distributions_json(const std::string& path,
                              const std::vector<SimulatedCustomer>& results) {
    nlohmann::json j;
    for (const auto& r : results) {
        nlohmann::json years = nlohmann::json::array();
        for (const auto& dist : r.result.per_year_distributions) {
            nlohmann::json row = nlohmann::json::array();
            for (int s = 0; s < dist.size(); ++s) row.push_back(dist[s]);
            years.push_back(std::move(row));
        }
        j[r.customer_id] = std::move(years);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << j.dump() << "\n";
}

namespace {

struct EvalSample {
    int record_row = -1;   // row at from_year
    int churn_year = -1;   // -1: never observed churning
};

MetricsReport build_report(const std::string& label,
                           const std::vector<double>& predicted,
                           const std::vector<double>& actual,
                           const std::vector<Eigen::VectorXd>& distributions,
                           const std::vector<int>& actual_segments,
                           const SegmentationModel& segmentation,
                           const std::vector<double>& x_grid, bool exclude_churn_in_4class) {
    MetricsReport report;
    report.period_label = label;
    report.n_customers = static_cast<int>(predicted.size());
    report.medae = medae(predicted, actual);
    for (double x : x_grid) {
        report.separation[static_cast<int>(x)] = separation(predicted, actual, x);
        report.top_x_precision[static_cast<int>(x)] = top_x_precision(predicted, actual, x);
    }
    report.accuracy_50 = transition_accuracy(distributions, actual_segments);
    if (exclude_churn_in_4class) {
        std::vector<Eigen::VectorXd> kept_dists;
        std::vector<int> kept_actual;
        for (size_t i = 0; i < actual_segments.size(); ++i) {
            if (actual_segments[i] == segmentation.churn_segment()) continue;
            kept_dists.push_back(distributions[i]);
            kept_actual.push_back(actual_segments[i]);
        }
        report.accuracy_4 = kept_actual.empty()
                                ? 0.0
                                : transition_accuracy(kept_dists, kept_actual,
                                                      four_class_mapping(segmentation));
    } else {
        report.accuracy_4 = transition_accuracy(distributions, actual_segments,
                                                four_class_mapping(segmentation));
    }
    return report;
}

} // namespace

EvaluationOutput evaluate_panel(const ModelBundle& bundle, const PanelDataset& panel,
                                int from_year, int max_horizon,
                                const std::vector<double>& x_grid, const RunConfig& config) {
    const SegmentAssignments assignments = assign_segments(bundle.segmentation, panel);
    const PanelIndex index(panel);

    const int usable_horizon = std::min(max_horizon, panel.year_max() - from_year);
    if (usable_horizon < 1)
        throw DataError("no truth years after year " + std::to_string(from_year));

    std::vector<EvalSample> samples;
    for (size_t i = 0; i < panel.records.size(); ++i) {
        const auto& rec = panel.records[i];
        if (rec.year_index != from_year || rec.churned) continue;
        EvalSample sample;
        sample.record_row = static_cast<int>(i);
        for (int row : index.rows_of(rec.customer_id))
            if (panel.records[static_cast<size_t>(row)].churned)
                sample.churn_year = panel.records[static_cast<size_t>(row)].year_index;
        samples.push_back(sample);
    }
    if (samples.empty())
        throw DataError("no active customers at year " + std::to_string(from_year));

    const auto learned_sims = simulate_panel(bundle, panel, from_year, usable_horizon,
                                             config.discount, /*use_baseline=*/false,
                                             config.churn_absorbing, config.threads);
    const auto baseline_sims = simulate_panel(bundle, panel, from_year, usable_horizon,
                                              config.discount, /*use_baseline=*/true,
                                              config.churn_absorbing, config.threads);

    EvaluationOutput output;
    for (int h = 1; h <= usable_horizon; ++h) {
        std::vector<double> learned_cv, baseline_cv, actual_cv;
        std::vector<Eigen::VectorXd> learned_dist, baseline_dist;
        std::vector<int> actual_segments;
        for (size_t i = 0; i < samples.size(); ++i) {
            const auto& rec = panel.records[static_cast<size_t>(samples[i].record_row)];
            const int target_year = from_year + h;
            const int truth_row = index.row_of(rec.customer_id, target_year);
            double cv;
            int segment;
            if (truth_row >= 0) {
                cv = panel.records[static_cast<size_t>(truth_row)].cv;
                segment = assignments.segment_by_record[static_cast<size_t>(truth_row)];
            } else if (samples[i].churn_year >= 0 && samples[i].churn_year <= target_year) {
                cv = 0.0;
                segment = bundle.segmentation.churn_segment();
            } else {
                continue;  // panel ends before the target year
            }
            learned_cv.push_back(learned_sims[i].result.per_year_cv[static_cast<size_t>(h - 1)]);
            baseline_cv.push_back(
                baseline_sims[i].result.per_year_cv[static_cast<size_t>(h - 1)]);
            learned_dist.push_back(
                learned_sims[i].result.per_year_distributions[static_cast<size_t>(h - 1)]);
            baseline_dist.push_back(
                baseline_sims[i].result.per_year_distributions[static_cast<size_t>(h - 1)]);
            actual_cv.push_back(cv);
            actual_segments.push_back(segment);
        }
        if (actual_cv.empty()) continue;
        char label[64];
        std::snprintf(label, sizeof(label), "%d-year (y%d->y%d)", h, from_year, from_year + h);
        output.learned.push_back(build_report(label, learned_cv, actual_cv, learned_dist,
                                              actual_segments, bundle.segmentation, x_grid,
                                              config.accuracy4_exclude_churn));
        output.baseline.push_back(build_report(label, baseline_cv, actual_cv, baseline_dist,
                                               actual_segments, bundle.segmentation, x_grid,
                                               config.accuracy4_exclude_churn));
    }

    // investment-uptake lift from the derived propensity
    const int held_idx = bundle.schema.index_of("investment_held");
    if (held_idx >= 0) {
        std::vector<double> propensities;
        std::vector<bool> uptake;
        const std::vector<std::string> targets = {"S01", "S11"};
        const auto tf_idx =
            column_indices(bundle.schema.names(), bundle.transition_full.base_features);
        for (const auto& sample : samples) {
            const auto& rec = panel.records[static_cast<size_t>(sample.record_row)];
            const int s_prev = assignments.segment_by_record[static_cast<size_t>(sample.record_row)];
            const FourClass bucket = bundle.segmentation.four_class_of(s_prev);
            if (bucket != FourClass::s00 && bucket != FourClass::s10) continue;
            propensities.push_back(propensity(bundle.transition_full, bundle.segmentation,
                                              s_prev, extract_columns(rec.features, tf_idx),
                                              targets));
            const int next_row = index.row_of(rec.customer_id, from_year + 1);
            const bool took = next_row >= 0 &&
                              !panel.records[static_cast<size_t>(next_row)].churned &&
                              panel.records[static_cast<size_t>(next_row)].features[held_idx] == 1.0;
            uptake.push_back(took);
        }
        if (!propensities.empty()) {
            std::vector<double> grid = x_grid;
            grid.push_back(100.0);
            output.lift = lift_curve(propensities, uptake, grid);
        }
    }

    // observed decile movement between from_year and the next year
    {
        std::vector<double> cv_a, cv_b;
        for (const auto& sample : samples) {
            const auto& rec = panel.records[static_cast<size_t>(sample.record_row)];
            const int next_row = index.row_of(rec.customer_id, from_year + 1);
            if (next_row < 0) continue;
            cv_a.push_back(rec.cv);
            cv_b.push_back(panel.records[static_cast<size_t>(next_row)].cv);
        }
        if (static_cast<int>(cv_a.size()) >= 10)
            output.decile = decile_transition_matrix(cv_a, cv_b);
    }
    return output;
}

void write_metrics_json(const std::string& path, const EvaluationOutput& output) {
    nlohmann::json j;
    j["learned"] = nlohmann::json::array();
    for (const auto& report : output.learned) j["learned"].push_back(report.to_json());
    j["baseline"] = nlohmann::json::array();
    for (const auto& report : output.baseline) j["baseline"].push_back(report.to_json());
    nlohmann::json lift = nlohmann::json::array();
    for (const auto& point : output.lift) {
        nlohmann::json p = {{"x_percent", point.x_percent}};
        if (point.lift) p["lift_times"] = *point.lift;
        else p["lift_times"] = nullptr;
        lift.push_back(std::move(p));
    }
    j["lift"] = std::move(lift);
    if (output.decile) j["decile_moved_share"] = output.decile->moved_share;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

void write_lift_csv(const std::string& path, const std::vector<LiftPoint>& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "x_percent,lift_times\n";
    for (const auto& point : curve) {
        out << format_double(point.x_percent) << ',';
        if (point.lift) out << format_double(*point.lift);
        out << "\n";
    }
}

void write_decile_csv(const std::string& path, const DecileMatrix& matrix) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "from_decile";
    for (int c = 0; c < 10; ++c) out << ",to_" << c;
    out << "\n";
    for (int r = 0; r < 10; ++r) {
        out << r;
        for (int c = 0; c < 10; ++c) out << ',' << format_double(matrix.matrix(r, c));
        out << "\n";
    }
}

std::vector<PropensityRow> propensity_table(const ModelBundle& bundle,
                                            const PanelDataset& panel, int from_year,
                                            const std::vector<std::string>& target_subtrees) {
    const SegmentAssignments assignments = assign_segments(bundle.segmentation, panel);
    const auto tf_idx =
        column_indices(bundle.schema.names(), bundle.transition_full.base_features);

    std::vector<PropensityRow> rows;
    for (size_t i = 0; i < panel.records.size(); ++i) {
        const auto& rec = panel.records[i];
        if (rec.year_index != from_year || rec.churned) continue;
        const int s_prev = assignments.segment_by_record[i];
        PropensityRow row;
        row.customer_id = rec.customer_id;
        row.segment = s_prev;
        try {
            row.propensity = propensity(bundle.transition_full, bundle.segmentation, s_prev,
                                        extract_columns(rec.features, tf_idx), target_subtrees);
        } catch (const NotApplicable&) {
            continue;  // already holds the target products
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const PropensityRow& a, const PropensityRow& b) {
        return a.propensity > b.propensity;
    });
    return rows;
}

void write_propensity_csv(const std::string& path, const std::vector<PropensityRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "customer_id,segment,propensity\n";
    for (const auto& row : rows)
        out << row.customer_id << ',' << row.segment << ',' << format_double(row.propensity)
            << "\n";
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::string& config_hash, uint64_t seed,
                    const std::vector<std::string>& artifacts) {
    const nlohmann::json j = {{"artifacts", artifacts},
                              {"command", command},
                              {"config_hash", config_hash},
                              {"seed", seed}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

} // namespace clv
