#pragma once
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "clv/bundle.hpp"
#include "clv/metrics.hpp"
#include "clv/synthgen.hpp"

namespace clv {

/// Knobs for one training/evaluation run. Paths stay at the CLI layer; this
/// struct round-trips through the run-config JSON and hashes canonically for
/// the manifest.
struct RunConfig {
    uint64_t seed = 42;
    int segments = 50;
    int horizon = 5;
    double discount = 0.0;
    int threads = 1;
    int base_year = -1;  // -1: first panel year

    int full_transition_budget = 50;
    int simple_transition_budget = 30;
    int simple_value_budget = 25;
    std::vector<std::string> simple_transition_features;  // empty: derived from kinds
    std::vector<std::string> simple_value_features;
    std::vector<std::string> segmentation_excluded = {"age_years"};

    TreeFitParams segmentation_tree{/*max_leaves=*/49, /*min_samples_leaf=*/20,
                                    /*min_gain=*/0.0, /*max_bins=*/64};
    TreeFitParams ensemble_tree{/*max_leaves=*/31, /*min_samples_leaf=*/20,
                                /*min_gain=*/0.0, /*max_bins=*/64};
    int transition_rounds = 100;
    int value_rounds = 100;
    double shrinkage = 0.1;

    bool churn_absorbing = false;       // force the churn state absorbing in simulation
    bool accuracy4_exclude_churn = false;

    ForcedSplitSpec forced;  // empty: the shipped default ladder
    GeneratorConfig generator;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    std::string hash() const;
};

/// Segmentation, the four predictor models and the frequency baseline, fitted
/// in dependency order on `panel`.
ModelBundle train_bundle(const PanelDataset& panel, const RunConfig& config);

/// Learned or baseline providers over a trained bundle. The bundle must
/// outlive the returned callables.
SimulationModels make_learned_models(const ModelBundle& bundle);
SimulationModels make_baseline_models(const ModelBundle& bundle);

struct SimulatedCustomer {
    std::string customer_id;
    SimulationResult result;
};

/// Simulates every customer active (present, not churned) at `from_year`.
/// Parallel across customers with per-customer deterministic results.
std::vector<SimulatedCustomer> simulate_panel(const ModelBundle& bundle,
                                              const PanelDataset& panel, int from_year,
                                              int horizon, double discount, bool use_baseline,
                                              bool churn_absorbing, int threads);

void write_simulation_csv(const std::string& path,
                          const std::vector<SimulatedCustomer>& results);
void write_distributions_json(const std::string& path,
                              const std::vector<SimulatedCustomer>& results);

struct EvaluationOutput {
    std::vector<MetricsReport> learned;   // one report per horizon
    std::vector<MetricsReport> baseline;
    std::vector<LiftPoint> lift;          // investment-uptake propensity
    std::optional<DecileMatrix> decile;   // observed cv deciles, year t0 -> t0+1
};

/// One-year-ahead (and longer, data permitting) comparison of the learned
/// models against the frequency baseline on the customers active at
/// `from_year`, plus propensity lift and the observed decile matrix.
EvaluationOutput evaluate_panel(const ModelBundle& bundle, const PanelDataset& panel,
                                int from_year, int max_horizon,
                                const std::vector<double>& x_grid, const RunConfig& config);

void write_metrics_json(const std::string& path, const EvaluationOutput& output);
void write_lift_csv(const std::string& path, const std::vector<LiftPoint>& curve);
void write_decile_csv(const std::string& path, const DecileMatrix& matrix);

struct PropensityRow {
    std::string customer_id;
    int segment = 0;
    double propensity = 0.0;
};

/// Customers outside the target subtrees at `from_year`, ranked by predicted
/// transition mass into them.
std::vector<PropensityRow> propensity_table(const ModelBundle& bundle,
                                            const PanelDataset& panel, int from_year,
                                            const std::vector<std::string>& target_subtrees);

void write_propensity_csv(const std::string& path, const std::vector<PropensityRow>& rows);

/// Per-run provenance record (command, seed, config hash, artifact list);
/// identical runs produce identical manifests.
void write_manifest(const std::string& path, const std::string& command,
                    const std::string& config_hash, uint64_t seed,
                    const std::vector<std::string>& artifacts);

} // namespace clv
