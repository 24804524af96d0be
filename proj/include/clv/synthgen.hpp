#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include <nlohmann/json_fwd.hpp>

#include "clv/panel.hpp"

namespace clv {

/// Logistic coefficients for yearly product adoption, applied to the
/// standardized wealth proxy, engagement and age of the previous year.
struct AdoptionWeights {
    double intercept = -3.0;
    double wealth = 1.0;
    double engagement = 0.5;
    double age = 0.0;
};

struct GeneratorConfig {
    int n_customers = 1000;
    int n_years = 3;
    uint64_t seed = 1;
    double churn_base_rate = 0.05;
    double value_noise_scale = 0.05;
    std::map<std::string, AdoptionWeights> adoption_weights;  // keyed by product name

    GeneratorConfig();  // populates the default adoption weights
    static GeneratorConfig defaults() { return {}; }

    nlohmann::json to_json() const;
    static GeneratorConfig from_json(const nlohmann::json& j);
};

/// Schema of the synthetic panel: static region, yearly age/tenure, monthly
/// product tenures, dynamic income/engagement/holding flags/balances.
FeatureSchema synthetic_schema();

/// Seeded synthetic customer panel. A pure function of the config: product
/// adoption, attrition and churn are logistic draws on current features, so
/// next-year segments are predictable from features rather than from segment
/// frequencies alone.
PanelDataset generate_population(const GeneratorConfig& config);

/// Customer-level holdout split: all years of a customer land on one side;
/// |test customers| = round(fraction * n). Deterministic in (dataset, seed).
std::pair<PanelDataset, PanelDataset> split_holdout(const PanelDataset& dataset,
                                                    double fraction, uint64_t seed);

} // namespace clv
