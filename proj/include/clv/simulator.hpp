#pragma once
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "clv/feature_space.hpp"

namespace clv {

/// Deterministic per-period feature advancement (age +1, tenures +12, statics
/// held). Features without a rule cannot enter the simple-model space.
struct ProgressionRules {
    struct Action {
        enum class Kind { add_per_period, hold };
        Kind kind = Kind::hold;
        double amount = 0.0;
    };

    std::map<std::string, Action> actions;

    /// add 1 for yearly, add 12 for monthly, hold for static features.
    static ProgressionRules defaults_for(const FeatureSchema& schema);

    nlohmann::json to_json() const;
    static ProgressionRules from_json(const nlohmann::json& j);
};

/// One step of progression over a named feature space. Every name needs a
/// rule (ConfigError otherwise); missing values stay missing.
Eigen::VectorXd progress_features(const std::vector<std::string>& names,
                                  const Eigen::VectorXd& x, const ProgressionRules& rules);

/// Model providers for the simulator; the learned models and the frequency
/// baseline plug into the identical recursion. First-period callables see the
/// full feature vector (and starting cv for the lagged-value feature); later
/// periods see the progressed simple vector.
struct SimulationModels {
    int n_segments = 0;
    std::vector<std::string> simple_space;  // names of the later-period vector
    std::vector<int> simple_from_full;      // column of each simple feature in x_full

    std::function<Eigen::VectorXd(int s_prev, const Eigen::VectorXd& x_full)> first_transition;
    std::function<double(int s, const Eigen::VectorXd& x_full, double cv0)> first_value;
    std::function<Eigen::VectorXd(int s_prev, const Eigen::VectorXd& x_simple)> later_transition;
    std::function<double(int s, const Eigen::VectorXd& x_simple)> later_value;
};

/// Starting state of one simulated customer.
struct CustomerStart {
    int segment = 1;
    Eigen::VectorXd features;  // full-space vector
    double cv = 0.0;
};

struct SimulationResult {
    std::vector<Eigen::VectorXd> per_year_distributions;  // index t-1, over 1..S
    std::vector<double> per_year_cv;
    double clv = 0.0;
    int horizon = 0;
    double discount = 0.0;
};

/// Expectation recursion: year 1 from the full models, later years by
/// propagating the distribution through the simple transition rows under the
/// deterministically progressed features, values weighted by the per-year
/// marginals, all discounted into clv.
SimulationResult simulate_customer(const CustomerStart& start, int horizon, double discount,
                                   const SimulationModels& models,
                                   const ProgressionRules& rules);

/// Exact expectation by enumerating all S^T segment paths (guarded at 1e6
/// paths); agrees with simulate_customer up to floating-point reordering.
SimulationResult enumerate_oracle(const CustomerStart& start, int horizon, double discount,
                                  const SimulationModels& models,
                                  const ProgressionRules& rules);

/// Wraps a provider so the churn state is absorbing with value 0.
SimulationModels make_absorbing(SimulationModels models);

} // namespace clv
