#include "clv/simulator.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "clv/value.hpp"

namespace clv {

ProgressionRules ProgressionRules::defaults_for(const FeatureSchema& schema) {
    ProgressionRules rules;
    for (const auto& f : schema.features) {
        switch (f.kind) {
            case FeatureKind::static_:
                rules.actions[f.name] = {Action::Kind::hold, 0.0};
                break;
            case FeatureKind::yearly_progressing:
                rules.actions[f.name] = {Action::Kind::add_per_period, 1.0};
                break;
            case FeatureKind::monthly_progressing:
                rules.actions[f.name] = {Action::Kind::add_per_period, 12.0};
                break;
            case FeatureKind::dynamic:
                break;  // not forward-simulatable
        }
    }
    return rules;
}

nlohmann::json ProgressionRules::to_json() const {
    nlohmann::json j;
    for (const auto& [name, action] : actions) {
        if (action.kind == Action::Kind::hold) {
            j[name] = {{"action", "hold"}};
        } else {
            j[name] = {{"action", "add_per_period"}, {"amount", action.amount}};
        }
    }
    return j;
}

ProgressionRules ProgressionRules::from_json(const nlohmann::json& j) {
    ProgressionRules rules;
    for (const auto& [name, spec] : j.items()) {
        const auto action = spec.at("action").get<std::string>();
        if (action == "hold") {
            rules.actions[name] = {Action::Kind::hold, 0.0};
        } else if (action == "add_per_period") {
            rules.actions[name] = {Action::Kind::add_per_period,
                                   spec.at("amount").get<double>()};
        } else {
            throw ConfigError("unknown progression action: " + action);
        }
    }
    return rules;
}

Eigen::VectorXd progress_features(const std::vector<std::string>& names,
                                  const Eigen::VectorXd& x, const ProgressionRules& rules) {
    if (static_cast<int>(names.size()) != x.size())
        throw SchemaError("feature vector does not match its name space");
    Eigen::VectorXd out = x;
    for (size_t i = 0; i < names.size(); ++i) {
        auto it = rules.actions.find(names[i]);
        if (it == rules.actions.end())
            throw ConfigError("no progression rule for feature: " + names[i]);
        if (it->second.kind == ProgressionRules::Action::Kind::add_per_period)
            out[static_cast<int>(i)] += it->second.amount;
    }
    return out;
}

namespace {

void check_simulation_args(const CustomerStart& start, int horizon, double discount,
                           const SimulationModels& models) {
    if (horizon < 1) throw ConfigError("simulation horizon must be >= 1");
    if (!(discount > -1.0)) throw ConfigError("discount rate must be > -1");
    if (models.n_segments < 1) throw ConfigError("provider has no segments");
    if (start.segment < 1 || start.segment > models.n_segments)
        throw ConfigError("starting segment out of range");
}

Eigen::VectorXd initial_simple_vector(const CustomerStart& start,
                                      const SimulationModels& models,
                                      const ProgressionRules& rules) {
    Eigen::VectorXd x_simple(static_cast<int>(models.simple_from_full.size()));
    for (size_t i = 0; i < models.simple_from_full.size(); ++i)
        x_simple[static_cast<int>(i)] = start.features[models.simple_from_full[i]];
    return progress_features(models.simple_space, x_simple, rules);
}

} // namespace

SimulationResult simulate_customer(const CustomerStart& start, int horizon, double discount,
                                   const SimulationModels& models,
                                   const ProgressionRules& rules) {
    check_simulation_args(start, horizon, discount, models);
    const int S = models.n_segments;

    SimulationResult result;
    result.horizon = horizon;
    result.discount = discount;

    Eigen::VectorXd dist = models.first_transition(start.segment, start.features);
    double cv = 0.0;
    for (int s = 0; s < S; ++s)
        cv += dist[s] * models.first_value(s + 1, start.features, start.cv);
    result.per_year_distributions.push_back(dist);
    result.per_year_cv.push_back(cv);

    if (horizon > 1) {
        Eigen::VectorXd x_simple = initial_simple_vector(start, models, rules);
        for (int t = 2; t <= horizon; ++t) {
            Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
            for (int r = 0; r < S; ++r) {
                if (dist[r] == 0.0) continue;
                const Eigen::VectorXd row = models.later_transition(r + 1, x_simple);
                next += dist[r] * row;
            }
            double cv_t = 0.0;
            for (int s = 0; s < S; ++s)
                cv_t += next[s] * models.later_value(s + 1, x_simple);
            result.per_year_distributions.push_back(next);
            result.per_year_cv.push_back(cv_t);
            dist = std::move(next);
            if (t < horizon) x_simple = progress_features(models.simple_space, x_simple, rules);
        }
    }

    result.clv = discounted_clv(result.per_year_cv, discount);
    return result;
}

SimulationResult enumerate_oracle(const CustomerStart& start, int horizon, double discount,
                                  const SimulationModels& models,
                                  const ProgressionRules& rules) {
    check_simulation_args(start, horizon, discount, models);
    const int S = models.n_segments;
    double paths = 1.0;
    for (int t = 0; t < horizon; ++t) paths *= S;
    if (paths > 1e6) throw ConfigError("path enumeration guard exceeded (S^T > 1e6)");

    // step tables: probs[t][r][s] = p(s_{t+1}=s+1 | s_t=r+1, x_t), values[t][s]
    std::vector<std::vector<Eigen::VectorXd>> probs(static_cast<size_t>(horizon));
    std::vector<Eigen::VectorXd> values(static_cast<size_t>(horizon));

    probs[0].resize(1);
    probs[0][0] = models.first_transition(start.segment, start.features);
    values[0].resize(S);
    for (int s = 0; s < S; ++s)
        values[0][s] = models.first_value(s + 1, start.features, start.cv);

    Eigen::VectorXd x_simple;
    if (horizon > 1) x_simple = initial_simple_vector(start, models, rules);
    for (int t = 1; t < horizon; ++t) {
        probs[static_cast<size_t>(t)].resize(static_cast<size_t>(S));
        for (int r = 0; r < S; ++r)
            probs[static_cast<size_t>(t)][static_cast<size_t>(r)] =
                models.later_transition(r + 1, x_simple);
        values[static_cast<size_t>(t)].resize(S);
        for (int s = 0; s < S; ++s)
            values[static_cast<size_t>(t)][s] = models.later_value(s + 1, x_simple);
        if (t + 1 < horizon) x_simple = progress_features(models.simple_space, x_simple, rules);
    }

    SimulationResult result;
    result.horizon = horizon;
    result.discount = discount;
    result.per_year_distributions.assign(static_cast<size_t>(horizon),
                                         Eigen::VectorXd::Zero(S));
    result.per_year_cv.assign(static_cast<size_t>(horizon), 0.0);

    // odometer over segment paths (last year advances fastest)
    std::vector<int> path(static_cast<size_t>(horizon), 0);
    while (true) {
        double weight = probs[0][0][path[0]];
        for (int t = 1; t < horizon; ++t)
            weight *= probs[static_cast<size_t>(t)][static_cast<size_t>(path[static_cast<size_t>(t - 1)])]
                           [path[static_cast<size_t>(t)]];
        for (int t = 0; t < horizon; ++t) {
            result.per_year_distributions[static_cast<size_t>(t)][path[static_cast<size_t>(t)]] +=
                weight;
            result.per_year_cv[static_cast<size_t>(t)] +=
                weight * values[static_cast<size_t>(t)][path[static_cast<size_t>(t)]];
        }
        int t = horizon - 1;
        while (t >= 0 && path[static_cast<size_t>(t)] == S - 1) {
            path[static_cast<size_t>(t)] = 0;
            --t;
        }
        if (t < 0) break;
        ++path[static_cast<size_t>(t)];
    }

    result.clv = discounted_clv(result.per_year_cv, discount);
    return result;
}

SimulationModels make_absorbing(SimulationModels models) {
    const int S = models.n_segments;
    auto absorb_transition =
        [S](std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> inner) {
            return [S, inner = std::move(inner)](int s_prev, const Eigen::VectorXd& x) {
                if (s_prev == S) {
                    Eigen::VectorXd row = Eigen::VectorXd::Zero(S);
                    row[S - 1] = 1.0;
                    return row;
                }
                return inner(s_prev, x);
            };
        };
    models.first_transition = [S, inner = std::move(models.first_transition)](
                                  int s_prev, const Eigen::VectorXd& x) {
        if (s_prev == S) {
            Eigen::VectorXd row = Eigen::VectorXd::Zero(S);
            row[S - 1] = 1.0;
            return row;
        }
        return inner(s_prev, x);
    };
    models.later_transition = absorb_transition(std::move(models.later_transition));
    models.first_value = [S, inner = std::move(models.first_value)](
                             int s, const Eigen::VectorXd& x, double cv0) {
        return s == S ? 0.0 : inner(s, x, cv0);
    };
    models.later_value = [S, inner = std::move(models.later_value)](int s,
                                                                    const Eigen::VectorXd& x) {
        return s == S ? 0.0 : inner(s, x);
    };
    return models;
}

} // namespace clv
