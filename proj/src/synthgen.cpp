#include "clv/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "clv/rng.hpp"

namespace clv {

namespace {

enum RngTag : uint64_t {
    kTagWealth = 1,
    kTagAge,
    kTagTenure,
    kTagRegion,
    kTagEngagementInit,
    kTagEngagementStep,
    kTagIncome,
    kTagInitialHold,
    kTagTenureInit,
    kTagBalanceInit,
    kTagBalanceDrift,
    kTagAdopt,
    kTagAttrit,
    kTagChurn,
    kTagComponents,
};

uint64_t product_tag(RngTag tag, int product) {
    return tag | (static_cast<uint64_t>(product + 1) << 8);
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct ProductParams {
    double init_intercept;  // initial-stock logit intercept
    double init_wealth;
    double init_engagement;
    double init_age;
    double attrit_intercept;
    double attrit_tenure_center;  // months after which attrition pressure builds
    double attrit_tenure_slope;
    double balance_scale;
    double revenue_rate;
    double el_rate;
    double cc_rate;
    double cr_rate;
};

// Indexed by ProductKind. Mortgages carry by far the largest value, matching
// the product-value ordering the segmentation is meant to separate.
constexpr ProductParams kProducts[kProductCount] = {
    // current_account
    {2.5, 0.2, 0.4, 0.0, -4.0, 0.0, 0.0, 4.0e3, 0.021, 0.0010, 0.004, 0.0005},
    // savings
    {0.2, 0.5, 0.3, 0.0, -2.8, 0.0, 0.0, 2.0e4, 0.011, 0.0002, 0.003, 0.0001},
    // loan
    {-1.1, -0.1, 0.2, -0.3, -2.4, 48.0, 2.5, 1.2e4, 0.062, 0.0220, 0.012, 0.0040},
    // credit_card
    {-0.2, 0.3, 0.3, 0.0, -2.8, 0.0, 0.0, 2.5e3, 0.085, 0.0300, 0.015, 0.0060},
    // mortgage
    {-0.7, 0.9, 0.2, -0.2, -3.4, 240.0, 1.5, 1.5e5, 0.024, 0.0030, 0.007, 0.0008},
    // investment
    {-1.6, 1.4, 0.4, 0.2, -2.9, 0.0, 0.0, 5.0e4, 0.019, 0.0010, 0.004, 0.0003},
};

struct CustomerState {
    double wealth_z = 0.0;  // latent, static
    double age = 0.0;
    double tenure_years = 0.0;
    double region = 0.0;
    double engagement = 0.5;
    double income = 0.0;
    bool held[kProductCount] = {};
    double balance[kProductCount] = {};
    int tenure_months[kProductCount] = {};
};

double engagement_signal(double e) { return 2.0 * (e - 0.5); }

Eigen::VectorXd state_features(const FeatureSchema& schema, const CustomerState& s) {
    Eigen::VectorXd x(schema.size());
    int i = 0;
    x[i++] = s.region;
    x[i++] = s.age;
    x[i++] = s.tenure_years;
    x[i++] = s.income;
    x[i++] = s.engagement;
    for (int p = 0; p < kProductCount; ++p) x[i++] = s.held[p] ? 1.0 : 0.0;
    for (int p = 0; p < kProductCount; ++p) x[i++] = s.held[p] ? s.balance[p] : 0.0;
    // tenure of a product not held is missing, not zero: the sentinel stays
    // missing under per-period progression, so simulated years cannot
    // fabricate ownership history
    for (int p = 0; p < kProductCount; ++p)
        x[i++] = s.held[p] ? static_cast<double>(s.tenure_months[p]) : missing_value();
    return x;
}

std::vector<ProductHolding> state_holdings(const GeneratorConfig& cfg, uint64_t customer,
                                           int year, const CustomerState& s) {
    std::vector<ProductHolding> holdings;
    for (int p = 0; p < kProductCount; ++p) {
        if (!s.held[p]) continue;
        KeyedRng rng(cfg.seed, customer, static_cast<uint64_t>(year),
                     product_tag(kTagComponents, p));
        const ProductParams& pp = kProducts[p];
        const double jitter = cfg.value_noise_scale;
        ProductHolding h;
        h.kind = static_cast<ProductKind>(p);
        h.balance = s.balance[p];
        h.tenure_months = s.tenure_months[p];
        h.components.revenue = pp.revenue_rate * s.balance[p] * (1.0 + jitter * rng.normal());
        h.components.expected_loss =
            std::max(0.0, pp.el_rate * s.balance[p] * (1.0 + jitter * rng.normal()));
        h.components.cost_of_capital =
            std::max(0.0, pp.cc_rate * s.balance[p] * (1.0 + jitter * rng.normal()));
        h.components.collections_recoveries =
            std::max(0.0, pp.cr_rate * s.balance[p] * (1.0 + jitter * rng.normal()));
        holdings.push_back(h);
    }
    return holdings;
}

} // namespace

GeneratorConfig::GeneratorConfig() {
    adoption_weights = {
        {"current_account", {-2.2, 0.4, 1.0, 0.0}},
        {"savings", {-2.1, 0.8, 1.2, 0.0}},
        {"loan", {-2.4, -0.2, 0.3, -0.4}},
        {"credit_card", {-2.3, 0.4, 1.0, 0.0}},
        {"mortgage", {-3.2, 1.6, 0.8, -0.5}},
        {"investment", {-3.4, 2.2, 1.4, 0.3}},
    };
}

nlohmann::json GeneratorConfig::to_json() const {
    nlohmann::json weights(nlohmann::json::value_t::object);
    for (const auto& [name, w] : adoption_weights)
        weights[name] = {{"age", w.age},
                         {"engagement", w.engagement},
                         {"intercept", w.intercept},
                         {"wealth", w.wealth}};
    return {{"adoption_weights", weights},
            {"churn_base_rate", churn_base_rate},
            {"n_customers", n_customers},
            {"n_years", n_years},
            {"seed", seed},
            {"value_noise_scale", value_noise_scale}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
    GeneratorConfig cfg = defaults();
    for (const auto& [key, value] : j.items()) {
        if (key == "n_customers") cfg.n_customers = value.get<int>();
        else if (key == "n_years") cfg.n_years = value.get<int>();
        else if (key == "seed") cfg.seed = value.get<uint64_t>();
        else if (key == "churn_base_rate") cfg.churn_base_rate = value.get<double>();
        else if (key == "value_noise_scale") cfg.value_noise_scale = value.get<double>();
        else if (key == "adoption_weights") {
            for (const auto& [product, w] : value.items()) {
                AdoptionWeights weights;
                weights.intercept = w.at("intercept").get<double>();
                weights.wealth = w.at("wealth").get<double>();
                weights.engagement = w.at("engagement").get<double>();
                weights.age = w.at("age").get<double>();
                product_from_name(product);  // validates the key
                cfg.adoption_weights[product] = weights;
            }
        } else {
            throw ConfigError("unknown generator config key: " + key);
        }
    }
    return cfg;
}

FeatureSchema synthetic_schema() {
    FeatureSchema schema;
    const auto add = [&](const std::string& name, FeatureKind kind) {
        schema.features.push_back({name, kind});
    };
    add("region_code", FeatureKind::static_);
    add("age_years", FeatureKind::yearly_progressing);
    add("tenure_years", FeatureKind::yearly_progressing);
    add("income", FeatureKind::dynamic);
    add("engagement_score", FeatureKind::dynamic);
    for (int p = 0; p < kProductCount; ++p)
        add(std::string(product_name(static_cast<ProductKind>(p))) + "_held",
            FeatureKind::dynamic);
    for (int p = 0; p < kProductCount; ++p)
        add(std::string(product_name(static_cast<ProductKind>(p))) + "_balance",
            FeatureKind::dynamic);
    for (int p = 0; p < kProductCount; ++p)
        add(std::string(product_name(static_cast<ProductKind>(p))) + "_tenure_months",
            FeatureKind::monthly_progressing);
    return schema;
}

PanelDataset generate_population(const GeneratorConfig& config) {
    if (config.n_customers < 0) throw ConfigError("n_customers must be >= 0");
    if (config.n_years < 1) throw ConfigError("n_years must be >= 1");
    if (config.churn_base_rate < 0.0 || config.churn_base_rate > 1.0)
        throw ConfigError("churn_base_rate must be a probability");
    if (config.value_noise_scale < 0.0) throw ConfigError("value_noise_scale must be >= 0");
    for (const auto& [product, w] : config.adoption_weights) {
        product_from_name(product);
        (void)w;
    }

    const GeneratorConfig defaults = GeneratorConfig::defaults();
    const auto adoption = [&](int p) -> AdoptionWeights {
        const std::string name = product_name(static_cast<ProductKind>(p));
        auto it = config.adoption_weights.find(name);
        if (it != config.adoption_weights.end()) return it->second;
        return defaults.adoption_weights.at(name);
    };
    const double churn_logit_base =
        std::log(std::max(config.churn_base_rate, 1e-9) /
                 std::max(1.0 - config.churn_base_rate, 1e-9));

    PanelDataset panel;
    panel.schema = synthetic_schema();

    char id_buf[16];
    for (int c = 0; c < config.n_customers; ++c) {
        const auto cu = static_cast<uint64_t>(c);
        std::snprintf(id_buf, sizeof(id_buf), "C%06d", c);
        const std::string customer_id(id_buf);

        CustomerState s;
        s.wealth_z = KeyedRng(config.seed, cu, 0, kTagWealth).normal();
        const double wealth = std::exp(0.8 * s.wealth_z);
        s.age = 25.0 + std::floor(KeyedRng(config.seed, cu, 0, kTagAge).uniform() * 48.0);
        {
            const double u = KeyedRng(config.seed, cu, 0, kTagTenure).uniform();
            s.tenure_years = std::floor(u * u * 25.0);
        }
        s.region =
            static_cast<double>(KeyedRng(config.seed, cu, 0, kTagRegion).uniform_int(0, 7));
        s.engagement = KeyedRng(config.seed, cu, 0, kTagEngagementInit).uniform();
        s.income =
            35000.0 * wealth * (1.0 + 0.08 * KeyedRng(config.seed, cu, 0, kTagIncome).normal());

        const double age_z = (s.age - 50.0) / 15.0;
        for (int p = 0; p < kProductCount; ++p) {
            const ProductParams& pp = kProducts[p];
            KeyedRng rng(config.seed, cu, 0, product_tag(kTagInitialHold, p));
            const double logit = pp.init_intercept + pp.init_wealth * s.wealth_z +
                                 pp.init_engagement * engagement_signal(s.engagement) +
                                 pp.init_age * age_z;
            s.held[p] = rng.bernoulli(logistic(logit));
            if (s.held[p]) {
                KeyedRng brng(config.seed, cu, 0, product_tag(kTagBalanceInit, p));
                s.balance[p] = pp.balance_scale * wealth * std::exp(0.5 * brng.normal());
                KeyedRng trng(config.seed, cu, 0, product_tag(kTagTenureInit, p));
                s.tenure_months[p] = 6 + trng.uniform_int(0, 179);
            }
        }

        {
            CustomerYearRecord rec;
            rec.customer_id = customer_id;
            rec.year_index = 0;
            rec.features = state_features(panel.schema, s);
            rec.holdings = state_holdings(config, cu, 0, s);
            rec.cv = customer_value(rec.holdings);
            panel.records.push_back(std::move(rec));
        }

        for (int year = 1; year < config.n_years; ++year) {
            const auto yu = static_cast<uint64_t>(year);
            int n_products = 0;
            for (bool held : s.held) n_products += held ? 1 : 0;

            const double churn_logit = churn_logit_base +
                                       3.2 * (0.5 - s.engagement) * 2.0 -
                                       0.4 * (n_products - 1) - 0.3 * s.wealth_z;
            const bool churns =
                KeyedRng(config.seed, cu, yu, kTagChurn).bernoulli(logistic(churn_logit));

            s.age += 1.0;
            s.tenure_years += 1.0;
            // adoption, attrition and balance drift below all read the
            // engagement observed in the previous row; the new engagement and
            // income are drawn afterwards
            const double engagement_prev = s.engagement;
            {
                KeyedRng erng(config.seed, cu, yu, kTagEngagementStep);
                s.engagement =
                    std::clamp(s.engagement + 0.3 * (erng.uniform() - 0.5), 0.0, 1.0);
            }
            s.income = 35000.0 * wealth *
                       (1.0 + 0.08 * KeyedRng(config.seed, cu, yu, kTagIncome).normal());

            if (churns) {
                for (int p = 0; p < kProductCount; ++p) {
                    s.held[p] = false;
                    s.balance[p] = 0.0;
                    s.tenure_months[p] = 0;
                }
                CustomerYearRecord rec;
                rec.customer_id = customer_id;
                rec.year_index = year;
                rec.churned = true;
                rec.features = state_features(panel.schema, s);
                rec.cv = 0.0;
                panel.records.push_back(std::move(rec));
                break;
            }

            const double now_age_z = (s.age - 50.0) / 15.0;
            const double engagement_sig = engagement_signal(engagement_prev);
            for (int p = 0; p < kProductCount; ++p) {
                const ProductParams& pp = kProducts[p];
                if (s.held[p]) {
                    double logit = pp.attrit_intercept + 1.6 * (0.5 - engagement_prev) * 2.0 -
                                   0.3 * s.wealth_z;
                    if (pp.attrit_tenure_slope > 0.0)
                        logit += pp.attrit_tenure_slope *
                                 std::clamp((s.tenure_months[p] - pp.attrit_tenure_center) /
                                                pp.attrit_tenure_center,
                                            0.0, 1.5);
                    if (KeyedRng(config.seed, cu, yu, product_tag(kTagAttrit, p))
                            .bernoulli(logistic(logit))) {
                        s.held[p] = false;
                        s.balance[p] = 0.0;
                        s.tenure_months[p] = 0;
                    } else {
                        KeyedRng drng(config.seed, cu, yu, product_tag(kTagBalanceDrift, p));
                        s.balance[p] *= std::exp(0.55 * engagement_sig + 0.10 * s.wealth_z +
                                                 0.12 * drng.normal());
                        s.tenure_months[p] += 12;
                    }
                } else {
                    const AdoptionWeights w = adoption(p);
                    const double logit = w.intercept + w.wealth * s.wealth_z +
                                         w.engagement * engagement_sig + w.age * now_age_z;
                    if (KeyedRng(config.seed, cu, yu, product_tag(kTagAdopt, p))
                            .bernoulli(logistic(logit))) {
                        s.held[p] = true;
                        KeyedRng brng(config.seed, cu, yu, product_tag(kTagBalanceInit, p));
                        s.balance[p] = pp.balance_scale * wealth * std::exp(0.5 * brng.normal());
                        s.tenure_months[p] = 6;
                    }
                }
            }

            CustomerYearRecord rec;
            rec.customer_id = customer_id;
            rec.year_index = year;
            rec.features = state_features(panel.schema, s);
            rec.holdings = state_holdings(config, cu, year, s);
            rec.cv = customer_value(rec.holdings);
            panel.records.push_back(std::move(rec));
        }
    }
    return panel;
}

std::pair<PanelDataset, PanelDataset> split_holdout(const PanelDataset& dataset,
                                                    double fraction, uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0)
        throw ConfigError("holdout fraction must be in [0, 1]");
    const auto ids = dataset.customer_ids();
    const auto n_test =
        static_cast<size_t>(std::llround(fraction * static_cast<double>(ids.size())));

    std::vector<std::pair<uint64_t, std::string>> keyed;
    keyed.reserve(ids.size());
    for (const auto& id : ids) {
        uint64_t h = seed ^ fnv1a64(id);
        keyed.emplace_back(splitmix64(h), id);
    }
    std::sort(keyed.begin(), keyed.end());

    std::set<std::string> test_ids;
    for (size_t i = 0; i < n_test && i < keyed.size(); ++i) test_ids.insert(keyed[i].second);

    PanelDataset train, test;
    train.schema = dataset.schema;
    test.schema = dataset.schema;
    for (const auto& rec : dataset.records)
        (test_ids.count(rec.customer_id) ? test : train).records.push_back(rec);
    return {std::move(train), std::move(test)};
}

} // namespace clv
