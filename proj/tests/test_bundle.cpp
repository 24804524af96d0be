#include <doctest.h>

#include <nlohmann/json.hpp>

#include "clv/pipeline.hpp"

using namespace clv;

namespace {

// One small trained bundle shared across the cases (training is the slow
// part; every case below is read-only).
struct Fixture {
    PanelDataset panel;
    RunConfig config;
    ModelBundle bundle;

    Fixture() {
        GeneratorConfig gen = GeneratorConfig::defaults();
        gen.n_customers = 250;
        gen.n_years = 3;
        gen.seed = 31;
        panel = generate_population(gen);

        config.seed = 31;
        config.segments = 8;
        config.horizon = 3;
        config.transition_rounds = 6;
        config.value_rounds = 6;
        config.ensemble_tree.min_samples_leaf = 5;
        config.segmentation_tree.min_samples_leaf = 5;
        // a two-level ladder keeps the toy tree well-populated
        config.forced.nodes.push_back({"mortgage_held", 1, 2});
        config.forced.nodes.push_back({"investment_held", -1, -1});
        config.forced.nodes.push_back({"investment_held", -1, -1});
        bundle = train_bundle(panel, config);
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

} // namespace

TEST_CASE("bundle serialize/deserialize/serialize is byte-identical") {
    const auto& f = fixture();
    const std::string once = serialize_bundle(f.bundle);
    const ModelBundle restored = deserialize_bundle(once);
    CHECK(serialize_bundle(restored) == once);
}

TEST_CASE("training twice yields the identical bundle") {
    const auto& f = fixture();
    const ModelBundle again = train_bundle(f.panel, f.config);
    CHECK(serialize_bundle(again) == serialize_bundle(f.bundle));
}

TEST_CASE("a restored bundle simulates bit-identically") {
    const auto& f = fixture();
    const ModelBundle restored = deserialize_bundle(serialize_bundle(f.bundle));
    const auto a = simulate_panel(f.bundle, f.panel, 0, 3, 0.05, false, false, 1);
    const auto b = simulate_panel(restored, f.panel, 0, 3, 0.05, false, false, 1);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].result.clv == b[i].result.clv);
        CHECK(a[i].result.per_year_cv == b[i].result.per_year_cv);
    }
}

TEST_CASE("simulation is thread-count invariant") {
    const auto& f = fixture();
    const auto a = simulate_panel(f.bundle, f.panel, 0, 3, 0.0, false, false, 1);
    const auto b = simulate_panel(f.bundle, f.panel, 0, 3, 0.0, false, false, 2);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].result.clv == b[i].result.clv);
}

TEST_CASE("tampering and version drift are loud") {
    const auto& f = fixture();
    SUBCASE("tampered schema hash") {
        nlohmann::json j = f.bundle.to_json();
        j["schema_hash"] = "0000000000000000";
        CHECK_THROWS_AS(ModelBundle::from_json(j), VersionError);
    }
    SUBCASE("unknown top-level field") {
        nlohmann::json j = f.bundle.to_json();
        j["extra"] = 1;
        CHECK_THROWS_AS(ModelBundle::from_json(j), VersionError);
    }
    SUBCASE("format version mismatch") {
        nlohmann::json j = f.bundle.to_json();
        j["format_version"] = 99;
        CHECK_THROWS_AS(ModelBundle::from_json(j), VersionError);
    }
    SUBCASE("not JSON at all") {
        CHECK_THROWS_AS(deserialize_bundle("}{"), VersionError);
    }
}

TEST_CASE("re-evaluating a restored bundle reproduces the metrics report") {
    const auto& f = fixture();
    const ModelBundle restored = deserialize_bundle(serialize_bundle(f.bundle));
    const auto a = evaluate_panel(f.bundle, f.panel, 0, 2, {10, 20, 40}, f.config);
    const auto b = evaluate_panel(restored, f.panel, 0, 2, {10, 20, 40}, f.config);
    REQUIRE(a.learned.size() == b.learned.size());
    for (size_t i = 0; i < a.learned.size(); ++i)
        CHECK(a.learned[i].to_json() == b.learned[i].to_json());
    for (size_t i = 0; i < a.baseline.size(); ++i)
        CHECK(a.baseline[i].to_json() == b.baseline[i].to_json());
}

TEST_CASE("simple-variant models honor the feature-kind discipline") {
    const auto& f = fixture();
    const auto& schema = f.bundle.schema;
    for (const auto* model :
         {&f.bundle.transition_simple.base_features, &f.bundle.value_simple.base_features}) {
        CHECK_FALSE(model->empty());
        for (const auto& name : *model)
            CHECK(schema.kind_of(name) != FeatureKind::dynamic);
    }
    // the full variants do see dynamic features
    bool any_dynamic = false;
    for (const auto& name : f.bundle.value_full.base_features)
        any_dynamic = any_dynamic || schema.kind_of(name) == FeatureKind::dynamic;
    CHECK(any_dynamic);
}

TEST_CASE("simulate covers exactly the active customers") {
    const auto& f = fixture();
    int active = 0;
    for (const auto& rec : f.panel.records)
        if (rec.year_index == 0 && !rec.churned) ++active;
    const auto sims = simulate_panel(f.bundle, f.panel, 0, 3, 0.0, false, false, 1);
    CHECK(static_cast<int>(sims.size()) == active);
    for (const auto& sim : sims) {
        CHECK(sim.result.horizon == 3);
        for (const auto& dist : sim.result.per_year_distributions)
            CHECK(dist.sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("baseline simulation runs through the same recursion") {
    const auto& f = fixture();
    const auto learned = simulate_panel(f.bundle, f.panel, 0, 3, 0.0, false, false, 1);
    const auto baseline = simulate_panel(f.bundle, f.panel, 0, 3, 0.0, true, false, 1);
    REQUIRE(learned.size() == baseline.size());
    for (size_t i = 0; i < learned.size(); ++i) {
        CHECK(learned[i].customer_id == baseline[i].customer_id);
        CHECK(baseline[i].result.per_year_cv.size() == 3);
        for (const auto& dist : baseline[i].result.per_year_distributions)
            CHECK(dist.sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("churn-absorbing simulation keeps churn mass monotone") {
    const auto& f = fixture();
    const auto sims = simulate_panel(f.bundle, f.panel, 0, 3, 0.0, false, true, 1);
    const int churn = f.bundle.segmentation.churn_segment();
    for (const auto& sim : sims) {
        double previous = 0.0;
        for (const auto& dist : sim.result.per_year_distributions) {
            const double mass = dist[churn - 1];
            CHECK(mass >= previous - 1e-9);
            previous = mass;
        }
    }
}

TEST_CASE("run config round-trips and hashes canonically") {
    const auto& f = fixture();
    const RunConfig restored = RunConfig::from_json(f.config.to_json());
    CHECK(restored.to_json() == f.config.to_json());
    CHECK(restored.hash() == f.config.hash());
    RunConfig other = f.config;
    other.seed += 1;
    CHECK(other.hash() != f.config.hash());
    const nlohmann::json bogus = {{"not_a_key", true}};
    CHECK_THROWS_AS(RunConfig::from_json(bogus), ConfigError);
}
