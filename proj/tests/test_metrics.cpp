#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "clv/metrics.hpp"
#include "clv/rng.hpp"

using namespace clv;

TEST_CASE("medae follows the median convention") {
    CHECK(medae({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(medae({1, 2, 3}, {1, 3, 5}) == 1.0);
    CHECK(medae({1, 2}, {2, 4}) == 1.5);  // even count averages the middle two
    CHECK_THROWS_AS(medae({1, 2}, {1}), DataError);
}

namespace {

std::vector<double> ramp(int n) {
    std::vector<double> v;
    for (int i = 1; i <= n; ++i) v.push_back(i);
    return v;
}

} // namespace

TEST_CASE("separation reproduces the hand fixtures") {
    const auto values = ramp(10);
    // top half mean 8, bottom half mean 3
    CHECK(separation(values, values, 50).value() == doctest::Approx(8.0 / 3.0).epsilon(1e-12));

    std::vector<double> reversed(values.rbegin(), values.rend());
    CHECK(separation(reversed, values, 50).value() ==
          doctest::Approx(3.0 / 8.0).epsilon(1e-12));

    const std::vector<double> constant(10, 4.2);
    CHECK(separation(values, constant, 50).value() == doctest::Approx(1.0).epsilon(1e-12));

    // zero bottom mean -> undefined, not an error
    std::vector<double> zero_bottom = {0, 0, 0, 0, 0, 1, 2, 3, 4, 5};
    CHECK_FALSE(separation(values, zero_bottom, 50).has_value());
}

TEST_CASE("separation of a self-ranking is at least 1 on nonnegative data") {
    KeyedRng rng(81, 0, 0, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> actual;
        for (int i = 0; i < 30; ++i) actual.push_back(rng.uniform() * 10 + 0.1);
        const auto s = separation(actual, actual, 10 + 10 * (trial % 4));
        REQUIRE(s.has_value());
        CHECK(*s >= 1.0 - 1e-12);
    }
}

TEST_CASE("top-x precision counts overlap of predicted and actual top sets") {
    const auto values = ramp(10);
    CHECK(top_x_precision(values, values, 50) == 1.0);

    std::vector<double> reversed(values.rbegin(), values.rend());
    CHECK(top_x_precision(reversed, values, 50) == 0.0);

    // n=10, x=20: top-2 predicted are items 8,9; actual top-2 are 0,9
    std::vector<double> actual = {100, 1, 2, 3, 4, 5, 6, 7, 8, 99};
    CHECK(top_x_precision(values, actual, 20) == 0.5);
}

TEST_CASE("rank-based metrics are scale invariant") {
    KeyedRng rng(82, 0, 0, 0);
    std::vector<double> predicted, actual;
    std::vector<bool> uptake;
    for (int i = 0; i < 40; ++i) {
        predicted.push_back(rng.normal());
        actual.push_back(rng.uniform() * 5 + 1);
        uptake.push_back(rng.bernoulli(0.3));
    }
    std::vector<double> scaled = predicted;
    for (double& v : scaled) v *= 17.5;

    CHECK(separation(predicted, actual, 25).value() ==
          separation(scaled, actual, 25).value());
    CHECK(top_x_precision(predicted, actual, 25) == top_x_precision(scaled, actual, 25));
    const auto a = lift_curve(predicted, uptake, {10, 20, 40, 100});
    const auto b = lift_curve(scaled, uptake, {10, 20, 40, 100});
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].lift.value() == b[i].lift.value());
}

TEST_CASE("transition accuracy takes the argmax with low-id ties") {
    std::vector<Eigen::VectorXd> predicted;
    Eigen::VectorXd onehot2(3);
    onehot2 << 0.1, 0.8, 0.1;
    Eigen::VectorXd tie(3);
    tie << 0.4, 0.4, 0.2;  // argmax -> segment 1
    predicted = {onehot2, onehot2, tie, tie};
    CHECK(transition_accuracy(predicted, {2, 2, 1, 1}) == 1.0);
    CHECK(transition_accuracy(predicted, {2, 1, 2, 3}) == 0.25);
    CHECK(transition_accuracy(predicted, {2, 3, 1, 3}) == 0.5);
}

TEST_CASE("four-class accuracy forgives within-bucket misses") {
    SegmentationModel model;
    model.n_segments = 5;  // churn = 5
    model.tree.leaf_count = 4;
    model.four_class_by_segment = {FourClass::s00, FourClass::s00, FourClass::s11,
                                   FourClass::s11};

    Eigen::VectorXd predicts_seg3(5), predicts_seg4(5);
    predicts_seg3 << 0.0, 0.1, 0.7, 0.2, 0.0;
    predicts_seg4 << 0.0, 0.1, 0.2, 0.7, 0.0;
    // actual segment 4: a 50-class miss but a four-class hit via S11
    const std::vector<Eigen::VectorXd> dists = {predicts_seg3, predicts_seg4};
    const std::vector<int> actual = {4, 4};
    CHECK(transition_accuracy(dists, actual) == 0.5);
    CHECK(transition_accuracy(dists, actual, four_class_mapping(model)) == 1.0);

    // churn keeps its own bucket
    Eigen::VectorXd predicts_churn(5);
    predicts_churn << 0.0, 0.0, 0.1, 0.1, 0.8;
    CHECK(transition_accuracy({predicts_churn}, {5}, four_class_mapping(model)) == 1.0);
    CHECK(transition_accuracy({predicts_churn}, {1}, four_class_mapping(model)) == 0.0);
}

TEST_CASE("lift follows the uptake-share definition") {
    SUBCASE("whole population is always 1") {
        KeyedRng rng(83, 0, 0, 0);
        std::vector<double> propensities;
        std::vector<bool> uptake;
        for (int i = 0; i < 25; ++i) {
            propensities.push_back(rng.uniform());
            uptake.push_back(rng.bernoulli(0.4));
        }
        const auto curve = lift_curve(propensities, uptake, {100});
        CHECK(curve[0].lift.value() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("hand fixture gives 5x") {
        // n=10, 2 uptakes, both in the top-2 by propensity
        std::vector<double> propensities = {0.9, 0.8, 0.3, 0.3, 0.3, 0.2, 0.2, 0.1, 0.1, 0.0};
        std::vector<bool> uptake = {true, true, false, false, false,
                                    false, false, false, false, false};
        const auto curve = lift_curve(propensities, uptake, {20});
        CHECK(curve[0].lift.value() == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("zero baseline is undefined, not an error") {
        const auto curve = lift_curve({0.5, 0.1}, {false, false}, {50, 100});
        CHECK_FALSE(curve[0].lift.has_value());
        CHECK_FALSE(curve[1].lift.has_value());
    }
}

TEST_CASE("decile transition matrix captures rank movement") {
    SUBCASE("identical snapshots give the identity") {
        const auto values = ramp(20);
        const auto result = decile_transition_matrix(values, values);
        CHECK(result.moved_share == 0.0);
        for (int d = 0; d < 10; ++d) CHECK(result.matrix(d, d) == 1.0);
    }
    SUBCASE("global rank reversal gives the anti-diagonal") {
        const auto values = ramp(10);
        std::vector<double> reversed(values.rbegin(), values.rend());
        const auto result = decile_transition_matrix(values, reversed);
        CHECK(result.moved_share == 1.0);
        for (int d = 0; d < 10; ++d) CHECK(result.matrix(d, 9 - d) == 1.0);
    }
    SUBCASE("rows are stochastic") {
        KeyedRng rng(84, 0, 0, 0);
        std::vector<double> a, b;
        for (int i = 0; i < 57; ++i) {
            a.push_back(rng.normal());
            b.push_back(rng.normal());
        }
        const auto result = decile_transition_matrix(a, b);
        for (int r = 0; r < 10; ++r)
            CHECK(result.matrix.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("too few customers is an error") {
        CHECK_THROWS_AS(decile_transition_matrix({1, 2}, {2, 1}), DataError);
    }
}

namespace {

// A rounds=0 classifier carries its class distribution in the init scores.
TransitionModel fixed_distribution_model(const Eigen::VectorXd& probabilities) {
    TransitionModel model;
    model.variant = ModelVariant::full;
    model.n_segments = static_cast<int>(probabilities.size());
    model.base_features = {"f"};
    model.classifier.task = BoostTask::multiclass;
    model.classifier.n_classes = model.n_segments;
    model.classifier.shrinkage = 0.1;
    model.classifier.feature_names = {"f"};
    for (int s = 0; s < model.n_segments; ++s)
        model.classifier.feature_names.push_back("prev_segment_is_" + std::to_string(s + 1));
    for (int s = 0; s < model.n_segments; ++s)
        model.classifier.init_scores.push_back(std::log(probabilities[s]));
    return model;
}

SegmentationModel five_segment_fixture() {
    SegmentationModel model;
    model.n_segments = 5;
    model.tree.leaf_count = 4;
    model.four_class_by_segment = {FourClass::s01, FourClass::s11, FourClass::s00,
                                   FourClass::s10};
    model.subtree_map["S00"] = {3};
    model.subtree_map["S01"] = {1};
    model.subtree_map["S10"] = {4};
    model.subtree_map["S11"] = {2};
    return model;
}

} // namespace

TEST_CASE("propensity sums transition mass into the target subtrees") {
    Eigen::VectorXd p(5);
    p << 0.05, 0.05, 0.4, 0.3, 0.2;
    const auto model = fixed_distribution_model(p);
    const auto segmentation = five_segment_fixture();
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);

    // customer in S00 (segment 3) targeted at the investment subtrees
    CHECK(propensity(model, segmentation, 3, x, {"S01", "S11"}) ==
          doctest::Approx(0.10).epsilon(1e-9));

    // all-mass-elsewhere distribution
    Eigen::VectorXd q(5);
    q << 1e-12, 1e-12, 0.6, 0.4, 1e-12;
    const auto zero_model = fixed_distribution_model(q / q.sum());
    CHECK(propensity(zero_model, segmentation, 3, x, {"S01", "S11"}) ==
          doctest::Approx(0.0).epsilon(1e-6));

    // already holding the target
    CHECK_THROWS_AS(propensity(model, segmentation, 1, x, {"S01", "S11"}), NotApplicable);

    // the four buckets plus churn account for all mass (the customer's own
    // bucket read straight off the distribution)
    const Eigen::VectorXd dist = model.predict(3, x);
    const double total = propensity(model, segmentation, 3, x, {"S01", "S11"}) +
                         propensity(model, segmentation, 3, x, {"S10"}) + dist[2] + dist[4];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("metrics report JSON keeps undefined separations distinct") {
    MetricsReport report;
    report.period_label = "1-year (y0->y1)";
    report.n_customers = 10;
    report.medae = 1.5;
    report.separation[10] = 3.25;
    report.separation[20] = std::nullopt;
    report.top_x_precision[10] = 0.7;
    report.accuracy_50 = 0.8;
    report.accuracy_4 = 0.9;
    const auto restored = MetricsReport::from_json(report.to_json());
    CHECK(restored.to_json() == report.to_json());
    CHECK(restored.separation.at(10).value() == 3.25);
    CHECK_FALSE(restored.separation.at(20).has_value());
}
