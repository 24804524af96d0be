#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "clv/boosting.hpp"
#include "clv/rng.hpp"

using namespace clv;

namespace {

std::vector<std::string> names_for(int n) {
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("f" + std::to_string(i));
    return names;
}

} // namespace

TEST_CASE("zero-round regressor predicts the target mean") {
    Eigen::MatrixXd X(4, 1);
    X << 1, 2, 3, 4;
    Eigen::VectorXd y(4);
    y << 1, 2, 3, 6;
    const auto model = fit_gbdt_regressor(X, y, 0, 0.1, TreeFitParams{}, names_for(1));
    Eigen::VectorXd probe(1);
    probe << 100.0;
    CHECK(model.predict(probe) == doctest::Approx(3.0));
}

TEST_CASE("one full-shrinkage round interpolates distinct points exactly") {
    Eigen::MatrixXd X(4, 1);
    X << 0, 1, 2, 3;
    Eigen::VectorXd y(4);
    y << 5, -1, 2, 8;
    TreeFitParams params;
    params.max_leaves = 8;
    params.min_samples_leaf = 1;
    const auto model = fit_gbdt_regressor(X, y, 1, 1.0, params, names_for(1));
    for (int i = 0; i < 4; ++i)
        CHECK(model.predict(X.row(i)) == doctest::Approx(y[i]).epsilon(1e-12));
}

TEST_CASE("regression training MSE is non-increasing per round") {
    KeyedRng rng(41, 0, 0, 0);
    Eigen::MatrixXd X(200, 3);
    Eigen::VectorXd y(200);
    for (int i = 0; i < 200; ++i) {
        for (int c = 0; c < 3; ++c) X(i, c) = rng.uniform() * 4;
        y[i] = std::sin(X(i, 0)) + 0.5 * X(i, 1) + 0.3 * rng.normal();
    }
    TreeFitParams params;
    params.min_samples_leaf = 5;
    BoostFitTrace trace;
    fit_gbdt_regressor(X, y, 20, 0.3, params, names_for(3), &trace);
    REQUIRE(trace.loss_per_round.size() == 21);
    for (size_t r = 1; r < trace.loss_per_round.size(); ++r)
        CHECK(trace.loss_per_round[r] <= trace.loss_per_round[r - 1] + 1e-12);
}

TEST_CASE("zero-round classifier returns empirical class priors") {
    Eigen::MatrixXd X(3, 1);
    X << 0, 1, 2;
    const std::vector<int> labels = {0, 0, 1};
    const auto model = fit_gbdt_classifier(X, labels, 2, 0, 0.1, TreeFitParams{}, names_for(1));
    const Eigen::VectorXd p = model.predict_proba(X.row(0));
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("a class absent from the labels keeps a nonzero floor probability") {
    Eigen::MatrixXd X(4, 1);
    X << 0, 1, 2, 3;
    const std::vector<int> labels = {0, 0, 2, 2};  // class 1 never appears
    const auto model = fit_gbdt_classifier(X, labels, 3, 0, 0.1, TreeFitParams{}, names_for(1));
    const Eigen::VectorXd p = model.predict_proba(X.row(0));
    CHECK(p[1] > 0.0);
    CHECK(p[0] == doctest::Approx(2.0 / 5.0).epsilon(1e-12));  // counts (2, 1 floor, 2)
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("a linearly separable toy reaches perfect training accuracy") {
    Eigen::MatrixXd X(40, 1);
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
        X(i, 0) = (i - 20) * 0.25 + 0.125;
        labels.push_back(X(i, 0) < 0 ? 0 : 1);
    }
    TreeFitParams params;
    params.min_samples_leaf = 1;
    const auto model = fit_gbdt_classifier(X, labels, 2, 10, 0.1, params, names_for(1));
    int correct = 0;
    for (int i = 0; i < 40; ++i) {
        const Eigen::VectorXd p = model.predict_proba(X.row(i));
        correct += (p[1] > p[0] ? 1 : 0) == labels[static_cast<size_t>(i)] ? 1 : 0;
    }
    CHECK(correct == 40);
}

TEST_CASE("classification log-loss is non-increasing and probabilities normalized") {
    for (uint64_t trial = 0; trial < 3; ++trial) {
        KeyedRng rng(42, trial, 0, 0);
        const int n = 150;
        const int k = 3 + static_cast<int>(trial);
        Eigen::MatrixXd X(n, 2);
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            X(i, 0) = rng.uniform() * 6;
            X(i, 1) = rng.normal();
            labels.push_back(std::min(k - 1, static_cast<int>(X(i, 0)) % k));
        }
        TreeFitParams params;
        params.min_samples_leaf = 4;
        BoostFitTrace trace;
        const auto model =
            fit_gbdt_classifier(X, labels, k, 12, 1.0, params, names_for(2), &trace);
        REQUIRE(trace.loss_per_round.size() == 13);
        for (size_t r = 1; r < trace.loss_per_round.size(); ++r)
            CHECK(trace.loss_per_round[r] <= trace.loss_per_round[r - 1] + 1e-12);
        for (int i = 0; i < n; i += 17) {
            const Eigen::VectorXd p = model.predict_proba(X.row(i));
            CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(p.minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("softmax matches hand-computed values") {
    Eigen::VectorXd equal = Eigen::VectorXd::Constant(4, 2.5);
    const Eigen::VectorXd uniform = softmax(equal);
    for (int i = 0; i < 4; ++i) CHECK(uniform[i] == doctest::Approx(0.25).epsilon(1e-12));

    Eigen::VectorXd scores(2);
    scores << 0.0, std::log(3.0);
    const Eigen::VectorXd p = softmax(scores);
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("task mismatches are rejected") {
    Eigen::MatrixXd X(4, 1);
    X << 0, 1, 2, 3;
    Eigen::VectorXd y(4);
    y << 0, 1, 2, 3;
    const auto reg = fit_gbdt_regressor(X, y, 0, 0.1, TreeFitParams{}, names_for(1));
    CHECK_THROWS_AS(reg.predict_proba(X.row(0)), TaskError);
    const auto cls =
        fit_gbdt_classifier(X, {0, 1, 0, 1}, 2, 0, 0.1, TreeFitParams{}, names_for(1));
    CHECK_THROWS_AS(cls.predict(X.row(0)), TaskError);
    CHECK_THROWS_AS(
        fit_gbdt_classifier(X, {0, 1, 0, 5}, 2, 0, 0.1, TreeFitParams{}, names_for(1)),
        DataError);
}

TEST_CASE("per-class parallel fitting is bit-identical to sequential") {
    KeyedRng rng(43, 0, 0, 0);
    Eigen::MatrixXd X(120, 3);
    std::vector<int> labels;
    for (int i = 0; i < 120; ++i) {
        for (int c = 0; c < 3; ++c) X(i, c) = rng.uniform();
        labels.push_back(rng.uniform_int(0, 3));
    }
    TreeFitParams params;
    params.min_samples_leaf = 3;
    const auto sequential =
        fit_gbdt_classifier(X, labels, 4, 6, 0.2, params, names_for(3), nullptr, 1);
    const auto parallel =
        fit_gbdt_classifier(X, labels, 4, 6, 0.2, params, names_for(3), nullptr, 2);
    CHECK(sequential.to_json() == parallel.to_json());
}

TEST_CASE("ensemble JSON round-trip preserves predictions bit-exactly") {
    KeyedRng rng(44, 0, 0, 0);
    Eigen::MatrixXd X(80, 2);
    std::vector<int> labels;
    for (int i = 0; i < 80; ++i) {
        X(i, 0) = rng.uniform() * 3;
        X(i, 1) = rng.normal();
        labels.push_back(rng.uniform_int(0, 2));
    }
    TreeFitParams params;
    params.min_samples_leaf = 2;
    const auto model = fit_gbdt_classifier(X, labels, 3, 8, 0.3, params, names_for(2));
    const auto restored = GradientBoostedEnsemble::from_json(model.to_json());
    CHECK(restored.to_json().dump() == model.to_json().dump());
    for (int i = 0; i < 80; i += 9) {
        const Eigen::VectorXd a = model.predict_proba(X.row(i));
        const Eigen::VectorXd b = restored.predict_proba(X.row(i));
        for (int k = 0; k < 3; ++k) CHECK(a[k] == b[k]);
    }

    nlohmann::json tampered = model.to_json();
    tampered["surprise"] = 1;
    CHECK_THROWS_AS(GradientBoostedEnsemble::from_json(tampered), VersionError);
    nlohmann::json bad_hash = model.to_json();
    bad_hash["feature_names"] = std::vector<std::string>{"x", "y"};
    CHECK_THROWS_AS(GradientBoostedEnsemble::from_json(bad_hash), VersionError);
}

TEST_CASE("feature importances cover every named feature") {
    Eigen::MatrixXd X(60, 2);
    Eigen::VectorXd y(60);
    for (int i = 0; i < 60; ++i) {
        X(i, 0) = i % 4;
        X(i, 1) = 7.0;  // constant, never split
        y[i] = 3.0 * X(i, 0);
    }
    TreeFitParams params;
    params.min_samples_leaf = 2;
    const auto model = fit_gbdt_regressor(X, y, 3, 0.5, params, {"signal", "dead"});
    const auto importances = feature_importances(model);
    CHECK(importances.at("signal") > 0.0);
    CHECK(importances.at("dead") == 0.0);
}
