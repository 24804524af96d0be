#include "clv/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace clv {

int top_set_size(double x_percent, int n) {
    return std::max(1, static_cast<int>(std::llround(x_percent / 100.0 * n)));
}

std::vector<int> rank_desc(const std::vector<double>& values) {
    std::vector<int> order(values.size());
    for (size_t i = 0; i < values.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return values[static_cast<size_t>(a)] > values[static_cast<size_t>(b)];
    });
    return order;
}

std::vector<int> rank_asc(const std::vector<double>& values) {
    std::vector<int> order(values.size());
    for (size_t i = 0; i < values.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return values[static_cast<size_t>(a)] < values[static_cast<size_t>(b)];
    });
    return order;
}

double medae(const std::vector<double>& predicted, const std::vector<double>& actual) {
    if (predicted.size() != actual.size()) throw DataError("prediction/actual length mismatch");
    if (predicted.empty()) throw DataError("medae of empty series");
    std::vector<double> abs_err(predicted.size());
    for (size_t i = 0; i < predicted.size(); ++i) abs_err[i] = std::abs(predicted[i] - actual[i]);
    std::sort(abs_err.begin(), abs_err.end());
    const size_t n = abs_err.size();
    if (n % 2 == 1) return abs_err[n / 2];
    return 0.5 * (abs_err[n / 2 - 1] + abs_err[n / 2]);
}

std::optional<double> separation(const std::vector<double>& predicted,
                                 const std::vector<double>& actual, double x_percent) {
    if (predicted.size() != actual.size()) throw DataError("prediction/actual length mismatch");
    const int n = static_cast<int>(predicted.size());
    if (n < 2) throw DataError("separation needs at least two customers");
    const int k = top_set_size(x_percent, n);

    const auto top = rank_desc(predicted);
    const auto bottom = rank_asc(predicted);
    double top_mean = 0.0, bottom_mean = 0.0;
    for (int i = 0; i < k; ++i) {
        top_mean += actual[static_cast<size_t>(top[static_cast<size_t>(i)])];
        bottom_mean += actual[static_cast<size_t>(bottom[static_cast<size_t>(i)])];
    }
    top_mean /= k;
    bottom_mean /= k;
    if (bottom_mean == 0.0) return std::nullopt;
    return top_mean / bottom_mean;
}

double top_x_precision(const std::vector<double>& predicted,
                       const std::vector<double>& actual, double x_percent) {
    if (predicted.size() != actual.size()) throw DataError("prediction/actual length mismatch");
    const int n = static_cast<int>(predicted.size());
    if (n < 1) throw DataError("top-x precision of empty series");
    const int k = top_set_size(x_percent, n);

    const auto by_predicted = rank_desc(predicted);
    const auto by_actual = rank_desc(actual);
    std::vector<char> in_actual_top(static_cast<size_t>(n), 0);
    for (int i = 0; i < k; ++i)
        in_actual_top[static_cast<size_t>(by_actual[static_cast<size_t>(i)])] = 1;
    int hits = 0;
    for (int i = 0; i < k; ++i)
        hits += in_actual_top[static_cast<size_t>(by_predicted[static_cast<size_t>(i)])];
    return static_cast<double>(hits) / k;
}

double transition_accuracy(const std::vector<Eigen::VectorXd>& predicted,
                           const std::vector<int>& actual_segments,
                           const std::function<int(int)>& class_mapping) {
    if (predicted.size() != actual_segments.size())
        throw DataError("prediction/actual length mismatch");
    if (predicted.empty()) throw DataError("accuracy of empty series");
    int hits = 0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        const auto& dist = predicted[i];
        int best = 0;
        for (int s = 1; s < dist.size(); ++s)
            if (dist[s] > dist[best]) best = s;  // ties keep the lowest id
        int predicted_class = best + 1;
        int actual_class = actual_segments[i];
        if (class_mapping) {
            predicted_class = class_mapping(predicted_class);
            actual_class = class_mapping(actual_class);
        }
        hits += predicted_class == actual_class ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::function<int(int)> four_class_mapping(const SegmentationModel& model) {
    return [&model](int segment) { return static_cast<int>(model.four_class_of(segment)); };
}

std::vector<LiftPoint> lift_curve(const std::vector<double>& propensities,
                                  const std::vector<bool>& actual_uptake,
                                  const std::vector<double>& x_grid) {
    if (propensities.size() != actual_uptake.size())
        throw DataError("propensity/uptake length mismatch");
    const int n = static_cast<int>(propensities.size());
    if (n < 1) throw DataError("lift of empty series");

    int uptakes = 0;
    for (bool took : actual_uptake) uptakes += took ? 1 : 0;
    const double baseline = static_cast<double>(uptakes) / n;

    const auto order = rank_desc(propensities);
    std::vector<LiftPoint> curve;
    curve.reserve(x_grid.size());
    for (double x : x_grid) {
        LiftPoint point;
        point.x_percent = x;
        if (baseline > 0.0) {
            const int k = top_set_size(x, n);
            int top_uptakes = 0;
            for (int i = 0; i < k; ++i)
                top_uptakes += actual_uptake[static_cast<size_t>(order[static_cast<size_t>(i)])] ? 1 : 0;
            point.lift = (static_cast<double>(top_uptakes) / k) / baseline;
        }
        curve.push_back(point);
    }
    return curve;
}

DecileMatrix decile_transition_matrix(const std::vector<double>& cv_year_a,
                                      const std::vector<double>& cv_year_b) {
    if (cv_year_a.size() != cv_year_b.size()) throw DataError("cv snapshot length mismatch");
    const int n = static_cast<int>(cv_year_a.size());
    if (n < 10) throw DataError("decile matrix needs at least 10 customers");

    const auto decile_of = [n](const std::vector<double>& values) {
        const auto order = rank_asc(values);
        std::vector<int> decile(static_cast<size_t>(n));
        for (int rank = 0; rank < n; ++rank)
            decile[static_cast<size_t>(order[static_cast<size_t>(rank)])] =
                std::min(9, rank * 10 / n);
        return decile;
    };
    const auto da = decile_of(cv_year_a);
    const auto db = decile_of(cv_year_b);

    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(10, 10);
    int moved = 0;
    for (int i = 0; i < n; ++i) {
        counts(da[static_cast<size_t>(i)], db[static_cast<size_t>(i)]) += 1.0;
        moved += da[static_cast<size_t>(i)] != db[static_cast<size_t>(i)] ? 1 : 0;
    }
    DecileMatrix out;
    out.matrix = Eigen::MatrixXd::Zero(10, 10);
    for (int r = 0; r < 10; ++r) {
        const double total = counts.row(r).sum();
        if (total > 0.0) out.matrix.row(r) = counts.row(r) / total;
    }
    out.moved_share = static_cast<double>(moved) / n;
    return out;
}

double propensity(const TransitionModel& model, const SegmentationModel& segmentation,
                  int s_prev, const Eigen::VectorXd& x_base,
                  const std::vector<std::string>& target_subtrees) {
    const FourClass bucket = segmentation.four_class_of(s_prev);
    for (const auto& label : target_subtrees)
        if (label == four_class_name(bucket))
            throw NotApplicable("customer already belongs to target subtree " + label);
    const auto targets = segmentation.segments_in_subtrees(target_subtrees);
    const Eigen::VectorXd dist = model.predict(s_prev, x_base);
    double mass = 0.0;
    for (int s : targets) mass += dist[s - 1];
    return mass;
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json sep;
    for (const auto& [x, value] : separation) {
        if (value) {
            sep[std::to_string(x)] = *value;
        } else {
            sep[std::to_string(x)] = nullptr;
        }
    }
    nlohmann::json prec;
    for (const auto& [x, value] : top_x_precision) prec[std::to_string(x)] = value;
    return {{"accuracy_4", accuracy_4},
            {"accuracy_50", accuracy_50},
            {"medae", medae},
            {"n_customers", n_customers},
            {"period", period_label},
            {"separation", sep},
            {"top_x_precision", prec}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    MetricsReport report;
    report.accuracy_4 = j.at("accuracy_4").get<double>();
    report.accuracy_50 = j.at("accuracy_50").get<double>();
    report.medae = j.at("medae").get<double>();
    report.n_customers = j.at("n_customers").get<int>();
    report.period_label = j.at("period").get<std::string>();
    for (const auto& [key, value] : j.at("separation").items())
        report.separation[std::stoi(key)] =
            value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
    for (const auto& [key, value] : j.at("top_x_precision").items())
        report.top_x_precision[std::stoi(key)] = value.get<double>();
    return report;
}

} // namespace clv
