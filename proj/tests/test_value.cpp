#include <doctest.h>

#include <limits>
#include <vector>

#include "clv/rng.hpp"
#include "clv/value.hpp"

using namespace clv;

TEST_CASE("product_value is revenue minus the three cost components") {
    CHECK(product_value({0, 0, 0, 0}) == 0.0);
    // 5.0 - (1.0 + 0.5 + 0.5)
    CHECK(product_value({5.0, 1.0, 0.5, 0.5}) == doctest::Approx(3.0).epsilon(1e-12));
    // negative values are allowed
    CHECK(product_value({2.0, 3.0, 0.0, 0.0}) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("product_value rejects non-finite components") {
    const double inf = std::numeric_limits<double>::infinity();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(product_value({inf, 0, 0, 0}), InvalidValue);
    CHECK_THROWS_AS(product_value({0, nan, 0, 0}), InvalidValue);
}

TEST_CASE("product_value is linear in each component") {
    KeyedRng rng(11, 0, 0, 0);
    for (int i = 0; i < 50; ++i) {
        ValueComponents a{rng.normal(), rng.uniform(), rng.uniform(), rng.uniform()};
        const double scale = 1.0 + rng.uniform();
        ValueComponents b{a.revenue * scale, a.expected_loss * scale,
                          a.cost_of_capital * scale, a.collections_recoveries * scale};
        CHECK(product_value(b) == doctest::Approx(scale * product_value(a)).epsilon(1e-12));
    }
}

namespace {

ProductHolding holding_with_value(double v) {
    ProductHolding h;
    h.components.revenue = v;
    return h;
}

} // namespace

TEST_CASE("customer_value sums product values") {
    CHECK(customer_value({}) == 0.0);

    const std::vector<ProductHolding> one = {holding_with_value(7.25)};
    CHECK(customer_value(one) == doctest::Approx(7.25).epsilon(1e-12));

    const std::vector<ProductHolding> three = {holding_with_value(3.0),
                                               holding_with_value(-1.0),
                                               holding_with_value(0.5)};
    CHECK(customer_value(three) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("customer_value is permutation invariant") {
    std::vector<ProductHolding> holdings;
    KeyedRng rng(12, 0, 0, 0);
    for (int i = 0; i < 6; ++i) holdings.push_back(holding_with_value(rng.normal() * 100));
    const double reference = customer_value(holdings);
    std::reverse(holdings.begin(), holdings.end());
    CHECK(customer_value(holdings) == doctest::Approx(reference).epsilon(1e-12));
}

TEST_CASE("discounted_clv discounts from t=1") {
    CHECK(discounted_clv(std::vector<double>{100.0}, 0.0) == 100.0);
    // 110/1.1 + 121/1.21
    CHECK(discounted_clv(std::vector<double>{110.0, 121.0}, 0.1) ==
          doctest::Approx(200.0).epsilon(1e-12));
    CHECK(discounted_clv(std::vector<double>{100.0, 100.0, 100.0}, 0.0) == 300.0);
}

TEST_CASE("discounted_clv rejects d <= -1") {
    CHECK_THROWS_AS(discounted_clv(std::vector<double>{1.0}, -1.0), InvalidDiscount);
    CHECK_THROWS_AS(discounted_clv(std::vector<double>{1.0}, -1.5), InvalidDiscount);
}

TEST_CASE("discounted_clv with d=0 is the plain sum and decreases in d") {
    KeyedRng rng(13, 0, 0, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> series;
        double total = 0.0;
        const int n = 1 + rng.uniform_int(0, 6);
        for (int t = 0; t < n; ++t) {
            series.push_back(rng.uniform() * 50);
            total += series.back();
        }
        CHECK(discounted_clv(series, 0.0) == doctest::Approx(total).epsilon(1e-12));
        double previous = discounted_clv(series, 0.0);
        for (double d : {0.05, 0.1, 0.5, 1.0}) {
            const double current = discounted_clv(series, d);
            CHECK(current <= previous + 1e-12);
            previous = current;
        }
    }
}
