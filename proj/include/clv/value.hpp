#pragma once
#include <cmath>
#include <span>
#include <string>

#include "clv/errors.hpp"

namespace clv {

/// Per-product annual value decomposition. Revenue may take any sign; the
/// three cost components are nonnegative.
struct ValueComponents {
    double revenue = 0.0;
    double expected_loss = 0.0;
    double cost_of_capital = 0.0;
    double collections_recoveries = 0.0;
};

enum class ProductKind {
    current_account,
    savings,
    loan,
    credit_card,
    mortgage,
    investment,
};

inline constexpr int kProductCount = 6;

const char* product_name(ProductKind p);
ProductKind product_from_name(const std::string& name);

struct ProductHolding {
    ProductKind kind = ProductKind::current_account;
    double balance = 0.0;
    int tenure_months = 0;
    ValueComponents components;
};

/// revenue minus the cost decomposition (expected loss, cost of capital,
/// collections & recoveries).
double product_value(const ValueComponents& c);

/// Sum of product values over a customer's holdings; empty -> 0.
double customer_value(std::span<const ProductHolding> holdings);

/// Sum_{t=1..T} cv[t] / (1+d)^t, where cv is indexed from t=1.
double discounted_clv(std::span<const double> cv_series, double discount_rate);

} // namespace clv
