#include "clv/value.hpp"

namespace clv {

const char* product_name(ProductKind p) {
    switch (p) {
        case ProductKind::current_account: return "current_account";
        case ProductKind::savings: return "savings";
        case ProductKind::loan: return "loan";
        case ProductKind::credit_card: return "credit_card";
        case ProductKind::mortgage: return "mortgage";
        case ProductKind::investment: return "investment";
    }
    throw InvalidValue("unknown product kind");
}

ProductKind product_from_name(const std::string& name) {
    for (int i = 0; i < kProductCount; ++i) {
        auto p = static_cast<ProductKind>(i);
        if (name == product_name(p)) return p;
    }
    throw InvalidValue("unknown product name: " + name);
}

double product_value(const ValueComponents& c) {
    if (!std::isfinite(c.revenue) || !std::isfinite(c.expected_loss) ||
        !std::isfinite(c.cost_of_capital) || !std::isfinite(c.collections_recoveries))
        throw InvalidValue("non-finite value component");
    return c.revenue - (c.expected_loss + c.cost_of_capital + c.collections_recoveries);
}

double customer_value(std::span<const ProductHolding> holdings) {
    double total = 0.0;
    for (const auto& h : holdings) total += product_value(h.components);
    return total;
}

double discounted_clv(std::span<const double> cv_series, double discount_rate) {
    if (!(discount_rate > -1.0))
        throw InvalidDiscount("discount rate must be > -1");
    double total = 0.0;
    double denom = 1.0;
    for (double cv : cv_series) {
        denom *= 1.0 + discount_rate;
        total += cv / denom;
    }
    return total;
}

} // namespace clv
