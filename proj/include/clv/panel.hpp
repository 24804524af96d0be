#pragma once
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "clv/feature_space.hpp"
#include "clv/value.hpp"

namespace clv {

/// One (customer, year) observation. `features` is aligned with the owning
/// dataset's schema. A churn-year record carries churned=true, no holdings
/// and cv=0; the customer emits no rows after it.
struct CustomerYearRecord {
    std::string customer_id;
    int year_index = 0;
    bool churned = false;
    Eigen::VectorXd features;
    std::vector<ProductHolding> holdings;
    double cv = 0.0;
};

struct PanelDataset {
    FeatureSchema schema;
    std::vector<CustomerYearRecord> records;

    int year_min() const;
    int year_max() const;

    /// Distinct customer ids in order of first appearance.
    std::vector<std::string> customer_ids() const;

    /// Checks the dataset invariants: (customer, year) uniqueness, churn rows
    /// empty with cv=0, no rows after churn, cv consistent with holdings to
    /// 1e-9, feature vectors sized to the schema. Throws DataError.
    void validate() const;

    void write_csv(const std::string& path) const;
    static PanelDataset read_csv(const std::string& path, const FeatureSchema& schema);
};

/// Row lookup by (customer, year), plus per-customer year lists in row order.
class PanelIndex {
public:
    explicit PanelIndex(const PanelDataset& panel);

    /// -1 when the (customer, year) pair is absent.
    int row_of(const std::string& customer_id, int year) const;
    const std::vector<int>& rows_of(const std::string& customer_id) const;
    bool has_customer(const std::string& customer_id) const;

private:
    std::map<std::pair<std::string, int>, int> by_key_;
    std::map<std::string, std::vector<int>> by_customer_;
    std::vector<int> empty_;
};

/// Header the CSV format mandates for a given schema, in order:
/// customer_id, year_index, churned, schema features (which include the
/// per-product held/balance/tenure features), per-product R/EL/CC/CR, cv.
std::vector<std::string> panel_csv_header(const FeatureSchema& schema);

} // namespace clv
