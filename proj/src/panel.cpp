#include "clv/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "clv/text.hpp"

namespace clv {

int PanelDataset::year_min() const {
    int y = 0;
    bool first = true;
    for (const auto& r : records) {
        if (first || r.year_index < y) y = r.year_index;
        first = false;
    }
    return first ? 0 : y;
}

int PanelDataset::year_max() const {
    int y = -1;
    for (const auto& r : records) y = std::max(y, r.year_index);
    return y;
}

std::vector<std::string> PanelDataset::customer_ids() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& r : records)
        if (seen.insert(r.customer_id).second) out.push_back(r.customer_id);
    return out;
}

void PanelDataset::validate() const {
    std::set<std::pair<std::string, int>> keys;
    std::map<std::string, int> churn_year;
    for (const auto& r : records) {
        if (!keys.insert({r.customer_id, r.year_index}).second)
            throw DataError("duplicate (customer, year): " + r.customer_id + "/" +
                            std::to_string(r.year_index));
        if (r.features.size() != schema.size())
            throw DataError("feature vector size mismatch for " + r.customer_id);
        if (r.churned) {
            if (!r.holdings.empty() || r.cv != 0.0)
                throw DataError("churn row must have no holdings and cv=0: " + r.customer_id);
            churn_year.insert({r.customer_id, r.year_index});
        }
        const double recomputed = customer_value(r.holdings);
        if (std::abs(recomputed - r.cv) > 1e-9)
            throw DataError("cv inconsistent with holdings for " + r.customer_id + "/" +
                            std::to_string(r.year_index));
    }
    for (const auto& r : records) {
        auto it = churn_year.find(r.customer_id);
        if (it != churn_year.end() && r.year_index > it->second)
            throw DataError("record after churn year for " + r.customer_id);
    }
}

std::vector<std::string> panel_csv_header(const FeatureSchema& schema) {
    std::vector<std::string> header = {"customer_id", "year_index", "churned"};
    for (const auto& f : schema.features) header.push_back(f.name);
    for (int p = 0; p < kProductCount; ++p) {
        const std::string base = product_name(static_cast<ProductKind>(p));
        header.push_back(base + "_R");
        header.push_back(base + "_EL");
        header.push_back(base + "_CC");
        header.push_back(base + "_CR");
    }
    header.push_back("cv");
    return header;
}

void PanelDataset::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << join(panel_csv_header(schema), ",") << "\n";
    for (const auto& r : records) {
        out << r.customer_id << ',' << r.year_index << ',' << (r.churned ? 1 : 0);
        for (int i = 0; i < r.features.size(); ++i) {
            out << ',';
            if (!is_missing(r.features[i])) out << format_double(r.features[i]);
        }
        for (int p = 0; p < kProductCount; ++p) {
            const auto kind = static_cast<ProductKind>(p);
            const ProductHolding* holding = nullptr;
            for (const auto& h : r.holdings)
                if (h.kind == kind) { holding = &h; break; }
            const ValueComponents c = holding ? holding->components : ValueComponents{};
            out << ',' << format_double(c.revenue) << ',' << format_double(c.expected_loss)
                << ',' << format_double(c.cost_of_capital) << ','
                << format_double(c.collections_recoveries);
        }
        out << ',' << format_double(r.cv) << "\n";
    }
}

PanelDataset PanelDataset::read_csv(const std::string& path, const FeatureSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for reading: " + path);

    PanelDataset panel;
    panel.schema = schema;

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty panel file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto expected = panel_csv_header(schema);
    const auto header = split_line(line);
    if (header != expected)
        throw SchemaError("panel header does not match schema: " + path);

    const int n_features = schema.size();
    std::vector<int> held_idx(kProductCount, -1), balance_idx(kProductCount, -1),
        tenure_idx(kProductCount, -1);
    for (int p = 0; p < kProductCount; ++p) {
        const std::string base = product_name(static_cast<ProductKind>(p));
        held_idx[p] = schema.index_of(base + "_held");
        balance_idx[p] = schema.index_of(base + "_balance");
        tenure_idx[p] = schema.index_of(base + "_tenure_months");
    }

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != expected.size())
            throw DataError("wrong field count in panel row: " + path);

        CustomerYearRecord r;
        size_t col = 0;
        r.customer_id = fields[col++];
        r.year_index = static_cast<int>(parse_long(fields[col++]));
        r.churned = parse_long(fields[col++]) != 0;
        r.features.resize(n_features);
        for (int i = 0; i < n_features; ++i) r.features[i] = parse_double(fields[col++]);
        for (int p = 0; p < kProductCount; ++p) {
            ValueComponents c;
            c.revenue = parse_double(fields[col++]);
            c.expected_loss = parse_double(fields[col++]);
            c.cost_of_capital = parse_double(fields[col++]);
            c.collections_recoveries = parse_double(fields[col++]);
            const bool held = held_idx[p] >= 0 && r.features[held_idx[p]] == 1.0;
            if (held) {
                ProductHolding h;
                h.kind = static_cast<ProductKind>(p);
                h.balance = balance_idx[p] >= 0 ? r.features[balance_idx[p]] : 0.0;
                h.tenure_months =
                    tenure_idx[p] >= 0 ? static_cast<int>(r.features[tenure_idx[p]]) : 0;
                h.components = c;
                r.holdings.push_back(h);
            } else if (c.revenue != 0.0 || c.expected_loss != 0.0 || c.cost_of_capital != 0.0 ||
                       c.collections_recoveries != 0.0) {
                throw DataError("value components present without held flag: " + r.customer_id);
            }
        }
        r.cv = parse_double(fields[col++]);
        panel.records.push_back(std::move(r));
    }
    return panel;
}

PanelIndex::PanelIndex(const PanelDataset& panel) {
    for (size_t i = 0; i < panel.records.size(); ++i) {
        const auto& r = panel.records[i];
        by_key_[{r.customer_id, r.year_index}] = static_cast<int>(i);
        by_customer_[r.customer_id].push_back(static_cast<int>(i));
    }
}

int PanelIndex::row_of(const std::string& customer_id, int year) const {
    auto it = by_key_.find({customer_id, year});
    return it == by_key_.end() ? -1 : it->second;
}

const std::vector<int>& PanelIndex::rows_of(const std::string& customer_id) const {
    auto it = by_customer_.find(customer_id);
    return it == by_customer_.end() ? empty_ : it->second;
}

bool PanelIndex::has_customer(const std::string& customer_id) const {
    return by_customer_.count(customer_id) > 0;
}

} // namespace clv
