#pragma once
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "clv/errors.hpp"

namespace clv {

/// Feature kinds drive two things: which features the simple (multi-period)
/// models may use, and how features advance between simulated years.
enum class FeatureKind {
    static_,              // constant per customer (e.g. region code)
    yearly_progressing,   // +1 per simulated year (e.g. age in years)
    monthly_progressing,  // +12 per simulated year (tenures in months)
    dynamic,              // observable now, not forward-simulatable
};

const char* feature_kind_name(FeatureKind k);
FeatureKind feature_kind_from_name(const std::string& name);

inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return v != v; }

struct FeatureSchema {
    struct Feature {
        std::string name;
        FeatureKind kind = FeatureKind::dynamic;
    };

    std::vector<Feature> features;

    int size() const { return static_cast<int>(features.size()); }
    /// -1 when absent.
    int index_of(const std::string& name) const;
    bool has(const std::string& name) const { return index_of(name) >= 0; }
    /// Throws SchemaError when absent.
    int require(const std::string& name) const;

    std::vector<std::string> names() const;
    /// static + yearly_progressing + monthly_progressing, in schema order.
    std::vector<std::string> progressible_names() const;
    FeatureKind kind_of(const std::string& name) const;

    nlohmann::json to_json() const;
    static FeatureSchema from_json(const nlohmann::json& j);
    /// Hash of the canonical JSON form; bundles use it to detect mismatched
    /// or tampered schemas.
    uint64_t hash() const;
};

/// Positions of `names` inside `space` (each must exist).
std::vector<int> column_indices(const std::vector<std::string>& space,
                                const std::vector<std::string>& names);

} // namespace clv
