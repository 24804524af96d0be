#include "clv/feature_space.hpp"

#include <nlohmann/json.hpp>

#include "clv/rng.hpp"

namespace clv {

const char* feature_kind_name(FeatureKind k) {
    switch (k) {
        case FeatureKind::static_: return "static";
        case FeatureKind::yearly_progressing: return "yearly_progressing";
        case FeatureKind::monthly_progressing: return "monthly_progressing";
        case FeatureKind::dynamic: return "dynamic";
    }
    throw SchemaError("unknown feature kind");
}

FeatureKind feature_kind_from_name(const std::string& name) {
    if (name == "static") return FeatureKind::static_;
    if (name == "yearly_progressing") return FeatureKind::yearly_progressing;
    if (name == "monthly_progressing") return FeatureKind::monthly_progressing;
    if (name == "dynamic") return FeatureKind::dynamic;
    throw SchemaError("unknown feature kind: " + name);
}

int FeatureSchema::index_of(const std::string& name) const {
    for (size_t i = 0; i < features.size(); ++i)
        if (features[i].name == name) return static_cast<int>(i);
    return -1;
}

int FeatureSchema::require(const std::string& name) const {
    int idx = index_of(name);
    if (idx < 0) throw SchemaError("feature not in schema: " + name);
    return idx;
}

std::vector<std::string> FeatureSchema::names() const {
    std::vector<std::string> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(f.name);
    return out;
}

std::vector<std::string> FeatureSchema::progressible_names() const {
    std::vector<std::string> out;
    for (const auto& f : features)
        if (f.kind != FeatureKind::dynamic) out.push_back(f.name);
    return out;
}

FeatureKind FeatureSchema::kind_of(const std::string& name) const {
    return features[static_cast<size_t>(require(name))].kind;
}

nlohmann::json FeatureSchema::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : features)
        arr.push_back({{"kind", feature_kind_name(f.kind)}, {"name", f.name}});
    return {{"features", arr}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
    FeatureSchema schema;
    if (!j.contains("features") || !j.at("features").is_array())
        throw SchemaError("schema JSON must contain a 'features' array");
    for (const auto& item : j.at("features")) {
        Feature f;
        f.name = item.at("name").get<std::string>();
        f.kind = feature_kind_from_name(item.at("kind").get<std::string>());
        if (schema.has(f.name)) throw SchemaError("duplicate feature name: " + f.name);
        schema.features.push_back(std::move(f));
    }
    return schema;
}

uint64_t FeatureSchema::hash() const {
    return fnv1a64(to_json().dump());
}

std::vector<int> column_indices(const std::vector<std::string>& space,
                                const std::vector<std::string>& names) {
    std::vector<int> out;
    out.reserve(names.size());
    for (const auto& n : names) {
        int idx = -1;
        for (size_t i = 0; i < space.size(); ++i)
            if (space[i] == n) { idx = static_cast<int>(i); break; }
        if (idx < 0) throw SchemaError("feature not in space: " + n);
        out.push_back(idx);
    }
    return out;
}

} // namespace clv
