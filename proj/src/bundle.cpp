#include "clv/bundle.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "clv/rng.hpp"
#include "clv/text.hpp"

namespace clv {

nlohmann::json ModelBundle::to_json() const {
    return {{"baseline", baseline.to_json()},
            {"format_version", kFormatVersion},
            {"metadata",
             {{"base_year", base_year},
              {"config_hash", config_hash},
              {"seed", seed},
              {"year_range", {year_min, year_max}}}},
            {"progression_rules", progression.to_json()},
            {"schema", schema.to_json()},
            {"schema_hash", hex64(schema.hash())},
            {"segmentation", segmentation.to_json()},
            {"transition_full", transition_full.to_json()},
            {"transition_simple", transition_simple.to_json()},
            {"value_full", value_full.to_json()},
            {"value_simple", value_simple.to_json()}};
}

ModelBundle ModelBundle::from_json(const nlohmann::json& j) {
    static const std::vector<std::string> keys = {
        "baseline",        "format_version",    "metadata",   "progression_rules",
        "schema",          "schema_hash",       "segmentation", "transition_full",
        "transition_simple", "value_full",      "value_simple"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const auto& k : keys) known = known || k == key;
        if (!known) throw VersionError("unexpected field in bundle: " + key);
    }
    if (!j.contains("format_version") ||
        j.at("format_version").get<int>() != kFormatVersion)
        throw VersionError("unsupported bundle format version");

    ModelBundle bundle;
    bundle.schema = FeatureSchema::from_json(j.at("schema"));
    if (j.at("schema_hash").get<std::string>() != hex64(bundle.schema.hash()))
        throw VersionError("bundle schema hash mismatch");
    bundle.segmentation = SegmentationModel::from_json(j.at("segmentation"));
    bundle.transition_full = TransitionModel::from_json(j.at("transition_full"));
    bundle.transition_simple = TransitionModel::from_json(j.at("transition_simple"));
    bundle.value_full = ValueAssignerModel::from_json(j.at("value_full"));
    bundle.value_simple = ValueAssignerModel::from_json(j.at("value_simple"));
    bundle.baseline = MarkovBaseline::from_json(j.at("baseline"));
    bundle.progression = ProgressionRules::from_json(j.at("progression_rules"));

    const auto& meta = j.at("metadata");
    bundle.base_year = meta.at("base_year").get<int>();
    bundle.config_hash = meta.at("config_hash").get<std::string>();
    bundle.seed = meta.at("seed").get<uint64_t>();
    bundle.year_min = meta.at("year_range").at(0).get<int>();
    bundle.year_max = meta.at("year_range").at(1).get<int>();
    return bundle;
}

std::string serialize_bundle(const ModelBundle& bundle) {
    return bundle.to_json().dump();
}

ModelBundle deserialize_bundle(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw VersionError(std::string("bundle is not valid JSON: ") + e.what());
    }
    return ModelBundle::from_json(j);
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << serialize_bundle(bundle) << "\n";
}

ModelBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for reading: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return deserialize_bundle(buffer.str());
}

} // namespace clv
