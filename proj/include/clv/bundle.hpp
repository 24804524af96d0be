#pragma once
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "clv/predictors.hpp"
#include "clv/segmentation.hpp"
#include "clv/simulator.hpp"

namespace clv {

/// Everything the pipeline trains, as one versioned persistable unit. All
/// components reference the same feature schema; the stored schema hash makes
/// tampering and cross-schema mixups loud.
struct ModelBundle {
    static constexpr int kFormatVersion = 1;

    FeatureSchema schema;
    SegmentationModel segmentation;
    TransitionModel transition_full;
    TransitionModel transition_simple;
    ValueAssignerModel value_full;
    ValueAssignerModel value_simple;
    MarkovBaseline baseline;
    ProgressionRules progression;

    // training metadata
    uint64_t seed = 0;
    std::string config_hash;
    int year_min = 0;
    int year_max = 0;
    int base_year = 0;

    int n_segments() const { return segmentation.n_segments; }

    nlohmann::json to_json() const;
    static ModelBundle from_json(const nlohmann::json& j);
};

/// Canonical serialized form (sorted keys, lossless doubles); writing the
/// same bundle twice yields identical bytes.
std::string serialize_bundle(const ModelBundle& bundle);
/// Strict reader: unknown fields, version mismatches and schema-hash
/// mismatches all throw VersionError.
ModelBundle deserialize_bundle(const std::string& text);

void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

} // namespace clv
