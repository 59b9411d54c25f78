#pragma once

// Resolved-configuration helpers shared by the dataset writer and the CLI.

#include "procinv/bytes.hpp"

#include <json.hpp>

#include <fstream>

namespace procinv {

/// Stable hash of a JSON configuration (keys are sorted by the serializer).
inline std::string config_hash(const nlohmann::json &config) { return hex64(fnv1a64(config.dump())); }

/// RFC 7386 merge: values in `overrides` replace those in `base`, null deletes.
inline nlohmann::json merge_config(nlohmann::json base, const nlohmann::json &overrides) {
    base.merge_patch(overrides);
    return base;
}

inline nlohmann::json load_json_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError(path + ": " + e.what());
    }
}

} // namespace procinv
