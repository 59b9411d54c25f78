#pragma once

// JSON text form of BuildingAbstraction (field names as in the value types).

#include "procinv/schema.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace procinv {

inline void to_json(nlohmann::json &j, const Vec2 &v) { j = nlohmann::json{{"x", v.x}, {"y", v.y}}; }
inline void from_json(const nlohmann::json &j, Vec2 &v) {
    j.at("x").get_to(v.x);
    j.at("y").get_to(v.y);
}

inline void to_json(nlohmann::json &j, const Hsv &c) { j = nlohmann::json{{"h", c.h}, {"s", c.s}, {"v", c.v}}; }
inline void from_json(const nlohmann::json &j, Hsv &c) {
    j.at("h").get_to(c.h);
    j.at("s").get_to(c.s);
    j.at("v").get_to(c.v);
}

inline void to_json(nlohmann::json &j, const Footprint &f) { j = nlohmann::json{{"vertices", f.vertices}}; }
inline void from_json(const nlohmann::json &j, Footprint &f) { j.at("vertices").get_to(f.vertices); }

inline void to_json(nlohmann::json &j, const CellModifier &m) {
    j = nlohmann::json{{"scale_x", m.scale_x},
                       {"scale_y", m.scale_y},
                       {"quaternion_3", m.quaternion_3},
                       {"quaternion_4", m.quaternion_4}};
}
inline void from_json(const nlohmann::json &j, CellModifier &m) {
    j.at("scale_x").get_to(m.scale_x);
    j.at("scale_y").get_to(m.scale_y);
    j.at("quaternion_3").get_to(m.quaternion_3);
    j.at("quaternion_4").get_to(m.quaternion_4);
}

inline void to_json(nlohmann::json &j, const Cell &c) {
    j = nlohmann::json{{"cell_type", c.cell_type}, {"offset", c.offset}};
    j["modifier"] = c.modifier ? nlohmann::json(*c.modifier) : nlohmann::json(nullptr);
}
inline void from_json(const nlohmann::json &j, Cell &c) {
    j.at("cell_type").get_to(c.cell_type);
    j.at("offset").get_to(c.offset);
    c.modifier.reset();
    if (j.contains("modifier") && !j.at("modifier").is_null()) {
        c.modifier = j.at("modifier").get<CellModifier>();
    }
}

inline void to_json(nlohmann::json &j, const CellsPattern &p) {
    j = nlohmann::json{{"segment_range",
                        {{"first_segment", p.segment_range.first_segment},
                         {"last_segment", p.segment_range.last_segment}}},
                       {"cells", p.cells}};
}
inline void from_json(const nlohmann::json &j, CellsPattern &p) {
    j.at("segment_range").at("first_segment").get_to(p.segment_range.first_segment);
    j.at("segment_range").at("last_segment").get_to(p.segment_range.last_segment);
    j.at("cells").get_to(p.cells);
}

inline void to_json(nlohmann::json &j, const Facade &f) {
    j = nlohmann::json{{"footprint_index", f.footprint_index}, {"cells_patterns", f.cells_patterns}};
}
inline void from_json(const nlohmann::json &j, Facade &f) {
    j.at("footprint_index").get_to(f.footprint_index);
    j.at("cells_patterns").get_to(f.cells_patterns);
}

inline void to_json(nlohmann::json &j, const Storey &s) {
    j = nlohmann::json{{"elevation", s.elevation}, {"facade_index", s.facade_index}};
}
inline void from_json(const nlohmann::json &j, Storey &s) {
    j.at("elevation").get_to(s.elevation);
    j.at("facade_index").get_to(s.facade_index);
}

inline void to_json(nlohmann::json &j, const MaterialVariation &m) {
    j = nlohmann::json{{"cell_type", m.cell_type}, {"material_slot", m.material_slot}, {"color", m.color}};
}
inline void from_json(const nlohmann::json &j, MaterialVariation &m) {
    j.at("cell_type").get_to(m.cell_type);
    j.at("material_slot").get_to(m.material_slot);
    j.at("color").get_to(m.color);
}

inline void to_json(nlohmann::json &j, const BuildingAbstraction &b) {
    j = nlohmann::json{{"height", b.height},
                       {"footprints", b.footprints},
                       {"facades", b.facades},
                       {"storeys", b.storeys},
                       {"material_variations", b.material_variations},
                       {"noise_level", b.noise_level}};
}
inline void from_json(const nlohmann::json &j, BuildingAbstraction &b) {
    j.at("height").get_to(b.height);
    j.at("footprints").get_to(b.footprints);
    j.at("facades").get_to(b.facades);
    j.at("storeys").get_to(b.storeys);
    j.at("material_variations").get_to(b.material_variations);
    j.at("noise_level").get_to(b.noise_level);
}

/// Field order follows the type definition.
inline std::string building_to_json_text(const BuildingAbstraction &b, int indent = 2) {
    nlohmann::ordered_json j;
    j["height"] = b.height;
    j["footprints"] = nlohmann::json(b.footprints);
    j["facades"] = nlohmann::json(b.facades);
    j["storeys"] = nlohmann::json(b.storeys);
    j["material_variations"] = nlohmann::json(b.material_variations);
    j["noise_level"] = b.noise_level;
    return j.dump(indent);
}

inline BuildingAbstraction building_from_json_text(const std::string &text) {
    try {
        return nlohmann::json::parse(text).get<BuildingAbstraction>();
    } catch (const nlohmann::json::exception &e) {
        throw IoError(std::string("malformed building JSON: ") + e.what());
    }
}

inline BuildingAbstraction load_building_json(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return building_from_json_text(ss.str());
}

inline void save_building_json(const BuildingAbstraction &b, const std::string &path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << building_to_json_text(b) << "\n";
}

} // namespace procinv
