#pragma once

// Bijective token codec for BuildingAbstraction and the building grammar.
//
// Traversal order: noise_level, height, footprints{vertices{x, y}},
// facades{footprint_index, cells_patterns{first_segment, last_segment,
// cells{cell_type, offset, modifier?{scale_x, scale_y, quaternion_3,
// quaternion_4}}}}, storeys{elevation, facade_index},
// material_variations{cell_type, material_slot, h, s, v}.
// Storey elevation is coded as a fraction of the building height.

#include "procinv/bytes.hpp"
#include "procinv/grammar.hpp"
#include "procinv/schema.hpp"
#include "procinv/vocabulary.hpp"

#include <json.hpp>

#include <istream>
#include <memory>
#include <ostream>

namespace procinv {

using TokenSequence = std::vector<TokenId>;

inline constexpr std::uint32_t kDefaultPointerCardinality = 64;
inline constexpr std::size_t kMaxSequenceLength = 2048;

namespace codec {

enum GroupIndex : std::size_t {
    noise_level_group = 0,
    absolute_group,
    relative_group,
    scale_rotation_group,
    asset_group,
    pointer_group,
};

enum MessageIndex : std::size_t {
    building_msg = 0,
    footprint_msg,
    vertex_msg,
    facade_msg,
    pattern_msg,
    cell_msg,
    modifier_msg,
    storey_msg,
    variation_msg,
};

enum Tag : int {
    noise_level_tag = 1,
    height_tag,
    footprints_tag,
    vertices_tag,
    x_tag,
    y_tag,
    facades_tag,
    footprint_index_tag,
    cells_patterns_tag,
    first_segment_tag,
    last_segment_tag,
    cells_tag,
    cell_type_tag,
    offset_tag,
    modifier_tag,
    scale_x_tag,
    scale_y_tag,
    quaternion_3_tag,
    quaternion_4_tag,
    storeys_tag,
    elevation_tag,
    facade_index_tag,
    material_variations_tag,
    variation_cell_type_tag,
    material_slot_tag,
    hue_tag,
    saturation_tag,
    value_tag,
};

inline constexpr std::uint32_t kMinFootprints = 1;
inline constexpr std::uint32_t kMinVertices = 3;
inline constexpr std::uint32_t kMinFacades = 1;
inline constexpr std::uint32_t kMinPatterns = 1;
inline constexpr std::uint32_t kMinCells = 1;
inline constexpr std::uint32_t kMinStoreys = 1;
inline constexpr std::uint32_t kMinVariations = 0;

inline std::vector<TokenGroup> building_groups(std::uint32_t catalog_size, std::uint32_t pointer_cardinality) {
    return {
        TokenGroup::continuous("noise_level", 0.0, 1.0, 0.01),
        TokenGroup::continuous("absolute_coord", -100.0, 100.0, 0.1),
        TokenGroup::continuous("relative_coord", 0.0, 1.0, 0.005),
        TokenGroup::continuous("scale_rotation", -5.0, 5.0, 0.01),
        TokenGroup::discrete("asset_index", catalog_size),
        TokenGroup::discrete("pointer_index", pointer_cardinality),
    };
}

inline grammar::Schema building_schema(std::uint32_t pointer_cardinality) {
    using grammar::FieldSpec;
    using grammar::Label;
    using grammar::MessageType;
    using grammar::ScalarType;
    auto scalar = [](std::string name, int tag, std::size_t group) {
        return FieldSpec{std::move(name), tag, Label::required, ScalarType{group}};
    };
    auto repeated = [](std::string name, int tag, std::size_t message, std::uint32_t min_items,
                       std::uint32_t max_items = std::numeric_limits<std::uint32_t>::max()) {
        return FieldSpec{std::move(name), tag, Label::repeated, MessageType{message}, min_items, max_items};
    };
    grammar::Schema s;
    s.messages.resize(9);
    s.messages[building_msg] = {"BuildingAbstraction",
                                {scalar("noise_level", noise_level_tag, noise_level_group),
                                 scalar("height", height_tag, absolute_group),
                                 repeated("footprints", footprints_tag, footprint_msg, kMinFootprints, pointer_cardinality),
                                 repeated("facades", facades_tag, facade_msg, kMinFacades, pointer_cardinality),
                                 repeated("storeys", storeys_tag, storey_msg, kMinStoreys),
                                 repeated("material_variations", material_variations_tag, variation_msg, kMinVariations)}};
    s.messages[footprint_msg] = {"Footprint",
                                 {repeated("vertices", vertices_tag, vertex_msg, kMinVertices, pointer_cardinality)}};
    s.messages[vertex_msg] = {"Vertex", {scalar("x", x_tag, absolute_group), scalar("y", y_tag, absolute_group)}};
    s.messages[facade_msg] = {"Facade",
                              {scalar("footprint_index", footprint_index_tag, pointer_group),
                               repeated("cells_patterns", cells_patterns_tag, pattern_msg, kMinPatterns)}};
    s.messages[pattern_msg] = {"CellsPattern",
                               {scalar("first_segment", first_segment_tag, pointer_group),
                                scalar("last_segment", last_segment_tag, pointer_group),
                                repeated("cells", cells_tag, cell_msg, kMinCells)}};
    s.messages[cell_msg] = {"Cell",
                            {scalar("cell_type", cell_type_tag, asset_group),
                             scalar("offset", offset_tag, relative_group),
                             FieldSpec{"modifier", modifier_tag, Label::optional, MessageType{modifier_msg}}}};
    s.messages[modifier_msg] = {"CellModifier",
                                {scalar("scale_x", scale_x_tag, scale_rotation_group),
                                 scalar("scale_y", scale_y_tag, scale_rotation_group),
                                 scalar("quaternion_3", quaternion_3_tag, scale_rotation_group),
                                 scalar("quaternion_4", quaternion_4_tag, scale_rotation_group)}};
    s.messages[storey_msg] = {"Storey",
                              {scalar("elevation", elevation_tag, relative_group),
                               scalar("facade_index", facade_index_tag, pointer_group)}};
    s.messages[variation_msg] = {"MaterialVariation",
                                 {scalar("cell_type", variation_cell_type_tag, asset_group),
                                  scalar("material_slot", material_slot_tag, pointer_group),
                                  scalar("h", hue_tag, relative_group),
                                  scalar("s", saturation_tag, relative_group),
                                  scalar("v", value_tag, relative_group)}};
    return s;
}

struct BuildingLimits {
    std::vector<std::uint32_t> material_counts;
    std::uint32_t pointer_cardinality = kDefaultPointerCardinality;
    std::uint32_t min_positive_height = 0; // first absolute_coord index with value > 0
    std::uint32_t zero_rotation = 0;       // scale_rotation index of 0.0
};

/// Value-dependent restrictions of the building language: references stay in
/// range and lists appear in canonical order.
class BuildingConstraints {
public:
    BuildingConstraints() = default;
    explicit BuildingConstraints(std::shared_ptr<const BuildingLimits> limits) : m_limits(std::move(limits)) {}

    grammar::Allowed scalar_allowed(const grammar::Cursor &c, std::uint32_t cardinality) const {
        const std::uint32_t top = cardinality - 1;
        switch (c.tag()) {
        case height_tag:
            return {m_limits->min_positive_height, top, {}};
        case footprint_index_tag:
            return {0, static_cast<std::uint32_t>(m_vertex_counts.size()) - 1, {}};
        case first_segment_tag:
            return {m_next_free_segment, m_segments - 1, {}};
        case last_segment_tag:
            return {m_pattern_first, m_segments - 1, {}};
        case offset_tag:
            return {m_previous_offset, top, {}};
        case quaternion_4_tag:
            if (m_quaternion_3 == m_limits->zero_rotation) {
                return {0, top, m_limits->zero_rotation};
            }
            return {0, top, {}};
        case elevation_tag:
            return {m_previous_elevation, top, {}};
        case facade_index_tag:
            return {0, m_facade_count - 1, {}};
        case variation_cell_type_tag:
            return {variation_type_floor(), top, {}};
        case material_slot_tag: {
            const std::uint32_t materials = m_limits->material_counts.at(m_variation_type);
            const std::uint32_t lo =
                (m_has_variation && m_variation_type == m_previous_type) ? m_previous_slot + 1 : 0;
            return {lo, materials - 1, {}};
        }
        default:
            return {0, top, {}};
        }
    }

    bool may_continue(const grammar::Cursor &c) const {
        switch (c.tag()) {
        case cells_patterns_tag:
            return m_next_free_segment < m_segments;
        case material_variations_tag:
            return variation_type_floor() < m_limits->material_counts.size();
        default:
            return true;
        }
    }

    void on_item(const grammar::Cursor &c) {
        switch (c.tag()) {
        case footprints_tag:
            m_vertex_counts.push_back(0);
            break;
        case vertices_tag:
            ++m_vertex_counts.back();
            break;
        case facades_tag:
            ++m_facade_count;
            break;
        case cells_patterns_tag:
            m_previous_offset = 0;
            break;
        default:
            break;
        }
    }

    void on_scalar(const grammar::Cursor &c, std::uint32_t local) {
        switch (c.tag()) {
        case footprint_index_tag:
            m_segments = m_vertex_counts.at(local);
            m_next_free_segment = 0;
            break;
        case first_segment_tag:
            m_pattern_first = local;
            break;
        case last_segment_tag:
            m_next_free_segment = local + 1;
            break;
        case offset_tag:
            m_previous_offset = local;
            break;
        case quaternion_3_tag:
            m_quaternion_3 = local;
            break;
        case elevation_tag:
            m_previous_elevation = local;
            break;
        case variation_cell_type_tag:
            m_variation_type = local;
            break;
        case material_slot_tag:
            m_has_variation = true;
            m_previous_type = m_variation_type;
            m_previous_slot = local;
            break;
        default:
            break;
        }
    }

    void on_present(const grammar::Cursor &, bool) {}
    void on_select(const grammar::Cursor &, std::uint32_t) {}
    void on_end(const grammar::Cursor &) {}

    friend bool operator==(const BuildingConstraints &, const BuildingConstraints &) = default;

private:
    // Smallest asset index that still admits a (cell_type, slot) pair after the previous one.
    std::uint32_t variation_type_floor() const {
        if (!m_has_variation) {
            return 0;
        }
        return m_previous_slot + 1 < m_limits->material_counts.at(m_previous_type) ? m_previous_type
                                                                                    : m_previous_type + 1;
    }

    std::shared_ptr<const BuildingLimits> m_limits;
    std::vector<std::uint32_t> m_vertex_counts;
    std::uint32_t m_facade_count = 0;
    std::uint32_t m_segments = 0;
    std::uint32_t m_next_free_segment = 0;
    std::uint32_t m_pattern_first = 0;
    std::uint32_t m_previous_offset = 0;
    std::uint32_t m_quaternion_3 = 0;
    std::uint32_t m_previous_elevation = 0;
    std::uint32_t m_variation_type = 0;
    bool m_has_variation = false;
    std::uint32_t m_previous_type = 0;
    std::uint32_t m_previous_slot = 0;
};

using BuildingGrammar = grammar::Grammar<BuildingConstraints>;
using GrammarState = BuildingGrammar::State;

/// Rebuilds a BuildingAbstraction from automaton events.
class BuildingBuilder {
public:
    explicit BuildingBuilder(const Vocabulary &vocab) : m_vocab(&vocab) {}

    void on_item(const grammar::Cursor &c) {
        switch (c.tag()) {
        case footprints_tag:
            m_b.footprints.emplace_back();
            break;
        case vertices_tag:
            m_b.footprints.back().vertices.emplace_back();
            break;
        case facades_tag:
            m_b.facades.emplace_back();
            break;
        case cells_patterns_tag:
            m_b.facades.back().cells_patterns.emplace_back();
            break;
        case cells_tag:
            m_b.facades.back().cells_patterns.back().cells.emplace_back();
            break;
        case storeys_tag:
            m_b.storeys.emplace_back();
            break;
        case material_variations_tag:
            m_b.material_variations.emplace_back();
            break;
        default:
            break;
        }
    }

    void on_present(const grammar::Cursor &c, bool present) {
        if (c.tag() == modifier_tag && present) {
            cell().modifier.emplace();
        }
    }

    void on_scalar(const grammar::Cursor &c, std::uint32_t local) {
        auto value = [&](std::size_t group) { return dequantize_local(local, m_vocab->group(group)); };
        switch (c.tag()) {
        case noise_level_tag:
            m_b.noise_level = value(noise_level_group);
            break;
        case height_tag:
            m_b.height = value(absolute_group);
            break;
        case x_tag:
            m_b.footprints.back().vertices.back().x = value(absolute_group);
            break;
        case y_tag:
            m_b.footprints.back().vertices.back().y = value(absolute_group);
            break;
        case footprint_index_tag:
            m_b.facades.back().footprint_index = local;
            break;
        case first_segment_tag:
            m_b.facades.back().cells_patterns.back().segment_range.first_segment = local;
            break;
        case last_segment_tag:
            m_b.facades.back().cells_patterns.back().segment_range.last_segment = local;
            break;
        case cell_type_tag:
            cell().cell_type = local;
            break;
        case offset_tag:
            cell().offset = value(relative_group);
            break;
        case scale_x_tag:
            cell().modifier->scale_x = value(scale_rotation_group);
            break;
        case scale_y_tag:
            cell().modifier->scale_y = value(scale_rotation_group);
            break;
        case quaternion_3_tag:
            cell().modifier->quaternion_3 = value(scale_rotation_group);
            break;
        case quaternion_4_tag:
            cell().modifier->quaternion_4 = value(scale_rotation_group);
            break;
        case elevation_tag:
            m_b.storeys.back().elevation = value(relative_group) * m_b.height;
            break;
        case facade_index_tag:
            m_b.storeys.back().facade_index = local;
            break;
        case variation_cell_type_tag:
            m_b.material_variations.back().cell_type = local;
            break;
        case material_slot_tag:
            m_b.material_variations.back().material_slot = local;
            break;
        case hue_tag:
            m_b.material_variations.back().color.h = value(relative_group);
            break;
        case saturation_tag:
            m_b.material_variations.back().color.s = value(relative_group);
            break;
        case value_tag:
            m_b.material_variations.back().color.v = value(relative_group);
            break;
        default:
            break;
        }
    }

    void on_select(const grammar::Cursor &, std::uint32_t) {}
    void on_end(const grammar::Cursor &) {}

    BuildingAbstraction take() { return std::move(m_b); }

private:
    Cell &cell() { return m_b.facades.back().cells_patterns.back().cells.back(); }

    const Vocabulary *m_vocab;
    BuildingAbstraction m_b;
};

} // namespace codec

class ParseError : public Error {
public:
    ParseError(std::size_t position, TokenId token, std::vector<TokenId> valid)
        : Error("parse", "token " + std::to_string(token) + " at position " + std::to_string(position) +
                             " is not valid (" + std::to_string(valid.size()) + " valid alternatives)"),
          m_position(position), m_token(token), m_valid(std::move(valid)) {}

    std::size_t position() const { return m_position; }
    TokenId token() const { return m_token; }
    const std::vector<TokenId> &valid() const { return m_valid; }

private:
    std::size_t m_position;
    TokenId m_token;
    std::vector<TokenId> m_valid;
};

class IncompleteError : public Error {
public:
    IncompleteError(std::size_t consumed, codec::GrammarState state)
        : Error("incomplete", "token sequence ends after " + std::to_string(consumed) +
                                  " tokens before the building is complete"),
          m_consumed(consumed), m_state(std::move(state)) {}

    std::size_t consumed() const { return m_consumed; }
    const codec::GrammarState &state() const { return m_state; }

private:
    std::size_t m_consumed;
    codec::GrammarState m_state;
};

class CapacityError : public Error {
public:
    explicit CapacityError(const std::string &message) : Error("capacity", message) {}
};

/// Vocabulary, grammar and the encode/decode pair for one catalog.
class BuildingCodec {
public:
    using State = codec::GrammarState;

    explicit BuildingCodec(std::vector<std::uint32_t> material_counts,
                           std::uint32_t pointer_cardinality = kDefaultPointerCardinality)
        : m_grammar(make_grammar(std::move(material_counts), pointer_cardinality)) {}

    const Vocabulary &vocabulary() const { return m_grammar.vocabulary(); }
    const codec::BuildingGrammar &grammar() const { return m_grammar; }
    const codec::BuildingLimits &limits() const { return *m_limits; }
    std::uint32_t catalog_size() const { return static_cast<std::uint32_t>(m_limits->material_counts.size()); }
    std::uint32_t pointer_cardinality() const { return m_limits->pointer_cardinality; }

    const TokenGroup &group(codec::GroupIndex g) const { return vocabulary().group(g); }

    State start() const { return m_grammar.start(); }
    TokenMask valid_next(const State &s) const { return m_grammar.valid_next(s); }
    State step(const State &s, TokenId id) const { return m_grammar.step(s, id); }
    bool is_accept(const State &s) const { return m_grammar.is_accept(s); }

    /// Snaps every continuous field to its token grid (the image of decode after encode).
    BuildingAbstraction quantize(const BuildingAbstraction &b) const {
        using namespace codec;
        const TokenGroup &abs = group(absolute_group);
        const TokenGroup &rel = group(relative_group);
        const TokenGroup &sr = group(scale_rotation_group);
        BuildingAbstraction out = b;
        out.noise_level = snap(b.noise_level, group(noise_level_group));
        out.height = snap(b.height, abs);
        for (Footprint &f : out.footprints) {
            for (Vec2 &v : f.vertices) {
                v = {snap(v.x, abs), snap(v.y, abs)};
            }
        }
        for (Facade &f : out.facades) {
            for (CellsPattern &p : f.cells_patterns) {
                for (Cell &c : p.cells) {
                    c.offset = snap(c.offset, rel);
                    if (c.modifier) {
                        c.modifier->scale_x = snap(c.modifier->scale_x, sr);
                        c.modifier->scale_y = snap(c.modifier->scale_y, sr);
                        c.modifier->quaternion_3 = snap(c.modifier->quaternion_3, sr);
                        c.modifier->quaternion_4 = snap(c.modifier->quaternion_4, sr);
                    }
                }
            }
        }
        for (Storey &s : out.storeys) {
            s.elevation = dequantize_local(quantize_local(s.elevation / b.height, rel), rel) * out.height;
        }
        for (MaterialVariation &m : out.material_variations) {
            m.color = {snap(m.color.h, rel), snap(m.color.s, rel), snap(m.color.v, rel)};
        }
        return out;
    }

    /// Depth-first traversal in field order. Precondition: b valid and canonical.
    TokenSequence encode(const BuildingAbstraction &b, std::vector<std::string> *warnings = nullptr) const {
        using namespace codec;
        TokenSequence out;
        const Vocabulary &vocab = vocabulary();
        auto continuous = [&](double v, GroupIndex gi, const char *field) {
            const TokenGroup &g = vocab.group(gi);
            if (warnings && far_out_of_range(v, g)) {
                warnings->push_back(std::string(field) + " value " + std::to_string(v) + " clamped to [" +
                                    std::to_string(g.lo) + ", " + std::to_string(g.hi) + "]");
            }
            out.push_back(procinv::quantize(v, g));
        };
        auto discrete = [&](std::uint32_t v, GroupIndex gi, const char *field) {
            const TokenGroup &g = vocab.group(gi);
            if (v >= g.cardinality) {
                throw CapacityError(std::string(field) + " index " + std::to_string(v) + " exceeds the " + g.name +
                                    " capacity " + std::to_string(g.cardinality));
            }
            out.push_back(g.offset + v);
        };
        auto list = [&](std::size_t n, std::uint32_t min_items, std::uint32_t max_items, const char *field,
                        auto &&item) {
            if (n > max_items) {
                throw CapacityError(std::string(field) + " has " + std::to_string(n) + " items; at most " +
                                    std::to_string(max_items) + " can be referenced");
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (i >= min_items) {
                    out.push_back(vocab.present());
                }
                item(i);
            }
            out.push_back(vocab.end_repeated());
        };
        const std::uint32_t pointers = pointer_cardinality();
        const std::uint32_t unbounded = std::numeric_limits<std::uint32_t>::max();

        continuous(b.noise_level, noise_level_group, "noise_level");
        continuous(b.height, absolute_group, "height");
        list(b.footprints.size(), kMinFootprints, pointers, "footprints", [&](std::size_t f) {
            const auto &verts = b.footprints[f].vertices;
            list(verts.size(), kMinVertices, pointers, "vertices", [&](std::size_t v) {
                continuous(verts[v].x, absolute_group, "x");
                continuous(verts[v].y, absolute_group, "y");
            });
        });
        list(b.facades.size(), kMinFacades, pointers, "facades", [&](std::size_t fa) {
            const Facade &facade = b.facades[fa];
            discrete(facade.footprint_index, pointer_group, "footprint_index");
            list(facade.cells_patterns.size(), kMinPatterns, unbounded, "cells_patterns", [&](std::size_t p) {
                const CellsPattern &pattern = facade.cells_patterns[p];
                discrete(pattern.segment_range.first_segment, pointer_group, "first_segment");
                discrete(pattern.segment_range.last_segment, pointer_group, "last_segment");
                list(pattern.cells.size(), kMinCells, unbounded, "cells", [&](std::size_t c) {
                    const Cell &cell = pattern.cells[c];
                    discrete(cell.cell_type, asset_group, "cell_type");
                    continuous(cell.offset, relative_group, "offset");
                    if (!cell.modifier) {
                        out.push_back(vocab.absent());
                        return;
                    }
                    out.push_back(vocab.present());
                    continuous(cell.modifier->scale_x, scale_rotation_group, "scale_x");
                    continuous(cell.modifier->scale_y, scale_rotation_group, "scale_y");
                    continuous(cell.modifier->quaternion_3, scale_rotation_group, "quaternion_3");
                    continuous(cell.modifier->quaternion_4, scale_rotation_group, "quaternion_4");
                });
            });
        });
        list(b.storeys.size(), kMinStoreys, unbounded, "storeys", [&](std::size_t s) {
            continuous(b.storeys[s].elevation / b.height, relative_group, "elevation");
            discrete(b.storeys[s].facade_index, pointer_group, "facade_index");
        });
        list(b.material_variations.size(), kMinVariations, unbounded, "material_variations", [&](std::size_t m) {
            const MaterialVariation &mv = b.material_variations[m];
            discrete(mv.cell_type, asset_group, "cell_type");
            discrete(mv.material_slot, pointer_group, "material_slot");
            continuous(mv.color.h, relative_group, "h");
            continuous(mv.color.s, relative_group, "s");
            continuous(mv.color.v, relative_group, "v");
        });
        return out;
    }

    /// Parses a token sequence. Throws ParseError at the first invalid token and
    /// IncompleteError when the sequence stops before the accept state.
    BuildingAbstraction decode(std::span<const TokenId> tokens) const {
        State s = start();
        codec::BuildingBuilder builder(vocabulary());
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (!m_grammar.accepts(s, tokens[i])) {
                throw ParseError(i, tokens[i], m_grammar.valid_next(s).ids());
            }
            m_grammar.advance(s, tokens[i], builder);
        }
        if (!s.accepted) {
            throw IncompleteError(tokens.size(), std::move(s));
        }
        return builder.take();
    }

    std::uint64_t schema_hash() const { return fnv1a64(m_grammar.schema().describe()); }

    /// Vocabulary manifest: groups, ranges, resolutions, offsets and hashes.
    nlohmann::ordered_json manifest() const {
        nlohmann::ordered_json j;
        j["schema_version"] = hex64(schema_hash());
        j["vocabulary_hash"] = hex64(vocabulary_hash());
        j["vocab_size"] = vocabulary().size();
        j["catalog_size"] = catalog_size();
        j["pointer_cardinality"] = pointer_cardinality();
        j["max_length"] = kMaxSequenceLength;
        j["material_counts"] = m_limits->material_counts;
        nlohmann::ordered_json groups = nlohmann::ordered_json::array();
        for (const TokenGroup &g : vocabulary().groups()) {
            nlohmann::ordered_json gj;
            gj["name"] = g.name;
            gj["kind"] = g.kind == GroupKind::continuous ? "continuous"
                         : g.kind == GroupKind::discrete ? "discrete"
                                                         : "control";
            gj["lo"] = g.lo;
            gj["hi"] = g.hi;
            gj["resolution"] = g.resolution;
            gj["cardinality"] = g.cardinality;
            gj["offset"] = g.offset;
            groups.push_back(gj);
        }
        j["groups"] = groups;
        j["control"] = {{"END_REPEATED", vocabulary().end_repeated()},
                        {"PRESENT", vocabulary().present()},
                        {"ABSENT", vocabulary().absent()}};
        return j;
    }

    std::uint64_t vocabulary_hash() const {
        std::ostringstream os;
        os << hex64(schema_hash()) << ";";
        for (const TokenGroup &g : vocabulary().groups()) {
            os << g.name << ":" << g.lo << ":" << g.hi << ":" << g.resolution << ":" << g.cardinality << ":"
               << g.offset << ";";
        }
        for (std::uint32_t m : m_limits->material_counts) {
            os << m << ",";
        }
        return fnv1a64(os.str());
    }

private:
    codec::BuildingGrammar make_grammar(std::vector<std::uint32_t> material_counts, std::uint32_t pointers) {
        if (material_counts.empty()) {
            throw ConfigError("catalog must contain at least one asset");
        }
        if (pointers < codec::kMinVertices) {
            throw ConfigError("pointer cardinality must be at least 3");
        }
        for (std::uint32_t m : material_counts) {
            if (m == 0 || m > pointers) {
                throw ConfigError("every asset needs between 1 and pointer_cardinality materials");
            }
        }
        auto limits = std::make_shared<codec::BuildingLimits>();
        limits->material_counts = std::move(material_counts);
        limits->pointer_cardinality = pointers;
        Vocabulary vocab(codec::building_groups(static_cast<std::uint32_t>(limits->material_counts.size()), pointers),
                         0);
        const TokenGroup &abs = vocab.group(codec::absolute_group);
        limits->min_positive_height = quantize_local(0.0, abs) + 1;
        limits->zero_rotation = quantize_local(0.0, vocab.group(codec::scale_rotation_group));
        m_limits = limits;
        return codec::BuildingGrammar(codec::building_schema(pointers), std::move(vocab),
                                      codec::BuildingConstraints(limits));
    }

    std::shared_ptr<const codec::BuildingLimits> m_limits;
    codec::BuildingGrammar m_grammar;
};

/// u32 length then u32 ids, little-endian.
inline void write_token_sequence(std::ostream &out, std::span<const TokenId> ids) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(ids.size()));
    for (TokenId id : ids) {
        w.u32(id);
    }
    out.write(reinterpret_cast<const char *>(w.data().data()), static_cast<std::streamsize>(w.data().size()));
}

inline std::vector<std::uint8_t> token_sequence_bytes(std::span<const TokenId> ids) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(ids.size()));
    for (TokenId id : ids) {
        w.u32(id);
    }
    return w.take();
}

inline TokenSequence read_token_sequence(ByteReader &r) {
    const std::uint32_t n = r.u32();
    if (r.remaining() / 4 < n) {
        throw IoError("token sequence length exceeds the available data");
    }
    TokenSequence ids(n);
    for (auto &id : ids) {
        id = r.u32();
    }
    return ids;
}

inline TokenSequence read_token_sequence(std::istream &in) {
    std::uint32_t n = 0;
    if (!in.read(reinterpret_cast<char *>(&n), 4)) {
        throw IoError("missing token sequence length");
    }
    TokenSequence ids(n);
    if (n > 0 && !in.read(reinterpret_cast<char *>(ids.data()), static_cast<std::streamsize>(n) * 4)) {
        throw IoError("truncated token sequence");
    }
    return ids;
}

} // namespace procinv
