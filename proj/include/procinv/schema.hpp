#pragma once

// The building-abstraction language: value types, validation, canonical
// form and the implicit cell-transform heuristics.

#include "procinv/error.hpp"
#include "procinv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace procinv {

struct Hsv {
    double h = 0.0;
    double s = 0.0;
    double v = 0.0;

    friend bool operator==(const Hsv &, const Hsv &) = default;
};

struct Footprint {
    std::vector<Vec2> vertices;

    std::size_t segment_count() const { return vertices.size(); }
    Vec2 segment_start(std::size_t segment) const { return vertices[segment]; }
    Vec2 segment_end(std::size_t segment) const { return vertices[(segment + 1) % vertices.size()]; }

    friend bool operator==(const Footprint &, const Footprint &) = default;
};

/// Explicit scale/rotation that replaces the derived values of one cell.
/// The rotation is a yaw quaternion (0, 0, quaternion_3, quaternion_4), normalised on use.
struct CellModifier {
    double scale_x = 1.0;
    double scale_y = 1.0;
    double quaternion_3 = 0.0;
    double quaternion_4 = 1.0;

    friend bool operator==(const CellModifier &, const CellModifier &) = default;
};

struct Cell {
    std::uint32_t cell_type = 0;
    double offset = 0.0;
    std::optional<CellModifier> modifier;

    friend bool operator==(const Cell &, const Cell &) = default;
};

/// Inclusive range of footprint segments. The pattern's cells are laid out
/// on each segment of the range; offsets are fractions of that segment.
struct SegmentRange {
    std::uint32_t first_segment = 0;
    std::uint32_t last_segment = 0;

    friend bool operator==(const SegmentRange &, const SegmentRange &) = default;
};

struct CellsPattern {
    SegmentRange segment_range;
    std::vector<Cell> cells;

    friend bool operator==(const CellsPattern &, const CellsPattern &) = default;
};

struct Facade {
    std::uint32_t footprint_index = 0;
    std::vector<CellsPattern> cells_patterns;

    friend bool operator==(const Facade &, const Facade &) = default;
};

struct Storey {
    double elevation = 0.0;
    std::uint32_t facade_index = 0;

    friend bool operator==(const Storey &, const Storey &) = default;
};

struct MaterialVariation {
    std::uint32_t cell_type = 0;
    std::uint32_t material_slot = 0;
    Hsv color;

    friend bool operator==(const MaterialVariation &, const MaterialVariation &) = default;
};

struct BuildingAbstraction {
    double height = 0.0;
    std::vector<Footprint> footprints;
    std::vector<Facade> facades;
    std::vector<Storey> storeys;
    std::vector<MaterialVariation> material_variations;
    double noise_level = 0.0;

    friend bool operator==(const BuildingAbstraction &, const BuildingAbstraction &) = default;
};

inline constexpr double kModifierLimit = 5.0;
inline constexpr double kMinSegmentLength = 1e-6;

struct Violation {
    std::string path;
    std::string rule;

    friend bool operator==(const Violation &, const Violation &) = default;
};

namespace detail {

inline std::string index_path(const std::string &prefix, std::size_t i) {
    return prefix + "[" + std::to_string(i) + "]";
}

inline bool in_unit(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

} // namespace detail

/// Checks every invariant of the language. `material_counts[t]` is the number of
/// materials of asset t; its size is the catalog size. Violations are data.
inline std::vector<Violation> validate(const BuildingAbstraction &b, std::span<const std::uint32_t> material_counts,
                                       bool check_material_slots = true) {
    using detail::index_path;
    std::vector<Violation> out;
    auto report = [&](std::string path, std::string rule) { out.push_back({std::move(path), std::move(rule)}); };
    const std::size_t catalog_size = material_counts.size();

    if (!(std::isfinite(b.height) && b.height > 0.0)) {
        report("height", "height must be > 0");
    }
    if (!detail::in_unit(b.noise_level)) {
        report("noise_level", "noise_level must lie in [0, 1]");
    }
    if (b.footprints.empty()) {
        report("footprints", "at least one footprint");
    }
    if (b.facades.empty()) {
        report("facades", "at least one facade");
    }
    if (b.storeys.empty()) {
        report("storeys", "at least one storey");
    }

    for (std::size_t f = 0; f < b.footprints.size(); ++f) {
        const auto &verts = b.footprints[f].vertices;
        const std::string path = index_path("footprints", f) + ".vertices";
        if (verts.size() < 3) {
            report(path, "at least 3 vertices");
            continue;
        }
        bool finite = std::all_of(verts.begin(), verts.end(),
                                  [](Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); });
        if (!finite) {
            report(path, "vertex coordinates must be finite");
            continue;
        }
        bool degenerate = false;
        for (std::size_t s = 0; s < verts.size(); ++s) {
            if (length(verts[(s + 1) % verts.size()] - verts[s]) < kMinSegmentLength) {
                report(index_path(path, s), "degenerate segment (length < 1e-6 m)");
                degenerate = true;
            }
        }
        if (!degenerate && (!is_simple_polygon(verts) || signed_area(verts) == 0.0)) {
            report(path, "footprint must be a simple polygon");
        }
    }

    for (std::size_t fa = 0; fa < b.facades.size(); ++fa) {
        const Facade &facade = b.facades[fa];
        const std::string fpath = index_path("facades", fa);
        std::size_t segments = 0;
        if (facade.footprint_index >= b.footprints.size()) {
            report(fpath + ".footprint_index", "index out of range");
        } else {
            segments = b.footprints[facade.footprint_index].vertices.size();
        }
        if (facade.cells_patterns.empty()) {
            report(fpath + ".cells_patterns", "at least one cells pattern");
        }
        std::vector<bool> covered(segments, false);
        for (std::size_t p = 0; p < facade.cells_patterns.size(); ++p) {
            const CellsPattern &pattern = facade.cells_patterns[p];
            const std::string ppath = index_path(fpath + ".cells_patterns", p);
            const auto [first, last] = std::pair{pattern.segment_range.first_segment, pattern.segment_range.last_segment};
            if (first > last) {
                report(ppath + ".segment_range", "first_segment must not exceed last_segment");
            } else if (segments > 0 && last >= segments) {
                report(ppath + ".segment_range", "segment index out of range");
            } else if (segments > 0) {
                for (std::uint32_t s = first; s <= last; ++s) {
                    if (covered[s]) {
                        report(ppath + ".segment_range", "segment coverage overlaps another pattern");
                        break;
                    }
                    covered[s] = true;
                }
            }
            if (pattern.cells.empty()) {
                report(ppath + ".cells", "at least one cell");
            }
            double previous = 0.0;
            for (std::size_t c = 0; c < pattern.cells.size(); ++c) {
                const Cell &cell = pattern.cells[c];
                const std::string cpath = index_path(ppath + ".cells", c);
                if (cell.cell_type >= catalog_size) {
                    report(cpath + ".cell_type", "asset index out of range");
                }
                if (!detail::in_unit(cell.offset)) {
                    report(cpath + ".offset", "offset must lie in [0, 1]");
                } else if (cell.offset < previous) {
                    report(cpath + ".offset", "offsets must be nondecreasing");
                } else {
                    previous = cell.offset;
                }
                if (cell.modifier) {
                    const CellModifier &m = *cell.modifier;
                    const std::pair<const char *, double> values[] = {{"scale_x", m.scale_x},
                                                                      {"scale_y", m.scale_y},
                                                                      {"quaternion_3", m.quaternion_3},
                                                                      {"quaternion_4", m.quaternion_4}};
                    for (const auto &[name, v] : values) {
                        if (!(std::isfinite(v) && std::abs(v) <= kModifierLimit)) {
                            report(cpath + ".modifier." + name, "value must lie in [-5, 5]");
                        }
                    }
                    if (m.quaternion_3 == 0.0 && m.quaternion_4 == 0.0) {
                        report(cpath + ".modifier", "rotation quaternion has zero norm");
                    }
                }
            }
        }
    }

    double previous_elevation = 0.0;
    for (std::size_t s = 0; s < b.storeys.size(); ++s) {
        const Storey &storey = b.storeys[s];
        const std::string spath = index_path("storeys", s);
        if (storey.facade_index >= b.facades.size()) {
            report(spath + ".facade_index", "index out of range");
        }
        if (!(std::isfinite(storey.elevation) && storey.elevation >= 0.0 && storey.elevation <= b.height)) {
            report(spath + ".elevation", "elevation must lie in [0, height]");
        } else if (storey.elevation < previous_elevation) {
            report(spath + ".elevation", "storeys must be ordered by nondecreasing elevation");
        } else {
            previous_elevation = storey.elevation;
        }
    }

    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (std::size_t m = 0; m < b.material_variations.size(); ++m) {
        const MaterialVariation &mv = b.material_variations[m];
        const std::string mpath = index_path("material_variations", m);
        if (mv.cell_type >= catalog_size) {
            report(mpath + ".cell_type", "asset index out of range");
        } else if (check_material_slots && mv.material_slot >= material_counts[mv.cell_type]) {
            report(mpath + ".material_slot", "material slot out of range for the asset");
        }
        if (!detail::in_unit(mv.color.h) || !detail::in_unit(mv.color.s) || !detail::in_unit(mv.color.v)) {
            report(mpath + ".color", "hsv components must lie in [0, 1]");
        }
        if (!seen.insert({mv.cell_type, mv.material_slot}).second) {
            report(mpath, "duplicate (cell_type, material_slot) variation");
        }
    }
    return out;
}

/// Validation against a catalog known only by size; material slots are not checked.
inline std::vector<Violation> validate(const BuildingAbstraction &b, std::size_t catalog_size) {
    const std::vector<std::uint32_t> unknown(catalog_size, 0);
    return validate(b, unknown, false);
}

// ---------------------------------------------------------------------------
// Cell transforms

struct CellKey {
    std::uint32_t storey = 0;
    std::uint32_t pattern = 0;
    std::uint32_t cell = 0;
    std::uint32_t segment = 0;

    auto operator<=>(const CellKey &) const = default;
};

inline std::string to_string(const CellKey &k) {
    return "storey " + std::to_string(k.storey) + " pattern " + std::to_string(k.pattern) + " cell " +
           std::to_string(k.cell) + " segment " + std::to_string(k.segment);
}

struct CellTransform {
    Vec3 position;
    double scale_x = 1.0;
    double scale_y = 1.0;
    Quaternion rotation;

    /// Maps an asset-local point (u across the cell, depth into the building, v up)
    /// to world coordinates. u and v are scaled; depth stays in meters.
    Vec3 apply(Vec3 local) const {
        const Vec3 scaled{scale_x * local.x, local.y, scale_y * local.z};
        return position + rotation.rotate(scaled);
    }

    friend bool operator==(const CellTransform &, const CellTransform &) = default;
};

/// Yaw that turns the asset frame (width along +x, facing -y) so that its width
/// follows the segment and it faces the outward normal of a CCW footprint.
inline Quaternion segment_rotation(Vec2 start, Vec2 end) {
    const Vec2 d = end - start;
    return Quaternion::from_yaw(std::atan2(d.y, d.x));
}

inline Quaternion modifier_rotation(const CellModifier &m) {
    const double n = std::hypot(m.quaternion_3, m.quaternion_4);
    return {0.0, 0.0, m.quaternion_3 / n, m.quaternion_4 / n};
}

/// Derives position, scale and rotation of every placed cell instance.
/// Precondition: validate(b) is empty.
inline std::map<CellKey, CellTransform> derive_cell_transforms(const BuildingAbstraction &b) {
    std::map<CellKey, CellTransform> out;
    for (std::uint32_t si = 0; si < b.storeys.size(); ++si) {
        const Storey &storey = b.storeys[si];
        const double top = (si + 1 < b.storeys.size()) ? b.storeys[si + 1].elevation : b.height;
        const double span_y = top - storey.elevation;
        const Facade &facade = b.facades.at(storey.facade_index);
        const Footprint &footprint = b.footprints.at(facade.footprint_index);
        for (std::uint32_t pi = 0; pi < facade.cells_patterns.size(); ++pi) {
            const CellsPattern &pattern = facade.cells_patterns[pi];
            for (std::uint32_t seg = pattern.segment_range.first_segment; seg <= pattern.segment_range.last_segment;
                 ++seg) {
                const Vec2 a = footprint.segment_start(seg);
                const Vec2 e = footprint.segment_end(seg);
                const double seg_len = length(e - a);
                if (seg_len < kMinSegmentLength) {
                    throw GeometryError("footprint " + std::to_string(facade.footprint_index) + " segment " +
                                        std::to_string(seg) + " is degenerate (length < 1e-6 m)");
                }
                const Quaternion rotation = segment_rotation(a, e);
                for (std::uint32_t ci = 0; ci < pattern.cells.size(); ++ci) {
                    const Cell &cell = pattern.cells[ci];
                    const double next = (ci + 1 < pattern.cells.size()) ? pattern.cells[ci + 1].offset : 1.0;
                    const Vec2 p = lerp(a, e, cell.offset);
                    CellTransform t;
                    t.position = {p.x, p.y, storey.elevation};
                    t.scale_x = (next - cell.offset) * seg_len;
                    t.scale_y = span_y;
                    t.rotation = rotation;
                    if (cell.modifier) {
                        t.scale_x = cell.modifier->scale_x;
                        t.scale_y = cell.modifier->scale_y;
                        t.rotation = modifier_rotation(*cell.modifier);
                    }
                    out.emplace(CellKey{si, pi, ci, seg}, t);
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Canonical form

namespace detail {

struct FootprintRemap {
    std::vector<Vec2> vertices;
    std::vector<std::uint32_t> segment_map; // old segment -> new segment
    bool reversed = false;
};

inline FootprintRemap canonical_footprint(const Footprint &fp) {
    const std::size_t n = fp.vertices.size();
    FootprintRemap out;
    out.reversed = signed_area(fp.vertices) < 0.0;
    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < n; ++j) {
        order[j] = out.reversed ? (n - j) % n : j;
    }
    auto lex_less = [&](std::size_t i, std::size_t j) {
        const Vec2 a = fp.vertices[order[i]];
        const Vec2 b = fp.vertices[order[j]];
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    };
    std::size_t start = 0;
    for (std::size_t k = 1; k < n; ++k) {
        if (lex_less(k, start)) {
            start = k;
        }
    }
    std::vector<std::size_t> rotated(n);
    for (std::size_t j = 0; j < n; ++j) {
        rotated[j] = order[(j + start) % n];
    }
    out.vertices.resize(n);
    out.segment_map.assign(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
        out.vertices[j] = fp.vertices[rotated[j]];
        // Old segment i joins v_i -> v_{i+1}. Walking backwards, new segment j joins
        // v_{r_j} -> v_{r_j - 1}, i.e. old segment r_{j+1} traversed in reverse.
        const std::size_t old_segment = out.reversed ? rotated[(j + 1) % n] : rotated[j];
        out.segment_map[old_segment] = static_cast<std::uint32_t>(j);
    }
    return out;
}

// Reverses the layout of cells on a segment whose direction flipped. Each cell keeps
// the interval it covered; a leading gap before the first cell is not representable
// and is absorbed by the new last cell.
inline std::vector<Cell> mirror_cells(const std::vector<Cell> &cells) {
    std::vector<Cell> out;
    out.reserve(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
        const std::size_t i = cells.size() - 1 - j;
        Cell c = cells[i];
        const double next = (i + 1 < cells.size()) ? cells[i + 1].offset : 1.0;
        c.offset = 1.0 - next;
        out.push_back(c);
    }
    return out;
}

inline std::vector<Cell> sorted_cells(std::vector<Cell> cells) {
    std::stable_sort(cells.begin(), cells.end(), [](const Cell &a, const Cell &b) { return a.offset < b.offset; });
    return cells;
}

} // namespace detail

/// Canonical form: CCW footprints starting at the lexicographically smallest vertex,
/// segment-ordered maximal cells patterns, storeys sorted by elevation, material
/// variations sorted by (cell_type, material_slot). Idempotent.
inline BuildingAbstraction canonicalize(const BuildingAbstraction &b) {
    BuildingAbstraction out = b;
    std::vector<detail::FootprintRemap> remaps;
    remaps.reserve(b.footprints.size());
    for (std::size_t f = 0; f < b.footprints.size(); ++f) {
        remaps.push_back(detail::canonical_footprint(b.footprints[f]));
        out.footprints[f].vertices = remaps.back().vertices;
    }

    for (Facade &facade : out.facades) {
        const detail::FootprintRemap &remap = remaps.at(facade.footprint_index);
        std::vector<std::pair<std::uint32_t, std::vector<Cell>>> per_segment;
        for (const CellsPattern &pattern : facade.cells_patterns) {
            std::vector<Cell> cells = detail::sorted_cells(pattern.cells);
            if (remap.reversed) {
                cells = detail::mirror_cells(cells);
            }
            for (std::uint32_t s = pattern.segment_range.first_segment; s <= pattern.segment_range.last_segment; ++s) {
                per_segment.emplace_back(remap.segment_map.at(s), cells);
            }
        }
        std::stable_sort(per_segment.begin(), per_segment.end(),
                         [](const auto &a, const auto &c) { return a.first < c.first; });
        std::vector<CellsPattern> patterns;
        for (auto &[segment, cells] : per_segment) {
            if (!patterns.empty() && patterns.back().segment_range.last_segment + 1 == segment &&
                patterns.back().cells == cells) {
                patterns.back().segment_range.last_segment = segment;
                continue;
            }
            patterns.push_back(CellsPattern{SegmentRange{segment, segment}, std::move(cells)});
        }
        facade.cells_patterns = std::move(patterns);
    }

    std::stable_sort(out.storeys.begin(), out.storeys.end(), [](const Storey &a, const Storey &c) {
        return a.elevation < c.elevation || (a.elevation == c.elevation && a.facade_index < c.facade_index);
    });
    std::stable_sort(out.material_variations.begin(), out.material_variations.end(),
                     [](const MaterialVariation &a, const MaterialVariation &c) {
                         return std::pair{a.cell_type, a.material_slot} < std::pair{c.cell_type, c.material_slot};
                     });
    return out;
}

/// Distinct asset indices used by any cell of the building.
inline std::set<std::uint32_t> used_assets(const BuildingAbstraction &b) {
    std::set<std::uint32_t> out;
    for (const Facade &f : b.facades) {
        for (const CellsPattern &p : f.cells_patterns) {
            for (const Cell &c : p.cells) {
                out.insert(c.cell_type);
            }
        }
    }
    return out;
}

} // namespace procinv
