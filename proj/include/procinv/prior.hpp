#pragma once

// Procedural prior over buildings: seeded rules that place catalog assets along
// extruded footprints, with explicit facade reuse across storeys.

#include "procinv/catalog.hpp"
#include "procinv/codec.hpp"
#include "procinv/schema.hpp"

#include <json.hpp>

#include <algorithm>
#include <numbers>
#include <random>

namespace procinv {

template <typename T>
struct Range {
    T lo{};
    T hi{};

    bool empty() const { return lo > hi; }
    friend bool operator==(const Range &, const Range &) = default;
};

struct PriorConfig {
    Range<std::uint32_t> vertex_count{3, 8};
    Range<double> footprint_radius{4.0, 30.0};
    Range<std::uint32_t> storey_count{1, 12};
    Range<double> storey_height{2.5, 5.0};
    Range<std::uint32_t> distinct_facades{1, 4};
    Range<std::uint32_t> cells_per_segment{1, 8};
    double modifier_probability = 0.02;
    double material_variation_probability = 0.3;
    double hsv_sigma = 0.15;
    double augmented_fraction = 0.5;
    Range<double> noise_level{0.0, 0.5};

    friend bool operator==(const PriorConfig &, const PriorConfig &) = default;
};

template <typename T>
void to_json(nlohmann::json &j, const Range<T> &r) {
    j = nlohmann::json::array({r.lo, r.hi});
}

template <typename T>
void from_json(const nlohmann::json &j, Range<T> &r) {
    if (!j.is_array() || j.size() != 2) {
        throw ConfigError("range must be a two-element array [lo, hi]");
    }
    j.at(0).get_to(r.lo);
    j.at(1).get_to(r.hi);
}

inline void to_json(nlohmann::json &j, const PriorConfig &c) {
    j = nlohmann::json{{"vertex_count", c.vertex_count},
                       {"footprint_radius", c.footprint_radius},
                       {"storey_count", c.storey_count},
                       {"storey_height", c.storey_height},
                       {"distinct_facades", c.distinct_facades},
                       {"cells_per_segment", c.cells_per_segment},
                       {"modifier_probability", c.modifier_probability},
                       {"material_variation_probability", c.material_variation_probability},
                       {"hsv_sigma", c.hsv_sigma},
                       {"augmented_fraction", c.augmented_fraction},
                       {"noise_level", c.noise_level}};
}

/// Missing keys keep their defaults.
inline void from_json(const nlohmann::json &j, PriorConfig &c) {
    auto take = [&](const char *key, auto &field) {
        if (j.contains(key)) {
            j.at(key).get_to(field);
        }
    };
    take("vertex_count", c.vertex_count);
    take("footprint_radius", c.footprint_radius);
    take("storey_count", c.storey_count);
    take("storey_height", c.storey_height);
    take("distinct_facades", c.distinct_facades);
    take("cells_per_segment", c.cells_per_segment);
    take("modifier_probability", c.modifier_probability);
    take("material_variation_probability", c.material_variation_probability);
    take("hsv_sigma", c.hsv_sigma);
    take("augmented_fraction", c.augmented_fraction);
    take("noise_level", c.noise_level);
}

inline void check(const PriorConfig &c) {
    auto fail = [](const std::string &m) { throw ConfigError("prior config: " + m); };
    if (c.vertex_count.empty() || c.footprint_radius.empty() || c.storey_count.empty() || c.storey_height.empty() ||
        c.distinct_facades.empty() || c.cells_per_segment.empty() || c.noise_level.empty()) {
        fail("every range needs lo <= hi");
    }
    if (c.vertex_count.lo < 3) {
        fail("footprints need at least 3 vertices");
    }
    if (c.storey_count.lo < 1 || c.distinct_facades.lo < 1 || c.cells_per_segment.lo < 1) {
        fail("storey, facade and cell counts start at 1");
    }
    if (c.footprint_radius.lo <= 0.0 || c.storey_height.lo <= 0.0) {
        fail("radius and storey height must be positive");
    }
    for (double p : {c.modifier_probability, c.material_variation_probability, c.augmented_fraction}) {
        if (!(p >= 0.0 && p <= 1.0)) {
            fail("probabilities must lie in [0, 1]");
        }
    }
    if (c.hsv_sigma < 0.0 || c.noise_level.lo < 0.0 || c.noise_level.hi > 1.0) {
        fail("hsv_sigma must be >= 0 and noise_level within [0, 1]");
    }
}

struct SampleReport {
    std::uint32_t attempts = 0;
    bool fallback = false; // the minimal building was returned
    std::size_t token_count = 0;
};

namespace detail {

class PriorRng {
public:
    explicit PriorRng(std::uint64_t seed) : m_rng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(m_rng); }
    double uniform(const Range<double> &r) { return r.lo == r.hi ? r.lo : uniform(r.lo, r.hi); }
    std::uint32_t integer(std::uint32_t lo, std::uint32_t hi) {
        return std::uniform_int_distribution<std::uint32_t>(lo, hi)(m_rng);
    }
    std::uint32_t integer(const Range<std::uint32_t> &r) { return integer(r.lo, r.hi); }
    bool chance(double p) { return uniform(0.0, 1.0) < p; }

    template <typename T>
    const T &pick(const std::vector<T> &v) {
        return v[integer(0, static_cast<std::uint32_t>(v.size() - 1))];
    }

private:
    std::mt19937_64 m_rng;
};

inline double snap_tenth(double v) { return std::round(v * 10.0) / 10.0; }

inline bool usable_footprint(const std::vector<Vec2> &poly, double min_segment) {
    if (!is_simple_polygon(poly) || signed_area(poly) <= 0.0) {
        return false;
    }
    for (std::size_t i = 0; i < poly.size(); ++i) {
        if (length(poly[(i + 1) % poly.size()] - poly[i]) < min_segment) {
            return false;
        }
    }
    return true;
}

// Polygon around the origin, CCW, snapped to the coordinate grid.
inline std::vector<Vec2> footprint_shape(PriorRng &rng, std::uint32_t n, double radius) {
    std::vector<Vec2> poly;
    if (n == 4 && rng.chance(0.7)) {
        const double w = radius * rng.uniform(0.8, 1.6);
        const double d = radius * rng.uniform(0.6, 1.2);
        poly = {{-w / 2, -d / 2}, {w / 2, -d / 2}, {w / 2, d / 2}, {-w / 2, d / 2}};
    } else if (n == 6 && rng.chance(0.6)) {
        // L shape: a w x d block with one corner notch.
        const double w = radius * rng.uniform(1.0, 1.6);
        const double d = radius * rng.uniform(0.8, 1.4);
        const double nw = w * rng.uniform(0.3, 0.6);
        const double nd = d * rng.uniform(0.3, 0.6);
        poly = {{-w / 2, -d / 2}, {w / 2, -d / 2}, {w / 2, d / 2 - nd},
                {w / 2 - nw, d / 2 - nd}, {w / 2 - nw, d / 2}, {-w / 2, d / 2}};
    } else {
        // Star-shaped: jittered angles, per-vertex radius.
        const double step = 2.0 * std::numbers::pi / n;
        const double phase = rng.uniform(0.0, step);
        for (std::uint32_t i = 0; i < n; ++i) {
            const double a = phase + step * i + rng.uniform(-0.25, 0.25) * step;
            const double r = radius * rng.uniform(0.75, 1.0);
            poly.push_back({r * std::cos(a), r * std::sin(a)});
        }
    }
    for (Vec2 &v : poly) {
        v = {snap_tenth(v.x), snap_tenth(v.y)};
    }
    return poly;
}

struct Palette {
    std::vector<std::uint32_t> walls, windows, doors, cornices, pillars, roofs;
};

inline std::vector<std::uint32_t> choose(PriorRng &rng, std::vector<std::uint32_t> pool, std::uint32_t count) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < count && !pool.empty(); ++i) {
        const std::uint32_t k = rng.integer(0, static_cast<std::uint32_t>(pool.size() - 1));
        out.push_back(pool[k]);
        pool.erase(pool.begin() + k);
    }
    return out;
}

inline Palette choose_palette(PriorRng &rng, const AssetCatalog &catalog, double richness) {
    auto count = [&](std::uint32_t lo, std::uint32_t hi) {
        const auto top = static_cast<std::uint32_t>(std::max<double>(lo, std::round(lo + (hi - lo) * richness)));
        return rng.integer(lo, top);
    };
    Palette p;
    p.walls = choose(rng, catalog.of_kind(AssetKind::wall_panel), count(1, 4));
    p.windows = choose(rng, catalog.of_kind(AssetKind::window_panel), count(1, 8));
    p.doors = choose(rng, catalog.of_kind(AssetKind::door_panel), count(1, 3));
    p.cornices = choose(rng, catalog.of_kind(AssetKind::cornice), count(0, 3));
    p.pillars = choose(rng, catalog.of_kind(AssetKind::pillar), count(0, 4));
    p.roofs = choose(rng, catalog.of_kind(AssetKind::roof_tile), count(0, 3));
    return p;
}

enum class FacadeRole { ground, typical, alternate, top };

// Per-facade choices drawn once so that all segments follow one rhythm.
struct FacadeStyle {
    std::uint32_t wall = 0;
    std::uint32_t window = 0;
    std::uint32_t accent = 0;      // second window type or pillar
    std::uint32_t rhythm = 0;      // 0 all windows, 1 window/wall, 2 pillars at ends, 3 paired accents
    std::optional<std::uint32_t> door;
    std::optional<std::uint32_t> crown; // cornice or roof tile across the top storey
};

inline FacadeStyle facade_style(PriorRng &rng, const Palette &p, FacadeRole role) {
    FacadeStyle s;
    s.wall = rng.pick(p.walls);
    s.window = rng.pick(p.windows);
    s.accent = !p.pillars.empty() && rng.chance(0.5) ? rng.pick(p.pillars) : rng.pick(p.windows);
    s.rhythm = rng.integer(0, 3);
    if (role == FacadeRole::ground) {
        s.door = rng.pick(p.doors);
    }
    if (role == FacadeRole::top) {
        std::vector<std::uint32_t> crowns = p.cornices;
        crowns.insert(crowns.end(), p.roofs.begin(), p.roofs.end());
        if (!crowns.empty()) {
            s.crown = rng.pick(crowns);
        }
    }
    return s;
}

inline std::vector<Cell> segment_cells(const FacadeStyle &s, std::uint32_t bays, bool door_segment) {
    std::vector<Cell> cells;
    for (std::uint32_t i = 0; i < bays; ++i) {
        std::uint32_t type = s.window;
        switch (s.rhythm) {
        case 1:
            type = (i % 2 == 0) ? s.window : s.wall;
            break;
        case 2:
            type = (i == 0 || i + 1 == bays) ? s.accent : s.window;
            break;
        case 3:
            type = (i % 3 == 2) ? s.accent : s.window;
            break;
        default:
            break;
        }
        if (s.crown && (i % 2 == 1 || bays == 1)) {
            type = *s.crown;
        }
        if (door_segment && s.door && i == bays / 2) {
            type = *s.door;
        }
        cells.push_back(Cell{type, static_cast<double>(i) / bays, {}});
    }
    return cells;
}

struct Complexity {
    std::uint32_t max_vertices;
    std::uint32_t max_storeys;
    std::uint32_t max_facades;
    std::uint32_t max_bays;
    double richness;
};

inline Complexity complexity_for_attempt(const PriorConfig &cfg, std::uint32_t attempt) {
    // Each retry shrinks the structural budget a little further.
    const double shrink = std::pow(0.85, attempt / 5);
    auto scaled = [&](const Range<std::uint32_t> &r) {
        return std::max(r.lo, static_cast<std::uint32_t>(std::floor(r.lo + (r.hi - r.lo) * shrink)));
    };
    return {scaled(cfg.vertex_count), scaled(cfg.storey_count), scaled(cfg.distinct_facades),
            scaled(cfg.cells_per_segment), shrink};
}

inline BuildingAbstraction draw_building(PriorRng &rng, const PriorConfig &cfg, const AssetCatalog &catalog,
                                         const Complexity &cx) {
    BuildingAbstraction b;

    // Footprint(s).
    const std::uint32_t n = rng.integer(cfg.vertex_count.lo, cx.max_vertices);
    const double radius = rng.uniform(cfg.footprint_radius.lo, std::max(cfg.footprint_radius.lo,
                                                                          cfg.footprint_radius.hi));
    std::vector<Vec2> shape;
    for (int tries = 0; tries < 50; ++tries) {
        shape = footprint_shape(rng, n, radius);
        if (usable_footprint(shape, 1.0)) {
            break;
        }
        shape.clear();
    }
    if (shape.empty()) {
        const double r = snap_tenth(radius);
        shape = {{-r, -r}, {r, -r}, {r, r}, {-r, r}};
    }
    const Vec2 shift{snap_tenth(rng.uniform(-5.0, 5.0)), snap_tenth(rng.uniform(-5.0, 5.0))};
    auto placed = [&](const std::vector<Vec2> &poly, double scale) {
        Footprint f;
        for (const Vec2 &v : poly) {
            f.vertices.push_back({snap_tenth(v.x * scale + shift.x), snap_tenth(v.y * scale + shift.y)});
        }
        return f;
    };
    b.footprints.push_back(placed(shape, 1.0));

    // Storeys.
    const std::uint32_t storeys = rng.integer(cfg.storey_count.lo, cx.max_storeys);
    const double ground_height = rng.uniform(std::max(cfg.storey_height.lo, std::min(3.5, cfg.storey_height.hi)),
                                             cfg.storey_height.hi);
    const double typical_height = rng.uniform(cfg.storey_height.lo, std::min(cfg.storey_height.hi,
                                                                              std::max(cfg.storey_height.lo, 4.0)));
    double z = 0.0;
    std::vector<double> elevations;
    for (std::uint32_t s = 0; s < storeys; ++s) {
        elevations.push_back(z);
        z += (s == 0) ? ground_height : typical_height;
    }
    b.height = z;

    // Facades and their roles.
    std::uint32_t k = std::min(rng.integer(cfg.distinct_facades.lo, cx.max_facades), storeys);
    if (k == 4 && storeys < 4) {
        k = storeys;
    }
    std::vector<FacadeRole> roles{FacadeRole::ground};
    if (k >= 2) {
        roles.push_back(FacadeRole::typical);
    }
    if (k >= 3) {
        roles.push_back(FacadeRole::top);
    }
    if (k >= 4) {
        roles.push_back(FacadeRole::alternate);
    }
    const bool setback = k >= 3 && storeys >= 4 && rng.chance(0.25);
    if (setback) {
        const double scale = rng.uniform(0.6, 0.85);
        Footprint upper = placed(shape, scale);
        if (usable_footprint(upper.vertices, 1.0)) {
            b.footprints.push_back(upper);
        }
    }

    const Palette palette = choose_palette(rng, catalog, cx.richness);
    const double bay_width = rng.uniform(2.0, 4.5);
    for (std::uint32_t f = 0; f < k; ++f) {
        const FacadeRole role = roles[f];
        Facade facade;
        facade.footprint_index = (role == FacadeRole::top && b.footprints.size() > 1) ? 1 : 0;
        const Footprint &fp = b.footprints[facade.footprint_index];
        const FacadeStyle style = facade_style(rng, palette, role);
        const std::uint32_t door_segment = rng.integer(0, static_cast<std::uint32_t>(fp.segment_count() - 1));
        for (std::uint32_t seg = 0; seg < fp.segment_count(); ++seg) {
            const double len = length(fp.segment_end(seg) - fp.segment_start(seg));
            const auto bays = std::clamp(static_cast<std::uint32_t>(std::lround(len / bay_width)),
                                         cfg.cells_per_segment.lo, cx.max_bays);
            CellsPattern p{SegmentRange{seg, seg}, segment_cells(style, bays, seg == door_segment)};
            for (Cell &c : p.cells) {
                if (rng.chance(cfg.modifier_probability)) {
                    const Vec2 d = fp.segment_end(seg) - fp.segment_start(seg);
                    const double yaw = std::atan2(d.y, d.x) + rng.uniform(-0.2, 0.2);
                    const double width = std::min(4.9, std::max(0.3, len / bays * rng.uniform(0.7, 1.3)));
                    c.modifier = CellModifier{width, std::min(4.9, typical_height * rng.uniform(0.7, 1.0)),
                                              std::sin(yaw / 2), std::cos(yaw / 2)};
                }
            }
            facade.cells_patterns.push_back(std::move(p));
        }
        b.facades.push_back(std::move(facade));
    }

    for (std::uint32_t s = 0; s < storeys; ++s) {
        std::uint32_t f = 0;
        if (s > 0) {
            f = k >= 2 ? 1 : 0;
            if (k >= 3 && s + 1 == storeys) {
                f = 2;
            } else if (k >= 4 && s % 2 == 0) {
                f = 3;
            }
        }
        b.storeys.push_back(Storey{elevations[s], f});
    }

    // Material variations over the assets actually placed.
    for (std::uint32_t asset : used_assets(b)) {
        if (!rng.chance(cfg.material_variation_probability)) {
            continue;
        }
        const auto slots = static_cast<std::uint32_t>(catalog[asset].materials.size());
        const std::uint32_t slot = rng.integer(0, slots - 1);
        b.material_variations.push_back(
            MaterialVariation{asset, slot, Hsv{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)}});
    }

    b.noise_level = rng.uniform(cfg.noise_level);
    return b;
}

inline BuildingAbstraction minimal_fallback(const AssetCatalog &catalog) {
    BuildingAbstraction b;
    b.height = 3.0;
    b.footprints = {Footprint{{{-5.0, -5.0}, {5.0, -5.0}, {5.0, 5.0}, {-5.0, 5.0}}}};
    b.facades = {Facade{0, {CellsPattern{SegmentRange{0, 3}, {Cell{catalog.of_kind(AssetKind::wall_panel).at(0), 0.0, {}}}}}}};
    b.storeys = {Storey{0.0, 0}};
    return b;
}

} // namespace detail

/// Samples a valid, canonical, quantized building that encodes within the
/// sequence-length guard. Deterministic in (seed, cfg, catalog).
inline BuildingAbstraction sample(std::uint64_t seed, const PriorConfig &cfg, const AssetCatalog &catalog,
                                  const BuildingCodec &codec, SampleReport *report = nullptr) {
    check(cfg);
    const std::vector<std::uint32_t> counts = catalog.material_counts();
    detail::PriorRng rng(mix_seed(seed, 0x5052494f52ULL));
    SampleReport local;
    SampleReport &r = report ? *report : local;
    r = SampleReport{};
    constexpr std::uint32_t kMaxAttempts = 100;
    for (std::uint32_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
        r.attempts = attempt + 1;
        const BuildingAbstraction raw =
            detail::draw_building(rng, cfg, catalog, detail::complexity_for_attempt(cfg, attempt));
        const BuildingAbstraction b = canonicalize(codec.quantize(canonicalize(raw)));
        if (!validate(b, counts).empty()) {
            continue;
        }
        try {
            const std::size_t tokens = codec.encode(b).size();
            if (tokens <= kMaxSequenceLength) {
                r.token_count = tokens;
                return b;
            }
        } catch (const CapacityError &) {
        }
    }
    r.fallback = true;
    const BuildingAbstraction b = canonicalize(codec.quantize(detail::minimal_fallback(catalog)));
    r.token_count = codec.encode(b).size();
    return b;
}

inline BuildingAbstraction sample(std::uint64_t seed, const PriorConfig &cfg, const AssetCatalog &catalog,
                                  SampleReport *report = nullptr) {
    const BuildingCodec codec(catalog.material_counts());
    return sample(seed, cfg, catalog, codec, report);
}

/// Adds independent N(0, sigma^2) noise to every h, s, v of the building's
/// material variations and clamps to [0, 1]. Geometry is untouched.
inline BuildingAbstraction augment_colors(const BuildingAbstraction &b, std::uint64_t seed, double sigma) {
    if (sigma < 0.0) {
        throw ConfigError("hsv sigma must be non-negative");
    }
    BuildingAbstraction out = b;
    if (sigma == 0.0) {
        return out;
    }
    std::mt19937_64 rng(mix_seed(seed, 0x485356ULL));
    std::normal_distribution<double> noise(0.0, sigma);
    for (MaterialVariation &m : out.material_variations) {
        for (double *c : {&m.color.h, &m.color.s, &m.color.v}) {
            *c = std::clamp(*c + noise(rng), 0.0, 1.0);
        }
    }
    return out;
}

} // namespace procinv
