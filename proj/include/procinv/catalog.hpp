#pragma once

// Synthetic parametric asset catalog. Every asset is a small triangle mesh in a
// unit cell: u in [0, 1] runs along the facade, v in [0, 1] runs up, and the
// depth axis is in meters (positive = into the building, negative = protruding).
// Cell transforms scale u and v; depth keeps its metric size.

#include "procinv/bytes.hpp"
#include "procinv/error.hpp"
#include "procinv/geometry.hpp"
#include "procinv/schema.hpp"

#include <array>
#include <cmath>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace procinv {

enum class AssetKind : std::uint8_t { wall_panel, window_panel, door_panel, cornice, pillar, roof_tile };

inline constexpr std::size_t kAssetKindCount = 6;

inline const char *to_string(AssetKind k) {
    switch (k) {
    case AssetKind::wall_panel:
        return "wall_panel";
    case AssetKind::window_panel:
        return "window_panel";
    case AssetKind::door_panel:
        return "door_panel";
    case AssetKind::cornice:
        return "cornice";
    case AssetKind::pillar:
        return "pillar";
    case AssetKind::roof_tile:
        return "roof_tile";
    }
    return "unknown";
}

struct Material {
    std::string slot;
    Hsv color;
};

struct MeshFace {
    std::array<std::uint32_t, 3> v{};
    std::uint32_t material = 0;
};

struct TemplateParams {
    double frame_width = 0.0;
    double inset_depth = 0.0;
    std::uint32_t mullions = 0;
};

struct AssetDef {
    AssetKind kind = AssetKind::wall_panel;
    TemplateParams params;
    std::vector<Material> materials;
    std::vector<Vec3> vertices;
    std::vector<MeshFace> faces;

    Triangle triangle(std::size_t f) const {
        const MeshFace &face = faces[f];
        return {vertices[face.v[0]], vertices[face.v[1]], vertices[face.v[2]]};
    }

    double surface_area() const {
        double a = 0.0;
        for (std::size_t f = 0; f < faces.size(); ++f) {
            a += triangle(f).area();
        }
        return a;
    }
};

class AssetCatalog {
public:
    AssetCatalog() = default;
    AssetCatalog(std::uint64_t seed, std::vector<AssetDef> assets) : m_seed(seed), m_assets(std::move(assets)) {}

    std::uint64_t seed() const { return m_seed; }
    std::size_t size() const { return m_assets.size(); }
    const AssetDef &operator[](std::size_t i) const { return m_assets.at(i); }
    const std::vector<AssetDef> &assets() const { return m_assets; }

    std::vector<std::uint32_t> material_counts() const {
        std::vector<std::uint32_t> out;
        out.reserve(m_assets.size());
        for (const AssetDef &a : m_assets) {
            out.push_back(static_cast<std::uint32_t>(a.materials.size()));
        }
        return out;
    }

    /// Indices of all assets of one kind.
    std::vector<std::uint32_t> of_kind(AssetKind k) const {
        std::vector<std::uint32_t> out;
        for (std::uint32_t i = 0; i < m_assets.size(); ++i) {
            if (m_assets[i].kind == k) {
                out.push_back(i);
            }
        }
        return out;
    }

    /// Canonical byte image; equal catalogs have equal bytes.
    std::vector<std::uint8_t> serialize() const {
        ByteWriter w;
        w.u64(m_seed);
        w.u32(static_cast<std::uint32_t>(m_assets.size()));
        for (const AssetDef &a : m_assets) {
            w.u8(static_cast<std::uint8_t>(a.kind));
            w.f64(a.params.frame_width);
            w.f64(a.params.inset_depth);
            w.u32(a.params.mullions);
            w.u32(static_cast<std::uint32_t>(a.materials.size()));
            for (const Material &m : a.materials) {
                w.string(m.slot);
                w.f64(m.color.h);
                w.f64(m.color.s);
                w.f64(m.color.v);
            }
            w.u32(static_cast<std::uint32_t>(a.vertices.size()));
            for (const Vec3 &v : a.vertices) {
                w.f64(v.x);
                w.f64(v.y);
                w.f64(v.z);
            }
            w.u32(static_cast<std::uint32_t>(a.faces.size()));
            for (const MeshFace &f : a.faces) {
                w.u32(f.v[0]);
                w.u32(f.v[1]);
                w.u32(f.v[2]);
                w.u32(f.material);
            }
        }
        return w.take();
    }

    std::uint64_t hash() const {
        const auto bytes = serialize();
        return fnv1a64({reinterpret_cast<const char *>(bytes.data()), bytes.size()});
    }

private:
    std::uint64_t m_seed = 0;
    std::vector<AssetDef> m_assets;
};

namespace detail {

class MeshBuilder {
public:
    explicit MeshBuilder(AssetDef &asset) : m_asset(asset) {}

    // Corners counter-clockwise as seen from the side the face points to.
    void quad(Vec3 a, Vec3 b, Vec3 c, Vec3 d, std::uint32_t material) {
        const auto base = static_cast<std::uint32_t>(m_asset.vertices.size());
        m_asset.vertices.insert(m_asset.vertices.end(), {a, b, c, d});
        m_asset.faces.push_back(MeshFace{{base, base + 1, base + 2}, material});
        m_asset.faces.push_back(MeshFace{{base, base + 2, base + 3}, material});
    }

    // Rectangle in the plane depth = y, facing the street (-depth).
    void front(double u0, double u1, double v0, double v1, double y, std::uint32_t material) {
        if (u1 - u0 <= 0.0 || v1 - v0 <= 0.0) {
            return;
        }
        quad({u0, y, v0}, {u1, y, v0}, {u1, y, v1}, {u0, y, v1}, material);
    }

    // Box between depths y0 < y1 without its back face (which rests on the wall).
    void relief(double u0, double u1, double v0, double v1, double y0, double y1, std::uint32_t material) {
        front(u0, u1, v0, v1, y0, material);
        quad({u0, y0, v0}, {u0, y1, v0}, {u1, y1, v0}, {u1, y0, v0}, material); // bottom, facing -v
        quad({u0, y0, v1}, {u1, y0, v1}, {u1, y1, v1}, {u0, y1, v1}, material); // top, facing +v
        quad({u0, y0, v0}, {u0, y0, v1}, {u0, y1, v1}, {u0, y1, v0}, material); // left, facing -u
        quad({u1, y0, v0}, {u1, y1, v0}, {u1, y1, v1}, {u1, y0, v1}, material); // right, facing +u
    }

    // Opening [u0,u1]x[v0,v1] recessed to `depth`: four reveal faces facing the opening.
    void reveal(double u0, double u1, double v0, double v1, double depth, std::uint32_t material, bool with_sill) {
        if (with_sill) {
            quad({u0, 0, v0}, {u1, 0, v0}, {u1, depth, v0}, {u0, depth, v0}, material); // facing +v
        }
        quad({u0, 0, v1}, {u0, depth, v1}, {u1, depth, v1}, {u1, 0, v1}, material);     // facing -v
        quad({u0, 0, v0}, {u0, depth, v0}, {u0, depth, v1}, {u0, 0, v1}, material);     // facing +u
        quad({u1, 0, v0}, {u1, 0, v1}, {u1, depth, v1}, {u1, depth, v0}, material);     // facing -u
    }

private:
    AssetDef &m_asset;
};

inline Hsv jitter_color(std::mt19937_64 &rng, Hsv base, double spread) {
    std::uniform_real_distribution<double> d(-spread, spread);
    auto c01 = [](double x) { return std::clamp(x, 0.0, 1.0); };
    double h = base.h + d(rng);
    h -= std::floor(h);
    return {h, c01(base.s + d(rng)), c01(base.v + d(rng))};
}

inline AssetDef make_asset(AssetKind kind, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    AssetDef a;
    a.kind = kind;
    MeshBuilder mesh(a);
    switch (kind) {
    case AssetKind::wall_panel: {
        a.params = {0.0, 0.0, 0};
        a.materials = {{"plaster", jitter_color(rng, {0.08, 0.25, 0.75}, 0.08)}};
        mesh.front(0, 1, 0, 1, 0, 0);
        break;
    }
    case AssetKind::window_panel: {
        a.params = {between(0.12, 0.3), between(0.05, 0.25), static_cast<std::uint32_t>(rng() % 3)};
        a.materials = {{"wall", jitter_color(rng, {0.07, 0.3, 0.7}, 0.08)},
                       {"glass", jitter_color(rng, {0.58, 0.35, 0.35}, 0.05)},
                       {"frame", jitter_color(rng, {0.0, 0.0, 0.9}, 0.08)}};
        const double f = a.params.frame_width;
        const double sill = between(0.15, 0.3);
        const double lintel = 1.0 - between(0.1, 0.2);
        const double d = a.params.inset_depth;
        mesh.front(0, 1, 0, sill, 0, 0);
        mesh.front(0, 1, lintel, 1, 0, 0);
        mesh.front(0, f, sill, lintel, 0, 0);
        mesh.front(1 - f, 1, sill, lintel, 0, 0);
        mesh.reveal(f, 1 - f, sill, lintel, d, 2, true);
        mesh.front(f, 1 - f, sill, lintel, d, 1);
        for (std::uint32_t m = 1; m <= a.params.mullions; ++m) {
            const double u = f + (1 - 2 * f) * m / (a.params.mullions + 1);
            mesh.relief(u - 0.02, u + 0.02, sill, lintel, d - 0.04, d, 2);
        }
        break;
    }
    case AssetKind::door_panel: {
        a.params = {between(0.15, 0.3), between(0.1, 0.3), 0};
        a.materials = {{"wall", jitter_color(rng, {0.07, 0.3, 0.65}, 0.08)},
                       {"leaf", jitter_color(rng, {0.08, 0.6, 0.35}, 0.08)}};
        const double f = a.params.frame_width;
        const double top = 1.0 - between(0.1, 0.25);
        const double d = a.params.inset_depth;
        mesh.front(0, f, 0, top, 0, 0);
        mesh.front(1 - f, 1, 0, top, 0, 0);
        mesh.front(0, 1, top, 1, 0, 0);
        mesh.reveal(f, 1 - f, 0, top, d, 0, false);
        mesh.front(f, 1 - f, 0, top, d, 1);
        break;
    }
    case AssetKind::cornice: {
        a.params = {between(0.1, 0.3), between(0.15, 0.4), 0};
        a.materials = {{"wall", jitter_color(rng, {0.08, 0.2, 0.7}, 0.08)},
                       {"trim", jitter_color(rng, {0.1, 0.1, 0.85}, 0.08)}};
        const double band = a.params.frame_width;
        mesh.front(0, 1, 0, 1 - band, 0, 0);
        mesh.relief(0, 1, 1 - band, 1, -a.params.inset_depth, 0, 1);
        break;
    }
    case AssetKind::pillar: {
        a.params = {between(0.15, 0.4), between(0.1, 0.3), 0};
        a.materials = {{"wall", jitter_color(rng, {0.08, 0.25, 0.7}, 0.08)},
                       {"stone", jitter_color(rng, {0.1, 0.1, 0.6}, 0.08)}};
        const double w = a.params.frame_width;
        mesh.front(0, 0.5 - w / 2, 0, 1, 0, 0);
        mesh.front(0.5 + w / 2, 1, 0, 1, 0, 0);
        mesh.relief(0.5 - w / 2, 0.5 + w / 2, 0, 1, -a.params.inset_depth, 0, 1);
        break;
    }
    case AssetKind::roof_tile: {
        a.params = {between(0.15, 0.35), between(0.2, 0.5), 0};
        a.materials = {{"wall", jitter_color(rng, {0.08, 0.25, 0.7}, 0.08)},
                       {"tile", jitter_color(rng, {0.02, 0.6, 0.45}, 0.08)}};
        const double band = a.params.frame_width;
        const double p = a.params.inset_depth;
        mesh.front(0, 1, 0, 1 - band, 0, 0);
        // Sloped tile band leaning out from the wall, closed at both ends.
        mesh.quad({0, -p, 1 - band}, {1, -p, 1 - band}, {1, 0, 1}, {0, 0, 1}, 1);
        mesh.quad({0, 0, 1 - band}, {1, 0, 1 - band}, {1, -p, 1 - band}, {0, -p, 1 - band}, 1);
        const auto base = static_cast<std::uint32_t>(a.vertices.size());
        a.vertices.insert(a.vertices.end(), {{0, 0, 1 - band}, {0, -p, 1 - band}, {0, 0, 1}, {1, 0, 1 - band},
                                             {1, 0, 1}, {1, -p, 1 - band}});
        a.faces.push_back(MeshFace{{base, base + 1, base + 2}, 1});
        a.faces.push_back(MeshFace{{base + 3, base + 4, base + 5}, 1});
        break;
    }
    }
    return a;
}

} // namespace detail

/// Deterministic catalog: asset i has kind i mod 6 and parameters drawn from a
/// generator seeded by (seed, i).
inline AssetCatalog build_catalog(std::uint64_t seed, std::size_t size) {
    if (size < kAssetKindCount) {
        throw ConfigError("catalog size must be at least " + std::to_string(kAssetKindCount) + " (got " +
                          std::to_string(size) + ")");
    }
    std::vector<AssetDef> assets;
    assets.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        std::mt19937_64 rng(mix_seed(seed, i));
        assets.push_back(detail::make_asset(static_cast<AssetKind>(i % kAssetKindCount), rng));
    }
    return AssetCatalog(seed, std::move(assets));
}

/// Writes one asset as a Wavefront OBJ (unit cell coordinates, z up).
inline void write_obj(std::ostream &out, const AssetDef &asset, const std::string &name) {
    out << "# " << to_string(asset.kind) << "\n";
    out << "o " << name << "\n";
    for (const Vec3 &v : asset.vertices) {
        out << "v " << v.x << " " << v.y << " " << v.z << "\n";
    }
    for (std::uint32_t m = 0; m < asset.materials.size(); ++m) {
        out << "usemtl " << asset.materials[m].slot << "\n";
        for (const MeshFace &f : asset.faces) {
            if (f.material == m) {
                out << "f " << f.v[0] + 1 << " " << f.v[1] + 1 << " " << f.v[2] + 1 << "\n";
            }
        }
    }
}

} // namespace procinv
