#pragma once

// Point-cloud likelihood: placed asset geometry -> area-uniform surface samples
// -> interior removal on an occupancy grid -> isotropic Gaussian noise.
// Also voxel partitioning, voxel dropout and the block/split perturbations.

#include "procinv/catalog.hpp"
#include "procinv/schema.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace procinv {

struct ColoredPoint {
    Vec3 position;
    Vec3 color; // rgb in [0, 1]

    friend bool operator==(const ColoredPoint &, const ColoredPoint &) = default;
};

struct PointCloud {
    std::vector<ColoredPoint> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    Aabb bounds() const {
        Aabb box;
        for (const ColoredPoint &p : points) {
            box.extend(p.position);
        }
        return box;
    }

    friend bool operator==(const PointCloud &, const PointCloud &) = default;
};

inline Vec3 hsv_to_rgb(const Hsv &c) {
    const double h = (c.h - std::floor(c.h)) * 6.0;
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double p = c.v * (1.0 - c.s);
    const double q = c.v * (1.0 - c.s * f);
    const double t = c.v * (1.0 - c.s * (1.0 - f));
    switch (sector) {
    case 0:
        return {c.v, t, p};
    case 1:
        return {q, c.v, p};
    case 2:
        return {p, c.v, t};
    case 3:
        return {p, q, c.v};
    case 4:
        return {t, p, c.v};
    default:
        return {c.v, p, q};
    }
}

struct ColoredTriangle {
    Triangle triangle;
    Vec3 color;
};

/// World-space triangles of every placed asset instance, coloured by material
/// default or the building's MaterialVariation for (cell_type, slot).
inline std::vector<ColoredTriangle> building_triangles(const BuildingAbstraction &b, const AssetCatalog &catalog) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, Hsv> variations;
    for (const MaterialVariation &m : b.material_variations) {
        variations[{m.cell_type, m.material_slot}] = m.color;
    }
    std::vector<ColoredTriangle> out;
    for (const auto &[key, t] : derive_cell_transforms(b)) {
        if (std::abs(t.scale_x) < 1e-9 || std::abs(t.scale_y) < 1e-9) {
            throw GeometryError("cell " + to_string(key) + " has a degenerate (zero) scale");
        }
        const Facade &facade = b.facades[b.storeys[key.storey].facade_index];
        const std::uint32_t type = facade.cells_patterns[key.pattern].cells[key.cell].cell_type;
        const AssetDef &asset = catalog[type];
        std::vector<Vec3> world;
        world.reserve(asset.vertices.size());
        for (const Vec3 &v : asset.vertices) {
            world.push_back(t.apply(v));
        }
        std::vector<Vec3> colors;
        for (std::uint32_t m = 0; m < asset.materials.size(); ++m) {
            const auto it = variations.find({type, m});
            colors.push_back(hsv_to_rgb(it != variations.end() ? it->second : asset.materials[m].color));
        }
        for (const MeshFace &f : asset.faces) {
            out.push_back({Triangle{world[f.v[0]], world[f.v[1]], world[f.v[2]]}, colors[f.material]});
        }
    }
    return out;
}

inline std::vector<Triangle> plain_triangles(const std::vector<ColoredTriangle> &tris) {
    std::vector<Triangle> out;
    out.reserve(tris.size());
    for (const ColoredTriangle &t : tris) {
        out.push_back(t.triangle);
    }
    return out;
}

/// Area-uniform samples: each triangle gets floor(area * density) points plus one
/// more with probability equal to the fractional part.
inline PointCloud sample_surface(const std::vector<ColoredTriangle> &tris, double density, std::uint64_t seed) {
    if (!(density > 0.0)) {
        throw ConfigError("surface density must be positive");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PointCloud pc;
    for (const ColoredTriangle &ct : tris) {
        const double expected = ct.triangle.area() * density;
        auto n = static_cast<std::size_t>(std::floor(expected));
        if (unit(rng) < expected - std::floor(expected)) {
            ++n;
        }
        const Triangle &t = ct.triangle;
        for (std::size_t i = 0; i < n; ++i) {
            const double r1 = std::sqrt(unit(rng));
            const double r2 = unit(rng);
            const Vec3 p = (1.0 - r1) * t.v[0] + (r1 * (1.0 - r2)) * t.v[1] + (r1 * r2) * t.v[2];
            pc.points.push_back({p, ct.color});
        }
    }
    return pc;
}

/// Occupancy grid used to separate surface that can be seen from outside from
/// surface enclosed in air pockets.
class OccupancyGrid {
public:
    enum Label : std::uint8_t { interior_air = 0, exterior_air = 1, solid = 2, surface_solid = 3 };

    OccupancyGrid(const std::vector<Triangle> &tris, const Aabb &extra, double voxel) : m_voxel(voxel) {
        if (!(voxel > 0.0)) {
            throw ConfigError("occupancy voxel size must be positive");
        }
        Aabb box = extra;
        for (const Triangle &t : tris) {
            box.extend(t.bounds());
        }
        if (box.empty()) {
            box.extend(Vec3{0, 0, 0});
        }
        // Two voxels of padding guarantee an air shell around everything.
        m_origin = box.lo - Vec3{2 * voxel, 2 * voxel, 2 * voxel};
        for (int a = 0; a < 3; ++a) {
            m_dims[a] = static_cast<std::int64_t>(std::floor((box.hi[a] - box.lo[a]) / voxel)) + 5;
        }
        m_labels.assign(static_cast<std::size_t>(m_dims[0] * m_dims[1] * m_dims[2]), interior_air);
        mark_solid(tris);
        flood_exterior();
        mark_surface();
    }

    double voxel() const { return m_voxel; }
    std::array<std::int64_t, 3> dims() const { return m_dims; }

    Label label(std::int64_t i, std::int64_t j, std::int64_t k) const {
        if (i < 0 || j < 0 || k < 0 || i >= m_dims[0] || j >= m_dims[1] || k >= m_dims[2]) {
            return exterior_air;
        }
        return static_cast<Label>(m_labels[index(i, j, k)]);
    }

    /// True when some voxel containing p (faces included) is exterior air or solid touching it.
    bool visible(Vec3 p) const {
        std::array<std::array<std::int64_t, 2>, 3> candidates{};
        std::array<int, 3> counts{};
        for (int a = 0; a < 3; ++a) {
            // Points within rounding distance of a voxel face belong to both sides.
            const double g = (p[a] - m_origin[a]) / m_voxel;
            const auto f = static_cast<std::int64_t>(std::floor(g + kFaceTolerance));
            const auto b = static_cast<std::int64_t>(std::floor(g - kFaceTolerance));
            candidates[a][0] = f;
            candidates[a][1] = b;
            counts[a] = b == f ? 1 : 2;
        }
        for (int x = 0; x < counts[0]; ++x) {
            for (int y = 0; y < counts[1]; ++y) {
                for (int z = 0; z < counts[2]; ++z) {
                    const Label l = label(candidates[0][x], candidates[1][y], candidates[2][z]);
                    if (l == exterior_air || l == surface_solid) {
                        return true;
                    }
                }
            }
        }
        return false;
    }

private:
    static constexpr double kFaceTolerance = 1e-6; // in voxel units

    std::size_t index(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return static_cast<std::size_t>((k * m_dims[1] + j) * m_dims[0] + i);
    }

    void mark_solid(const std::vector<Triangle> &tris) {
        const Vec3 half{m_voxel / 2, m_voxel / 2, m_voxel / 2};
        for (const Triangle &t : tris) {
            const Aabb tb = t.bounds();
            std::array<std::int64_t, 3> lo{}, hi{};
            for (int a = 0; a < 3; ++a) {
                lo[a] = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((tb.lo[a] - m_origin[a]) / m_voxel)) - 1);
                hi[a] = std::min<std::int64_t>(m_dims[a] - 1,
                                               static_cast<std::int64_t>(std::floor((tb.hi[a] - m_origin[a]) / m_voxel)) + 1);
            }
            for (std::int64_t k = lo[2]; k <= hi[2]; ++k) {
                for (std::int64_t j = lo[1]; j <= hi[1]; ++j) {
                    for (std::int64_t i = lo[0]; i <= hi[0]; ++i) {
                        std::uint8_t &cell = m_labels[index(i, j, k)];
                        if (cell == solid) {
                            continue;
                        }
                        const Vec3 centre = m_origin + Vec3{(i + 0.5) * m_voxel, (j + 0.5) * m_voxel, (k + 0.5) * m_voxel};
                        if (triangle_box_overlap(t, centre, half)) {
                            cell = solid;
                        }
                    }
                }
            }
        }
    }

    void flood_exterior() {
        std::vector<std::size_t> stack{index(0, 0, 0)};
        m_labels[stack.back()] = exterior_air;
        const std::int64_t nx = m_dims[0], ny = m_dims[1], nz = m_dims[2];
        while (!stack.empty()) {
            const std::size_t id = stack.back();
            stack.pop_back();
            const auto i = static_cast<std::int64_t>(id % nx);
            const auto j = static_cast<std::int64_t>((id / nx) % ny);
            const auto k = static_cast<std::int64_t>(id / (nx * ny));
            const std::array<std::array<std::int64_t, 3>, 6> next = {
                {{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k}, {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}}};
            for (const auto &n : next) {
                if (n[0] < 0 || n[1] < 0 || n[2] < 0 || n[0] >= nx || n[1] >= ny || n[2] >= nz) {
                    continue;
                }
                const std::size_t nid = index(n[0], n[1], n[2]);
                if (m_labels[nid] == interior_air) {
                    m_labels[nid] = exterior_air;
                    stack.push_back(nid);
                }
            }
        }
    }

    void mark_surface() {
        for (std::int64_t k = 0; k < m_dims[2]; ++k) {
            for (std::int64_t j = 0; j < m_dims[1]; ++j) {
                for (std::int64_t i = 0; i < m_dims[0]; ++i) {
                    std::uint8_t &cell = m_labels[index(i, j, k)];
                    if (cell != solid) {
                        continue;
                    }
                    bool touches = false;
                    for (int dz = -1; dz <= 1 && !touches; ++dz) {
                        for (int dy = -1; dy <= 1 && !touches; ++dy) {
                            for (int dx = -1; dx <= 1 && !touches; ++dx) {
                                touches = label(i + dx, j + dy, k + dz) == exterior_air;
                            }
                        }
                    }
                    if (touches) {
                        cell = surface_solid;
                    }
                }
            }
        }
    }

    double m_voxel;
    Vec3 m_origin;
    std::array<std::int64_t, 3> m_dims{};
    std::vector<std::uint8_t> m_labels;
};

inline constexpr double kInteriorVoxel = 0.25;

/// Keeps the points that lie in exterior air or in solid voxels adjacent to it.
/// Apply before noise is added.
inline PointCloud filter_interior(const PointCloud &points, const std::vector<Triangle> &tris,
                                  double voxel = kInteriorVoxel) {
    const OccupancyGrid grid(tris, points.bounds(), voxel);
    PointCloud out;
    for (const ColoredPoint &p : points.points) {
        if (grid.visible(p.position)) {
            out.points.push_back(p);
        }
    }
    return out;
}

inline PointCloud filter_interior(const PointCloud &points, const BuildingAbstraction &b, const AssetCatalog &catalog,
                                  double voxel = kInteriorVoxel) {
    return filter_interior(points, plain_triangles(building_triangles(b, catalog)), voxel);
}

inline constexpr double kDefaultDensity = 40.0;

struct RenderResult {
    PointCloud noisy;
    PointCloud clean; // same points before noise, same order
    std::size_t sampled = 0;
};

inline RenderResult render_detailed(const BuildingAbstraction &b, const AssetCatalog &catalog, double density,
                                    std::uint64_t seed) {
    const auto tris = building_triangles(b, catalog);
    RenderResult r;
    const PointCloud sampled = sample_surface(tris, density, mix_seed(seed, 1));
    r.sampled = sampled.size();
    r.clean = filter_interior(sampled, plain_triangles(tris));
    r.noisy = r.clean;
    if (b.noise_level > 0.0) {
        std::mt19937_64 rng(mix_seed(seed, 2));
        std::normal_distribution<double> noise(0.0, b.noise_level);
        for (ColoredPoint &p : r.noisy.points) {
            p.position = p.position + Vec3{noise(rng), noise(rng), noise(rng)};
        }
    }
    return r;
}

inline PointCloud render(const BuildingAbstraction &b, const AssetCatalog &catalog, double density,
                         std::uint64_t seed) {
    return render_detailed(b, catalog, density, seed).noisy;
}

// ---------------------------------------------------------------------------
// Voxel partition

using VoxelKey = std::array<std::int64_t, 3>;

struct VoxelGrid {
    double edge = 7.0;
    std::uint32_t max_points = 300;
    std::map<VoxelKey, std::vector<std::uint32_t>> voxels; // indices into the source cloud

    std::size_t size() const { return voxels.size(); }
    Vec3 center(const VoxelKey &k) const { return {(k[0] + 0.5) * edge, (k[1] + 0.5) * edge, (k[2] + 0.5) * edge}; }

    std::size_t point_count() const {
        std::size_t n = 0;
        for (const auto &[k, ids] : voxels) {
            n += ids.size();
        }
        return n;
    }

    friend bool operator==(const VoxelGrid &, const VoxelGrid &) = default;
};

inline VoxelKey voxel_of(Vec3 p, double edge) {
    return {static_cast<std::int64_t>(std::floor(p.x / edge)), static_cast<std::int64_t>(std::floor(p.y / edge)),
            static_cast<std::int64_t>(std::floor(p.z / edge))};
}

inline VoxelGrid voxelize(const PointCloud &pc, double edge = 7.0, std::uint32_t max_points = 300,
                          std::uint64_t seed = 0) {
    if (!(edge > 0.0)) {
        throw ConfigError("voxel edge must be positive");
    }
    VoxelGrid g;
    g.edge = edge;
    g.max_points = max_points;
    for (std::uint32_t i = 0; i < pc.points.size(); ++i) {
        g.voxels[voxel_of(pc.points[i].position, edge)].push_back(i);
    }
    std::mt19937_64 rng(seed);
    for (auto &[key, ids] : g.voxels) {
        if (ids.size() > max_points) {
            std::vector<std::uint32_t> kept;
            kept.reserve(max_points);
            std::sample(ids.begin(), ids.end(), std::back_inserter(kept), max_points, rng);
            ids = std::move(kept);
        }
    }
    return g;
}

/// Removes each voxel independently with probability `rate`.
inline VoxelGrid dropout_voxels(const VoxelGrid &g, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw ConfigError("dropout rate must lie in [0, 1]");
    }
    VoxelGrid out = g;
    out.voxels.clear();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto &[key, ids] : g.voxels) {
        if (!(unit(rng) < rate)) {
            out.voxels.emplace(key, ids);
        }
    }
    return out;
}

/// The retained points of a grid as a cloud (voxel order, then index order).
inline PointCloud gather(const PointCloud &pc, const VoxelGrid &g) {
    PointCloud out;
    for (const auto &[key, ids] : g.voxels) {
        for (std::uint32_t i : ids) {
            out.points.push_back(pc.points.at(i));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Perturbations

namespace detail {

inline bool inside_cube(Vec3 p, Vec3 c, double half) {
    return std::abs(p.x - c.x) <= half && std::abs(p.y - c.y) <= half && std::abs(p.z - c.z) <= half;
}

inline void require_points(const PointCloud &pc) {
    if (pc.empty()) {
        throw ConfigError("perturbation needs a non-empty point cloud");
    }
}

} // namespace detail

inline PointCloud perturb_drop_random(const PointCloud &pc, double block_edge, std::uint32_t n_blocks,
                                      std::uint64_t seed) {
    detail::require_points(pc);
    const Aabb box = pc.bounds();
    std::mt19937_64 rng(seed);
    std::vector<Vec3> centres;
    for (std::uint32_t i = 0; i < n_blocks; ++i) {
        Vec3 c;
        for (int a = 0; a < 3; ++a) {
            c[a] = std::uniform_real_distribution<double>(box.lo[a], std::nextafter(box.hi[a], INFINITY))(rng);
        }
        centres.push_back(c);
    }
    PointCloud out;
    for (const ColoredPoint &p : pc.points) {
        const bool dropped = std::any_of(centres.begin(), centres.end(),
                                         [&](Vec3 c) { return detail::inside_cube(p.position, c, block_edge / 2); });
        if (!dropped) {
            out.points.push_back(p);
        }
    }
    return out;
}

inline PointCloud perturb_drop_center(const PointCloud &pc, double block_edge) {
    detail::require_points(pc);
    const Vec3 c = pc.bounds().center();
    PointCloud out;
    for (const ColoredPoint &p : pc.points) {
        if (!detail::inside_cube(p.position, c, block_edge / 2)) {
            out.points.push_back(p);
        }
    }
    return out;
}

/// Moves points below the median coordinate on `axis` by -gap/2 and the rest by +gap/2.
inline PointCloud perturb_split(const PointCloud &pc, double gap, int axis = 0) {
    detail::require_points(pc);
    if (gap < 0.0) {
        throw ConfigError("split gap must be non-negative");
    }
    if (axis < 0 || axis > 2) {
        throw ConfigError("split axis must be 0, 1 or 2");
    }
    std::vector<double> coords;
    coords.reserve(pc.size());
    for (const ColoredPoint &p : pc.points) {
        coords.push_back(p.position[axis]);
    }
    auto mid = coords.begin() + static_cast<std::ptrdiff_t>(coords.size() / 2);
    std::nth_element(coords.begin(), mid, coords.end());
    const double median = *mid;
    PointCloud out = pc;
    for (ColoredPoint &p : out.points) {
        p.position[axis] += p.position[axis] < median ? -gap / 2 : gap / 2;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Binary PLY: float32 x, y, z + uchar red, green, blue, little-endian.

inline std::uint8_t to_byte(double c) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

inline std::vector<std::uint8_t> ply_bytes(const PointCloud &pc) {
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\nelement vertex " << pc.size()
           << "\nproperty float x\nproperty float y\nproperty float z\n"
              "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    const std::string h = header.str();
    ByteWriter w;
    w.bytes({reinterpret_cast<const std::uint8_t *>(h.data()), h.size()});
    for (const ColoredPoint &p : pc.points) {
        w.f32(static_cast<float>(p.position.x));
        w.f32(static_cast<float>(p.position.y));
        w.f32(static_cast<float>(p.position.z));
        w.u8(to_byte(p.color.x));
        w.u8(to_byte(p.color.y));
        w.u8(to_byte(p.color.z));
    }
    return w.take();
}

inline PointCloud parse_ply(std::span<const std::uint8_t> bytes) {
    const std::string_view text(reinterpret_cast<const char *>(bytes.data()), bytes.size());
    const std::size_t end = text.find("end_header\n");
    if (text.substr(0, 4) != "ply\n" || end == std::string_view::npos) {
        throw IoError("not a PLY file");
    }
    std::istringstream header{std::string(text.substr(0, end))};
    std::string line;
    std::size_t count = 0;
    std::vector<std::string> properties;
    bool binary = false;
    while (std::getline(header, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            binary = fmt == "binary_little_endian";
        } else if (word == "element") {
            std::string name;
            ls >> name >> count;
            if (name != "vertex") {
                throw IoError("unsupported PLY element " + name);
            }
        } else if (word == "property") {
            std::string type, name;
            ls >> type >> name;
            properties.push_back(type + " " + name);
        }
    }
    const std::vector<std::string> expected = {"float x", "float y", "float z",
                                               "uchar red", "uchar green", "uchar blue"};
    if (!binary || properties != expected) {
        throw IoError("unsupported PLY layout (expected binary little-endian xyz float + rgb uchar)");
    }
    ByteReader r(bytes.subspan(end + std::string_view("end_header\n").size()));
    PointCloud pc;
    pc.points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        ColoredPoint p;
        p.position.x = r.f32();
        p.position.y = r.f32();
        p.position.z = r.f32();
        p.color.x = r.u8() / 255.0;
        p.color.y = r.u8() / 255.0;
        p.color.z = r.u8() / 255.0;
        pc.points.push_back(p);
    }
    return pc;
}

inline void write_ply(std::ostream &out, const PointCloud &pc) {
    const auto bytes = ply_bytes(pc);
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline PointCloud read_ply(std::istream &in) {
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_ply(bytes);
}

/// Placed building geometry as OBJ, one group per material colour.
inline void write_building_obj(std::ostream &out, const BuildingAbstraction &b, const AssetCatalog &catalog) {
    std::size_t next = 1;
    for (const ColoredTriangle &t : building_triangles(b, catalog)) {
        for (const Vec3 &v : t.triangle.v) {
            out << "v " << v.x << " " << v.z << " " << -v.y << " " << t.color.x << " " << t.color.y << " "
                << t.color.z << "\n";
        }
        out << "f " << next << " " << next + 1 << " " << next + 2 << "\n";
        next += 3;
    }
}

} // namespace procinv
