#pragma once

// Structural comparison of two buildings and point-to-geometry error.

#include "procinv/render.hpp"
#include "procinv/schema.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

namespace procinv {

struct MetricsReport {
    bool storey_count_correct = false;
    bool facade_count_correct = false;
    double storey_structure_accuracy = 0.0;
    double asset_precision = 0.0;
    double asset_recall = 0.0;
    double material_variation_iou = 0.0;
    double hsv_l2 = 0.0;
    bool hsv_intersection_empty = true; // hsv_l2 is 0 by definition then
    std::optional<double> geometric_error;
};

/// Index-free description of a facade's content; equal strings mean equal facades.
inline std::string facade_fingerprint(const Facade &f) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (const CellsPattern &p : f.cells_patterns) {
        os << "[" << p.segment_range.first_segment << "-" << p.segment_range.last_segment << ":";
        for (const Cell &c : p.cells) {
            os << "(" << c.cell_type << "@" << c.offset;
            if (c.modifier) {
                os << "|" << c.modifier->scale_x << "," << c.modifier->scale_y << "," << c.modifier->quaternion_3
                   << "," << c.modifier->quaternion_4;
            }
            os << ")";
        }
        os << "]";
    }
    return os.str();
}

inline std::size_t distinct_facade_count(const BuildingAbstraction &b) {
    std::set<std::string> prints;
    for (const Facade &f : b.facades) {
        prints.insert(facade_fingerprint(f));
    }
    return prints.size();
}

namespace detail {

inline std::vector<std::string> storey_fingerprints_by_elevation(const BuildingAbstraction &b) {
    std::vector<std::size_t> order(b.storeys.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return b.storeys[x].elevation < b.storeys[y].elevation; });
    std::vector<std::string> out;
    for (std::size_t i : order) {
        out.push_back(facade_fingerprint(b.facades.at(b.storeys[i].facade_index)));
    }
    return out;
}

template <typename T>
std::size_t intersection_size(const std::set<T> &a, const std::set<T> &b) {
    std::size_t n = 0;
    for (const T &x : a) {
        n += b.count(x);
    }
    return n;
}

} // namespace detail

/// Structural fields of the report (geometric_error left empty).
inline MetricsReport structural(const BuildingAbstraction &inferred, const BuildingAbstraction &truth) {
    MetricsReport r;
    r.storey_count_correct = inferred.storeys.size() == truth.storeys.size();
    r.facade_count_correct = distinct_facade_count(inferred) == distinct_facade_count(truth);

    const auto hat = detail::storey_fingerprints_by_elevation(inferred);
    const auto gt = detail::storey_fingerprints_by_elevation(truth);
    const std::size_t paired = std::min(hat.size(), gt.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < paired; ++i) {
        correct += hat[i] == gt[i] ? 1 : 0;
    }
    r.storey_structure_accuracy = paired == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(paired);

    const std::set<std::uint32_t> a_hat = used_assets(inferred);
    const std::set<std::uint32_t> a_gt = used_assets(truth);
    const auto common = static_cast<double>(detail::intersection_size(a_hat, a_gt));
    r.asset_precision = a_hat.empty() ? (a_gt.empty() ? 1.0 : 0.0) : common / static_cast<double>(a_hat.size());
    r.asset_recall = a_gt.empty() ? (a_hat.empty() ? 1.0 : 0.0) : common / static_cast<double>(a_gt.size());

    std::map<std::pair<std::uint32_t, std::uint32_t>, Hsv> v_hat, v_gt;
    for (const MaterialVariation &m : inferred.material_variations) {
        v_hat[{m.cell_type, m.material_slot}] = m.color;
    }
    for (const MaterialVariation &m : truth.material_variations) {
        v_gt[{m.cell_type, m.material_slot}] = m.color;
    }
    std::size_t inter = 0;
    double distance = 0.0;
    for (const auto &[key, c] : v_hat) {
        const auto it = v_gt.find(key);
        if (it == v_gt.end()) {
            continue;
        }
        ++inter;
        const Hsv &g = it->second;
        distance += std::sqrt((c.h - g.h) * (c.h - g.h) + (c.s - g.s) * (c.s - g.s) + (c.v - g.v) * (c.v - g.v));
    }
    const std::size_t uni = v_hat.size() + v_gt.size() - inter;
    r.material_variation_iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    r.hsv_intersection_empty = inter == 0;
    r.hsv_l2 = inter == 0 ? 0.0 : distance / static_cast<double>(inter);
    return r;
}

// ---------------------------------------------------------------------------
// Nearest-triangle queries

/// Bounding volume hierarchy over triangles. Queries return exactly the minimum
/// of point_triangle_distance over all triangles.
class TriangleBvh {
public:
    explicit TriangleBvh(std::vector<Triangle> tris) : m_tris(std::move(tris)) {
        if (m_tris.empty()) {
            return;
        }
        m_order.resize(m_tris.size());
        std::iota(m_order.begin(), m_order.end(), 0U);
        m_centroids.reserve(m_tris.size());
        for (const Triangle &t : m_tris) {
            m_centroids.push_back((1.0 / 3.0) * (t.v[0] + t.v[1] + t.v[2]));
        }
        m_nodes.reserve(2 * m_tris.size());
        m_nodes.resize(1);
        build_into(0, 0, static_cast<std::uint32_t>(m_tris.size()));
    }

    bool empty() const { return m_tris.empty(); }
    std::size_t size() const { return m_tris.size(); }
    const std::vector<Triangle> &triangles() const { return m_tris; }

    double nearest_distance(Vec3 p) const {
        if (m_tris.empty()) {
            throw GeometryError("distance query against an empty triangle set");
        }
        double best2 = std::numeric_limits<double>::infinity();
        std::vector<std::uint32_t> stack{0};
        while (!stack.empty()) {
            const Node &n = m_nodes[stack.back()];
            stack.pop_back();
            if (n.box.distance2(p) > best2) {
                continue;
            }
            if (n.count > 0) {
                for (std::uint32_t i = n.first; i < n.first + n.count; ++i) {
                    const double d = point_triangle_distance(p, m_tris[m_order[i]]);
                    best2 = std::min(best2, d * d);
                }
                continue;
            }
            // Visit the nearer child first.
            const std::uint32_t a = n.left;
            const std::uint32_t b = n.left + 1;
            if (m_nodes[a].box.distance2(p) <= m_nodes[b].box.distance2(p)) {
                stack.push_back(b);
                stack.push_back(a);
            } else {
                stack.push_back(a);
                stack.push_back(b);
            }
        }
        return std::sqrt(best2);
    }

private:
    struct Node {
        Aabb box;
        std::uint32_t left = 0; // index of the first child (children are adjacent)
        std::uint32_t first = 0;
        std::uint32_t count = 0; // > 0 for leaves
    };

    static constexpr std::uint32_t kLeafSize = 4;

    void build_into(std::uint32_t slot, std::uint32_t first, std::uint32_t count) {
        Aabb box, centres;
        for (std::uint32_t i = first; i < first + count; ++i) {
            box.extend(m_tris[m_order[i]].bounds());
            centres.extend(m_centroids[m_order[i]]);
        }
        m_nodes[slot].box = box;
        if (count <= kLeafSize) {
            m_nodes[slot].first = first;
            m_nodes[slot].count = count;
            return;
        }
        const Vec3 extent = centres.hi - centres.lo;
        int axis = 0;
        if (extent.y > extent[axis]) {
            axis = 1;
        }
        if (extent.z > extent[axis]) {
            axis = 2;
        }
        const std::uint32_t half = count / 2;
        std::nth_element(m_order.begin() + first, m_order.begin() + first + half, m_order.begin() + first + count,
                         [&](std::uint32_t x, std::uint32_t y) { return m_centroids[x][axis] < m_centroids[y][axis]; });
        const auto left = static_cast<std::uint32_t>(m_nodes.size());
        m_nodes.resize(left + 2);
        m_nodes[slot].left = left;
        m_nodes[slot].count = 0;
        build_into(left, first, half);
        build_into(left + 1, first + half, count - half);
    }

    std::vector<Triangle> m_tris;
    std::vector<std::uint32_t> m_order;
    std::vector<Vec3> m_centroids;
    std::vector<Node> m_nodes;
};

inline double brute_force_distance(Vec3 p, const std::vector<Triangle> &tris) {
    double best = std::numeric_limits<double>::infinity();
    for (const Triangle &t : tris) {
        best = std::min(best, point_triangle_distance(p, t));
    }
    return best;
}

/// Mean distance from the points to the nearest placed triangle of the building.
inline double geometric_error(const PointCloud &pc, const TriangleBvh &geometry) {
    if (pc.empty()) {
        throw ConfigError("geometric error needs a non-empty point cloud");
    }
    if (geometry.empty()) {
        throw GeometryError("building has no placed triangles");
    }
    double sum = 0.0;
    for (const ColoredPoint &p : pc.points) {
        sum += geometry.nearest_distance(p.position);
    }
    return sum / static_cast<double>(pc.size());
}

inline double geometric_error(const PointCloud &pc, const BuildingAbstraction &b, const AssetCatalog &catalog) {
    return geometric_error(pc, TriangleBvh(plain_triangles(building_triangles(b, catalog))));
}

// ---------------------------------------------------------------------------
// Corpus aggregation

struct EvaluationPair {
    BuildingAbstraction inferred;
    BuildingAbstraction truth;
    std::optional<PointCloud> cloud;
    double sigma = 0.0; // noise level the cloud was rendered with
};

struct CorpusTable {
    std::size_t pairs = 0;
    double storey_count_accuracy = 0.0;
    double facade_count_accuracy = 0.0;
    double storey_structure_accuracy = 0.0;
    double asset_precision = 0.0;
    double asset_recall = 0.0;
    double material_variation_iou = 0.0;
    double hsv_l2 = 0.0;            // over pairs with a non-empty variation intersection
    std::size_t hsv_pairs = 0;
    std::optional<double> geometric_error;            // inferred buildings vs clouds
    std::optional<double> ground_truth_geometric_error; // ground-truth buildings vs clouds
};

struct CurvePoint {
    double sigma = 0.0;
    double inferred_error = 0.0;
    double ground_truth_error = 0.0;
    std::size_t count = 0;
};

struct CorpusEvaluation {
    CorpusTable table;
    std::vector<MetricsReport> reports;
    std::vector<CurvePoint> curve; // by sigma, only when clouds were given
};

inline CorpusEvaluation evaluate_corpus(const std::vector<EvaluationPair> &pairs, const AssetCatalog &catalog) {
    CorpusEvaluation out;
    CorpusTable &t = out.table;
    t.pairs = pairs.size();
    if (pairs.empty()) {
        return out;
    }
    std::map<double, CurvePoint> curve;
    double geo = 0.0, geo_gt = 0.0;
    std::size_t geo_n = 0;
    for (const EvaluationPair &p : pairs) {
        MetricsReport r = structural(p.inferred, p.truth);
        t.storey_count_accuracy += r.storey_count_correct ? 1.0 : 0.0;
        t.facade_count_accuracy += r.facade_count_correct ? 1.0 : 0.0;
        t.storey_structure_accuracy += r.storey_structure_accuracy;
        t.asset_precision += r.asset_precision;
        t.asset_recall += r.asset_recall;
        t.material_variation_iou += r.material_variation_iou;
        if (!r.hsv_intersection_empty) {
            t.hsv_l2 += r.hsv_l2;
            ++t.hsv_pairs;
        }
        if (p.cloud && !p.cloud->empty()) {
            r.geometric_error = geometric_error(*p.cloud, p.inferred, catalog);
            const double gt = p.inferred == p.truth ? *r.geometric_error : geometric_error(*p.cloud, p.truth, catalog);
            geo += *r.geometric_error;
            geo_gt += gt;
            ++geo_n;
            CurvePoint &c = curve[p.sigma];
            c.sigma = p.sigma;
            c.inferred_error += *r.geometric_error;
            c.ground_truth_error += gt;
            ++c.count;
        }
        out.reports.push_back(r);
    }
    const auto n = static_cast<double>(pairs.size());
    t.storey_count_accuracy /= n;
    t.facade_count_accuracy /= n;
    t.storey_structure_accuracy /= n;
    t.asset_precision /= n;
    t.asset_recall /= n;
    t.material_variation_iou /= n;
    if (t.hsv_pairs > 0) {
        t.hsv_l2 /= static_cast<double>(t.hsv_pairs);
    }
    if (geo_n > 0) {
        t.geometric_error = geo / static_cast<double>(geo_n);
        t.ground_truth_geometric_error = geo_gt / static_cast<double>(geo_n);
    }
    for (auto &[sigma, c] : curve) {
        c.inferred_error /= static_cast<double>(c.count);
        c.ground_truth_error /= static_cast<double>(c.count);
        out.curve.push_back(c);
    }
    return out;
}

namespace detail {

inline std::vector<std::pair<std::string, std::string>> table_rows(const CorpusTable &t) {
    auto pct = [](double v) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(1) << 100.0 * v << "%";
        return os.str();
    };
    auto num = [](double v) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(3) << v;
        return os.str();
    };
    std::vector<std::pair<std::string, std::string>> rows = {
        {"Accuracy number of storeys", pct(t.storey_count_accuracy)},
        {"Accuracy number of facades", pct(t.facade_count_accuracy)},
        {"Accuracy storeys structure", pct(t.storey_structure_accuracy)},
        {"Assets: precision", pct(t.asset_precision)},
        {"Assets: recall", pct(t.asset_recall)},
        {"IoU Material Variations", pct(t.material_variation_iou)},
        {"L2 HSV Color Distance", num(t.hsv_l2)},
    };
    if (t.geometric_error) {
        rows.emplace_back("Geometric error [m]", num(*t.geometric_error));
        rows.emplace_back("Geometric error, ground truth [m]", num(*t.ground_truth_geometric_error));
    }
    return rows;
}

} // namespace detail

/// Aligned text table in the row order of the structural evaluation figure.
inline std::string format_table(const CorpusTable &t) {
    if (t.pairs == 0) {
        return "";
    }
    const auto rows = detail::table_rows(t);
    std::size_t width = 0;
    for (const auto &[name, value] : rows) {
        width = std::max(width, name.size());
    }
    std::ostringstream os;
    for (const auto &[name, value] : rows) {
        os << std::left << std::setw(static_cast<int>(width) + 2) << name << std::right << std::setw(8) << value
           << "\n";
    }
    return os.str();
}

inline std::string table_csv(const CorpusTable &t) {
    std::ostringstream os;
    os << "metric,value\n";
    if (t.pairs == 0) {
        return os.str();
    }
    os << std::setprecision(10);
    os << "storey_count_accuracy," << t.storey_count_accuracy << "\n"
       << "facade_count_accuracy," << t.facade_count_accuracy << "\n"
       << "storey_structure_accuracy," << t.storey_structure_accuracy << "\n"
       << "asset_precision," << t.asset_precision << "\n"
       << "asset_recall," << t.asset_recall << "\n"
       << "material_variation_iou," << t.material_variation_iou << "\n"
       << "hsv_l2," << t.hsv_l2 << "\n";
    if (t.geometric_error) {
        os << "geometric_error," << *t.geometric_error << "\n"
           << "ground_truth_geometric_error," << *t.ground_truth_geometric_error << "\n";
    }
    return os.str();
}

inline std::string curve_csv(const std::vector<CurvePoint> &curve) {
    std::ostringstream os;
    os << "sigma,inferred_error,ground_truth_error,count\n" << std::setprecision(10);
    for (const CurvePoint &c : curve) {
        os << c.sigma << "," << c.inferred_error << "," << c.ground_truth_error << "," << c.count << "\n";
    }
    return os.str();
}

} // namespace procinv
