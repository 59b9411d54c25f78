#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace procinv {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2 &, const Vec2 &) = default;
    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double length(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 lerp(Vec2 a, Vec2 b, double t) { return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t}; }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3 &, const Vec3 &) = default;
    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }

    double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
    double &operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double length(Vec3 a) { return std::sqrt(dot(a, a)); }

/// Unit quaternion (x, y, z, w).
struct Quaternion {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double w = 1.0;

    friend bool operator==(const Quaternion &, const Quaternion &) = default;

    double norm() const { return std::sqrt(x * x + y * y + z * z + w * w); }

    static Quaternion from_yaw(double radians) {
        return {0.0, 0.0, std::sin(radians / 2.0), std::cos(radians / 2.0)};
    }

    Vec3 rotate(Vec3 v) const {
        // v' = v + 2w (q x v) + 2 q x (q x v)
        const Vec3 q{x, y, z};
        const Vec3 t = 2.0 * cross(q, v);
        return v + w * t + cross(q, t);
    }
};

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    bool empty() const { return lo.x > hi.x; }

    void extend(Vec3 p) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }

    void extend(const Aabb &o) {
        if (o.empty()) {
            return;
        }
        extend(o.lo);
        extend(o.hi);
    }

    Vec3 center() const { return 0.5 * (lo + hi); }

    // Squared distance from p to the box (0 inside).
    double distance2(Vec3 p) const {
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            const double v = p[a];
            if (v < lo[a]) {
                d2 += (lo[a] - v) * (lo[a] - v);
            } else if (v > hi[a]) {
                d2 += (v - hi[a]) * (v - hi[a]);
            }
        }
        return d2;
    }
};

struct Triangle {
    std::array<Vec3, 3> v;

    double area() const { return 0.5 * length(cross(v[1] - v[0], v[2] - v[0])); }

    Aabb bounds() const {
        Aabb box;
        for (const Vec3 &p : v) {
            box.extend(p);
        }
        return box;
    }
};

/// Closest point on a triangle (Ericson, Real-Time Collision Detection, 5.1.5).
inline Vec3 closest_point_on_triangle(Vec3 p, const Triangle &t) {
    const Vec3 &a = t.v[0];
    const Vec3 &b = t.v[1];
    const Vec3 &c = t.v[2];
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = dot(ab, ap);
    const double d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) {
        return a;
    }
    const Vec3 bp = p - b;
    const double d3 = dot(ab, bp);
    const double d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) {
        return b;
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return a + v * ab;
    }
    const Vec3 cp = p - c;
    const double d5 = dot(ab, cp);
    const double d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) {
        return c;
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return a + w * ac;
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return a + v * ab + w * ac;
}

inline double point_triangle_distance(Vec3 p, const Triangle &t) {
    return length(p - closest_point_on_triangle(p, t));
}

/// Triangle/axis-aligned box overlap by the separating axis theorem (Akenine-Moeller).
/// Touching counts as overlap.
inline bool triangle_box_overlap(const Triangle &tri, Vec3 box_center, Vec3 half) {
    const Vec3 v0 = tri.v[0] - box_center;
    const Vec3 v1 = tri.v[1] - box_center;
    const Vec3 v2 = tri.v[2] - box_center;
    const Vec3 e0 = v1 - v0;
    const Vec3 e1 = v2 - v1;
    const Vec3 e2 = v0 - v2;

    auto axis_test = [&](Vec3 axis) {
        const double p0 = dot(v0, axis);
        const double p1 = dot(v1, axis);
        const double p2 = dot(v2, axis);
        const double r = half.x * std::abs(axis.x) + half.y * std::abs(axis.y) + half.z * std::abs(axis.z);
        const double mn = std::min({p0, p1, p2});
        const double mx = std::max({p0, p1, p2});
        return !(mn > r || mx < -r);
    };

    const std::array<Vec3, 3> edges{e0, e1, e2};
    const std::array<Vec3, 3> units{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
    for (const Vec3 &e : edges) {
        for (const Vec3 &u : units) {
            const Vec3 axis = cross(u, e);
            if (dot(axis, axis) > 0.0 && !axis_test(axis)) {
                return false;
            }
        }
    }
    for (int a = 0; a < 3; ++a) {
        const double mn = std::min({v0[a], v1[a], v2[a]});
        const double mx = std::max({v0[a], v1[a], v2[a]});
        if (mn > half[a] || mx < -half[a]) {
            return false;
        }
    }
    const Vec3 normal = cross(e0, e1);
    if (dot(normal, normal) > 0.0 && !axis_test(normal)) {
        return false;
    }
    return true;
}

inline double signed_area(const auto &polygon) {
    double twice = 0.0;
    const std::size_t n = polygon.size();
    for (std::size_t i = 0; i < n; ++i) {
        twice += cross(polygon[i], polygon[(i + 1) % n]);
    }
    return 0.5 * twice;
}

namespace detail {

inline int orientation_sign(Vec2 a, Vec2 b, Vec2 c) {
    const double v = cross(b - a, c - a);
    return (v > 0.0) - (v < 0.0);
}

inline bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

} // namespace detail

/// Closed-segment intersection test, collinear overlaps included.
inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    using detail::on_segment;
    using detail::orientation_sign;
    const int o1 = orientation_sign(a, b, c);
    const int o2 = orientation_sign(a, b, d);
    const int o3 = orientation_sign(c, d, a);
    const int o4 = orientation_sign(c, d, b);
    if (o1 != o2 && o3 != o4) {
        return true;
    }
    return (o1 == 0 && on_segment(a, b, c)) || (o2 == 0 && on_segment(a, b, d)) ||
           (o3 == 0 && on_segment(c, d, a)) || (o4 == 0 && on_segment(c, d, b));
}

/// True when no two polygon edges meet except adjacent edges at their shared vertex.
inline bool is_simple_polygon(const auto &polygon) {
    const std::size_t n = polygon.size();
    if (n < 3) {
        return false;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = polygon[i];
        const Vec2 b = polygon[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            const Vec2 c = polygon[j];
            const Vec2 d = polygon[(j + 1) % n];
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (!adjacent) {
                if (segments_intersect(a, b, c, d)) {
                    return false;
                }
                continue;
            }
            // Adjacent edges share one vertex; they must not fold back onto each other.
            const Vec2 shared = (j == i + 1) ? b : a;
            const Vec2 p = (j == i + 1) ? a : b;
            const Vec2 q = (j == i + 1) ? d : c;
            if (detail::orientation_sign(p, shared, q) == 0 && dot(p - shared, q - shared) > 0.0) {
                return false;
            }
        }
    }
    return true;
}

} // namespace procinv
