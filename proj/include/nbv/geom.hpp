#pragma once

#include <algorithm>
#include <cmath>

namespace nbv {

constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) { return v / norm(v); }
inline Vec3 cwise_min(const Vec3& a, const Vec3& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline Vec3 cwise_max(const Vec3& a, const Vec3& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}
inline Vec3 cwise_abs(const Vec3& v) { return {std::fabs(v.x), std::fabs(v.y), std::fabs(v.z)}; }
inline double max_component(const Vec3& v) { return std::max(v.x, std::max(v.y, v.z)); }

// Angle between unit vectors, robust against rounding at the codomain edges.
inline double angle_between(const Vec3& a, const Vec3& b) {
    return std::acos(std::clamp(dot(a, b), -1.0, 1.0));
}

// Unit quaternion.
struct Rotation {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    Rotation() = default;
    Rotation(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

    static Rotation identity() { return {}; }

    static Rotation from_axis_angle(const Vec3& axis, double angle) {
        const Vec3 u = nbv::normalized(axis);
        const double h = 0.5 * angle;
        const double s = std::sin(h);
        return {std::cos(h), u.x * s, u.y * s, u.z * s};
    }

    // Columns are the rotated basis vectors (world-from-local).
    static Rotation from_basis(const Vec3& cx, const Vec3& cy, const Vec3& cz);

    Rotation conjugate() const { return {w, -x, -y, -z}; }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Rotation normalized() const {
        const double n = norm();
        return {w / n, x / n, y / n, z / n};
    }

    Rotation operator*(const Rotation& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    Vec3 apply(const Vec3& v) const {
        const Vec3 q{x, y, z};
        const Vec3 t = 2.0 * cross(q, v);
        return v + w * t + cross(q, t);
    }
};

inline Rotation Rotation::from_basis(const Vec3& cx, const Vec3& cy, const Vec3& cz) {
    // Shepperd's method on the column matrix [cx cy cz].
    const double m00 = cx.x, m01 = cy.x, m02 = cz.x;
    const double m10 = cx.y, m11 = cy.y, m12 = cz.y;
    const double m20 = cx.z, m21 = cy.z, m22 = cz.z;
    const double tr = m00 + m11 + m22;
    Rotation q;
    if (tr > 0.0) {
        double s = std::sqrt(tr + 1.0) * 2.0;
        q.w = 0.25 * s;
        q.x = (m21 - m12) / s;
        q.y = (m02 - m20) / s;
        q.z = (m10 - m01) / s;
    } else if (m00 > m11 && m00 > m22) {
        double s = std::sqrt(1.0 + m00 - m11 - m22) * 2.0;
        q.w = (m21 - m12) / s;
        q.x = 0.25 * s;
        q.y = (m01 + m10) / s;
        q.z = (m02 + m20) / s;
    } else if (m11 > m22) {
        double s = std::sqrt(1.0 + m11 - m00 - m22) * 2.0;
        q.w = (m02 - m20) / s;
        q.x = (m01 + m10) / s;
        q.y = 0.25 * s;
        q.z = (m12 + m21) / s;
    } else {
        double s = std::sqrt(1.0 + m22 - m00 - m11) * 2.0;
        q.w = (m10 - m01) / s;
        q.x = (m02 + m20) / s;
        q.y = (m12 + m21) / s;
        q.z = 0.25 * s;
    }
    return q.normalized();
}

struct Pose {
    Rotation rotation;
    Vec3 translation;

    static Pose identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rotation.apply(p) + translation; }
    Vec3 apply_dir(const Vec3& d) const { return rotation.apply(d); }

    Pose inverse() const {
        const Rotation rc = rotation.conjugate();
        return {rc, -rc.apply(translation)};
    }

    Pose operator*(const Pose& o) const {
        return {(rotation * o.rotation).normalized(), rotation.apply(o.translation) + translation};
    }
};

struct Aabb {
    Vec3 min;
    Vec3 max;

    Vec3 center() const { return (min + max) * 0.5; }
    Vec3 extent() const { return max - min; }
    double volume() const {
        const Vec3 e = extent();
        return e.x * e.y * e.z;
    }
    bool contains(const Vec3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
               p.z >= min.z && p.z <= max.z;
    }
    Aabb intersect(const Aabb& o) const { return {cwise_max(min, o.min), cwise_min(max, o.max)}; }
    bool empty() const { return min.x > max.x || min.y > max.y || min.z > max.z; }
    Vec3 clamp(const Vec3& p) const { return cwise_min(cwise_max(p, min), max); }
    Aabb padded(double m) const { return {min - Vec3{m, m, m}, max + Vec3{m, m, m}}; }
};

// Intersection of the line p(t) = origin + t*dir with the box. Returns false when
// the line misses; otherwise [t0, t1] is the full chord (t may be negative).
bool line_aabb_clip(const Vec3& origin, const Vec3& dir, const Aabb& box, double& t0, double& t1);

// Orthonormal frame whose first axis is `dir` (unit). The second axis lies in the
// plane spanned by `dir` and the up vector (world z, or world x when dir is near z).
struct Frame {
    Vec3 axis;    // the given direction
    Vec3 side;    // normalize(up x axis)
    Vec3 binormal;  // axis x side
};
Frame frame_from_direction(const Vec3& dir);

}  // namespace nbv
