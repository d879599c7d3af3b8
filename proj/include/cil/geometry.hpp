#ifndef CIL_GEOMETRY_HPP
#define CIL_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <stdexcept>

namespace cil {

/// 3D point/vector in millimeters, world frame.
struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        if (n == 0.0) throw std::invalid_argument("cannot normalize zero vector");
        return *this / n;
    }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Continuous position in mm, world frame.
using WorldPoint = Vec3;

inline double distance(const WorldPoint& a, const WorldPoint& b) {
    return (a - b).norm();
}

/// Axis-aligned box in mm.
struct Box3 {
    Vec3 min, max;

    bool contains(const Vec3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
               p.z >= min.z && p.z <= max.z;
    }
    Vec3 center() const { return (min + max) * 0.5; }
    Vec3 size() const { return max - min; }
    Vec3 clamp(const Vec3& p) const {
        auto c = [](double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); };
        return {c(p.x, min.x, max.x), c(p.y, min.y, max.y), c(p.z, min.z, max.z)};
    }
};

/// Rotation matrix, row-major 3x3.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += m[3 * i + k] * o.m[3 * k + j];
                r.m[3 * i + j] = s;
            }
        return r;
    }

    static Mat3 rotation_u(double a) {
        double c = std::cos(a), s = std::sin(a);
        return Mat3{{1, 0, 0, 0, c, -s, 0, s, c}};
    }
    static Mat3 rotation_v(double a) {
        double c = std::cos(a), s = std::sin(a);
        return Mat3{{c, 0, s, 0, 1, 0, -s, 0, c}};
    }
    static Mat3 rotation_w(double a) {
        double c = std::cos(a), s = std::sin(a);
        return Mat3{{c, -s, 0, s, c, 0, 0, 0, 1}};
    }
    /// Rotation by `angle` about axis `axis` (Rodrigues); the axis is
    /// normalized here, a zero axis throws.
    static Mat3 axis_angle(const Vec3& axis, double angle) {
        Vec3 d = axis.normalized();
        double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
        return Mat3{{t * d.x * d.x + c,       t * d.x * d.y - s * d.z, t * d.x * d.z + s * d.y,
                     t * d.x * d.y + s * d.z, t * d.y * d.y + c,       t * d.y * d.z - s * d.x,
                     t * d.x * d.z - s * d.y, t * d.y * d.z + s * d.x, t * d.z * d.z + c}};
    }
};

}  // namespace cil

#endif
