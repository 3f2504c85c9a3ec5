#pragma once

#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace sdfkit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Tri = std::array<std::uint32_t, 3>;

// Rounds each coordinate to float32 precision. Out of line on purpose: GCC 11
// with AVX-512 loses the rounding when the conversion is vectorized inline.
Vec3 round_to_float(const Vec3& p);

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void expand(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    void expand(const Aabb& b) {
        min = min.cwiseMin(b.min);
        max = max.cwiseMax(b.max);
    }
    bool empty() const { return (min.array() > max.array()).any(); }
    Vec3 extent() const { return max - min; }
    Vec3 center() const { return 0.5 * (min + max); }
    double surface_area() const {
        if (empty()) return 0.0;
        const Vec3 e = extent();
        return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.z() * e.x());
    }
    bool contains(const Aabb& b, double tol = 0.0) const {
        return (b.min.array() >= min.array() - tol).all() && (b.max.array() <= max.array() + tol).all();
    }
    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    // Squared distance from p to the box, zero inside.
    double squared_distance(const Vec3& p) const {
        const Vec3 d = (min - p).cwiseMax(p - max).cwiseMax(0.0);
        return d.squaredNorm();
    }
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or unreadable input file; line is 0 for binary formats.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

}  // namespace sdfkit
