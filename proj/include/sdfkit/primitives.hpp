#pragma once

#include "sdfkit/mesh.hpp"

namespace sdfkit {

// Closed, outward-wound test shapes.
TriangleMesh make_box(const Vec3& lo, const Vec3& hi);
// 20 * 4^subdivisions triangles; subdivisions = 3 gives the 1280-triangle sphere.
TriangleMesh make_icosphere(int subdivisions, double radius, const Vec3& center = Vec3::Zero());

}  // namespace sdfkit
