#pragma once

#include <array>
#include <vector>

#include "cuspfem/geometry.hpp"

namespace cuspfem::detail {

/// Bowyer-Watson Delaunay triangulation of a point set, inserting points in the
/// given order.  Returns counter-clockwise triangles over the convex hull.
std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2>& points);

}  // namespace cuspfem::detail
