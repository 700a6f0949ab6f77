#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cuspfem/geometry.hpp"

namespace cuspfem {

struct BoundaryEdge {
    std::array<int, 2> nodes;
    SegmentTag tag;
};

/// Conforming P1 triangulation of a (tip-truncated) cusp domain.  Triangles are
/// counter-clockwise; boundary edges follow the boundary counter-clockwise.
struct Mesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    double grading_exponent = 1.0;
    double tip_cutoff = 0.0;

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_triangles() const { return static_cast<int>(triangles.size()); }
};

/// Graded triangulation: rows of a mapped strip x1 = s * phi(t) on the peak,
/// Delaunay on the cap.  The target element size at height t is
/// h0 * t^(grading * (lambda - 1) / lambda), never wider than the section 2 * phi(t).
/// The tip is cut at domain.tip_cutoff() when positive, else at h0^lambda.
/// Throws MeshingError if the peak is too sharp for h0.
Mesh generate_graded_mesh(const CuspDomain& domain, double h0, double grading_exponent = 2.0);

/// Red refinement: every triangle splits into four; boundary midpoints are
/// placed on the exact boundary of `domain`.
Mesh refine(const Mesh& mesh, const CuspDomain& domain);

double signed_area(const Mesh& mesh, int triangle);
double total_area(const Mesh& mesh);
/// Smallest interior angle over all triangles, in degrees.
double min_angle_degrees(const Mesh& mesh);
double max_edge_length(const Mesh& mesh);
/// Area enclosed by the boundary-edge loop (shoelace formula).
double boundary_polygon_area(const Mesh& mesh);

/// Returns a description of the first violated conformity condition, or nullopt.
std::optional<std::string> check_conformity(const Mesh& mesh);

/// Nodes incident to a boundary edge other than the tip cut.
std::vector<int> robin_boundary_nodes(const Mesh& mesh);

/// Relabels nodes: new index of old node i is permutation[i].
Mesh renumber(const Mesh& mesh, const std::vector<int>& permutation);

// Text format "cuspfem-mesh v1"; see README.
void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);

}  // namespace cuspfem
