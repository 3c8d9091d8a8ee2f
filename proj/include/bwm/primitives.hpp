#pragma once

#include "bwm/mesh.hpp"

namespace bwm::mesh {

// Subdivided icosahedron projected onto a sphere; 10 * 4^s + 2 vertices.
TriangleMesh make_icosphere(int subdivisions, double radius = 1.0);

// Regular planar grid in z = 0 with (nx + 1) x (ny + 1) vertices, each cell split
// into two triangles along alternating diagonals.
TriangleMesh make_grid(int nx, int ny, double spacing = 1.0);

// Axis-aligned cube [0, edge]^3, 8 vertices, 12 outward-facing triangles.
TriangleMesh make_cube(double edge = 1.0);

}  // namespace bwm::mesh
