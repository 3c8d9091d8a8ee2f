#pragma once

#include <map>
#include <span>
#include <vector>

#include "bwm/mesh.hpp"

namespace bwm::mesh {

// Cotangents are clamped to this magnitude so near-degenerate triangles stay finite.
inline constexpr double kCotangentClamp = 1e4;

// One row of the cotangent Laplacian. Weights are the unscaled edge weights
// (cot a + cot b) / 2; the Laplace-Beltrami row is the same row divided by area.
struct LaplacianRow {
  int vertex = 0;
  std::vector<std::pair<int, double>> weights;  // off-diagonal, ascending by column
  double diagonal = 0.0;                        // -(sum of weights)
  double area = 0.0;                            // mixed Voronoi area (m^2)
  int tag = 0;                                  // which geometry the weights came from
};

class LaplacianOperator {
 public:
  LaplacianOperator() = default;
  LaplacianOperator(std::size_t vertex_count, std::vector<LaplacianRow> rows);

  std::size_t vertex_count() const noexcept { return vertex_count_; }
  const std::vector<LaplacianRow>& rows() const noexcept { return rows_; }
  const LaplacianRow* find(int vertex) const;

  // Rows of both operators; they must cover disjoint vertex sets.
  LaplacianOperator merged(const LaplacianOperator& other) const;

 private:
  std::size_t vertex_count_ = 0;
  std::vector<LaplacianRow> rows_;  // ascending by vertex
};

// Cotangent-weight rows for the requested vertices, computed from `positions`.
// Throws Numeric if a triangle in the support of a requested row is degenerate.
LaplacianOperator cotangent_laplacian(std::span<const Vec3> positions, const Topology& topology,
                                      const VertexRegion& rows, int tag = 0);

// delta_i = (1 / A_i) * sum_j w_ij (p_j - p_i), one entry per row (in row order).
std::vector<Vec3> differential_coordinates(const LaplacianOperator& laplacian, std::span<const Vec3> positions);

struct ReconstructOptions {
  double tolerance = 1e-8;  // relative residual of the row system
  int max_refinements = 5;
};

struct ReconstructReport {
  double relative_residual = 0.0;
  int refinements = 0;
};

// Solves for free-vertex positions from target differential coordinates.
// Constrained vertices are eliminated and copied to the output unchanged. The
// operator must contain a row for every unconstrained vertex; `deltas` is
// aligned with laplacian.rows().
std::vector<Vec3> reconstruct(const LaplacianOperator& laplacian, std::span<const Vec3> deltas,
                              const std::map<int, Vec3>& hard_constraints, const ReconstructOptions& options = {},
                              ReconstructReport* report = nullptr);

}  // namespace bwm::mesh
