#include "bwm/laplacian.hpp"

#include <algorithm>
#include <cmath>

#include "bwm/error.hpp"

namespace bwm::mesh {

LaplacianOperator::LaplacianOperator(std::size_t vertex_count, std::vector<LaplacianRow> rows)
    : vertex_count_(vertex_count), rows_(std::move(rows)) {
  std::sort(rows_.begin(), rows_.end(), [](const auto& a, const auto& b) { return a.vertex < b.vertex; });
  for (std::size_t r = 1; r < rows_.size(); ++r) {
    if (rows_[r].vertex == rows_[r - 1].vertex) {
      fail(ErrorKind::Data, "duplicate Laplacian row for vertex " + std::to_string(rows_[r].vertex));
    }
  }
}

const LaplacianRow* LaplacianOperator::find(int vertex) const {
  auto it = std::lower_bound(rows_.begin(), rows_.end(), vertex,
                             [](const LaplacianRow& row, int v) { return row.vertex < v; });
  return it != rows_.end() && it->vertex == vertex ? &*it : nullptr;
}

LaplacianOperator LaplacianOperator::merged(const LaplacianOperator& other) const {
  if (other.vertex_count_ != vertex_count_) fail(ErrorKind::Data, "merging Laplacians of different meshes");
  std::vector<LaplacianRow> rows = rows_;
  rows.insert(rows.end(), other.rows_.begin(), other.rows_.end());
  return {vertex_count_, std::move(rows)};
}

namespace {

double clamped_cot(const Vec3& a, const Vec3& b) {
  const double c = a.dot(b) / a.cross(b).norm();
  return std::clamp(c, -kCotangentClamp, kCotangentClamp);
}

}  // namespace

LaplacianOperator cotangent_laplacian(std::span<const Vec3> positions, const Topology& topology,
                                      const VertexRegion& rows, int tag) {
  if (positions.size() != topology.vertex_count() || rows.vertex_count() != topology.vertex_count()) {
    fail(ErrorKind::Data, "Laplacian inputs disagree on vertex count");
  }
  const auto& faces = topology.faces();
  std::vector<LaplacianRow> out;
  out.reserve(rows.size());
  std::vector<std::pair<int, double>> scratch;

  for (int i : rows.indices()) {
    LaplacianRow row;
    row.vertex = i;
    row.tag = tag;
    scratch.clear();
    for (int f : topology.incident_faces(i)) {
      const Face& face = faces[f];
      const int local = face[0] == i ? 0 : (face[1] == i ? 1 : 2);
      const int j = face[(local + 1) % 3];
      const int k = face[(local + 2) % 3];
      const Vec3& pi = positions[i];
      const Vec3& pj = positions[j];
      const Vec3& pk = positions[k];
      if (!pi.allFinite() || !pj.allFinite() || !pk.allFinite()) {
        fail(ErrorKind::Numeric, "non-finite position near vertex " + std::to_string(i));
      }
      const double area = 0.5 * (pj - pi).cross(pk - pi).norm();
      if (!(area > kMinFaceArea)) {
        fail(ErrorKind::Numeric, "degenerate triangle " + std::to_string(f) + " in the support of row " +
                                     std::to_string(i));
      }
      const double cot_i = clamped_cot(pj - pi, pk - pi);
      const double cot_j = clamped_cot(pi - pj, pk - pj);  // opposite edge (i, k)
      const double cot_k = clamped_cot(pi - pk, pj - pk);  // opposite edge (i, j)
      scratch.emplace_back(k, 0.5 * cot_j);
      scratch.emplace_back(j, 0.5 * cot_k);

      // Mixed Voronoi area: circumcentric cell for non-obtuse triangles,
      // barycentric fallback otherwise.
      if (cot_i >= 0.0 && cot_j >= 0.0 && cot_k >= 0.0) {
        row.area += 0.125 * ((pk - pi).squaredNorm() * cot_j + (pj - pi).squaredNorm() * cot_k);
      } else if (cot_i < 0.0) {
        row.area += 0.5 * area;
      } else {
        row.area += 0.25 * area;
      }
    }
    std::sort(scratch.begin(), scratch.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [col, w] : scratch) {
      if (!row.weights.empty() && row.weights.back().first == col) {
        row.weights.back().second += w;
      } else {
        row.weights.emplace_back(col, w);
      }
    }
    double sum = 0.0;
    for (const auto& [col, w] : row.weights) sum += w;
    row.diagonal = -sum;
    if (!(row.area > 0.0)) fail(ErrorKind::Numeric, "vertex " + std::to_string(i) + " has no incident area");
    out.push_back(std::move(row));
  }
  return {topology.vertex_count(), std::move(out)};
}

std::vector<Vec3> differential_coordinates(const LaplacianOperator& laplacian, std::span<const Vec3> positions) {
  if (positions.size() != laplacian.vertex_count()) {
    fail(ErrorKind::Data, "differential_coordinates: position count does not match operator");
  }
  std::vector<Vec3> deltas;
  deltas.reserve(laplacian.rows().size());
  for (const auto& row : laplacian.rows()) {
    const Vec3& center = positions[row.vertex];
    Vec3 d = Vec3::Zero();
    for (const auto& [col, w] : row.weights) d += w * (positions[col] - center);
    deltas.push_back(d / row.area);
  }
  return deltas;
}

}  // namespace bwm::mesh
