#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace bwm::mesh {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

// Faces with area at or below this are rejected as degenerate (m^2).
inline constexpr double kMinFaceArea = 1e-12;

// Connectivity shared by every mesh derived from the same template.
class Topology {
 public:
  Topology(std::vector<Face> faces, std::size_t vertex_count);

  std::size_t vertex_count() const noexcept { return vertex_count_; }
  std::size_t face_count() const noexcept { return faces_.size(); }
  const std::vector<Face>& faces() const noexcept { return faces_; }

  std::span<const int> incident_faces(int v) const;
  // Vertices sharing an edge with v, ascending.
  std::span<const int> neighbors(int v) const;

  // Every undirected edge is used by exactly two faces with opposite orientation.
  bool is_closed() const noexcept { return closed_; }

 private:
  std::vector<Face> faces_;
  std::size_t vertex_count_;
  std::vector<int> face_offsets_;
  std::vector<int> face_index_;
  std::vector<int> neighbor_offsets_;
  std::vector<int> neighbor_index_;
  bool closed_ = false;
};

// A triangle mesh. The topology is immutable and shared between copies;
// morphing produces new meshes through with_positions().
class TriangleMesh {
 public:
  TriangleMesh(std::vector<Vec3> positions, std::vector<Face> faces);
  TriangleMesh(std::vector<Vec3> positions, std::shared_ptr<const Topology> topology);

  std::size_t vertex_count() const noexcept { return positions_.size(); }
  std::size_t face_count() const noexcept { return topology_->face_count(); }
  const std::vector<Vec3>& positions() const noexcept { return positions_; }
  const std::vector<Face>& faces() const noexcept { return topology_->faces(); }
  const Topology& topology() const noexcept { return *topology_; }
  const std::shared_ptr<const Topology>& shared_topology() const noexcept { return topology_; }

  TriangleMesh with_positions(std::vector<Vec3> positions) const;

  bool same_topology(const TriangleMesh& other) const;

  // Stacked (x0, y0, z0, x1, ...) view of the positions.
  Eigen::Map<const Eigen::VectorXd> stacked() const;

 private:
  void validate() const;

  std::vector<Vec3> positions_;
  std::shared_ptr<const Topology> topology_;
};

Eigen::VectorXd stack(std::span<const Vec3> positions);
std::vector<Vec3> unstack(const Eigen::VectorXd& stacked);

double face_area(std::span<const Vec3> positions, const Face& f);
double surface_area(const TriangleMesh& mesh);
// Enclosed volume by the divergence theorem; throws Data on open meshes.
double volume(const TriangleMesh& mesh);

// Sorted, duplicate-free set of vertex indices of a mesh with a known vertex count.
class VertexRegion {
 public:
  VertexRegion() = default;
  VertexRegion(std::vector<int> indices, std::size_t vertex_count);

  static VertexRegion all(std::size_t vertex_count);

  const std::vector<int>& indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  std::size_t vertex_count() const noexcept { return vertex_count_; }

  bool contains(int v) const;
  std::vector<bool> mask() const;
  VertexRegion complement() const;
  VertexRegion united(const VertexRegion& other) const;
  VertexRegion minus(const VertexRegion& other) const;

  bool operator==(const VertexRegion&) const = default;

 private:
  std::vector<int> indices_;
  std::size_t vertex_count_ = 0;
};

VertexRegion expand_one_ring(const TriangleMesh& mesh, const VertexRegion& region);

// Wavefront OBJ, 'v' and triangular 'f' records only.
TriangleMesh load_mesh(const std::filesystem::path& path);
TriangleMesh parse_obj(std::string_view text);
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);
std::string format_obj(const TriangleMesh& mesh);

// One 0-based vertex index per line, '#' comments allowed.
VertexRegion load_region(const std::filesystem::path& path, std::size_t vertex_count);
void save_region(const VertexRegion& region, const std::filesystem::path& path);

}  // namespace bwm::mesh
