#include "bwm/mesh.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "bwm/error.hpp"

namespace bwm::mesh {

Topology::Topology(std::vector<Face> faces, std::size_t vertex_count)
    : faces_(std::move(faces)), vertex_count_(vertex_count) {
  const auto n = static_cast<int>(vertex_count_);
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    for (int v : faces_[f]) {
      if (v < 0 || v >= n) {
        fail(ErrorKind::Data, "face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                                  " outside [0, " + std::to_string(n) + ")");
      }
    }
  }

  face_offsets_.assign(vertex_count_ + 1, 0);
  for (const auto& f : faces_)
    for (int v : f) ++face_offsets_[v + 1];
  for (std::size_t i = 0; i < vertex_count_; ++i) face_offsets_[i + 1] += face_offsets_[i];
  face_index_.resize(face_offsets_.back());
  {
    std::vector<int> cursor(face_offsets_.begin(), face_offsets_.end() - 1);
    for (std::size_t f = 0; f < faces_.size(); ++f)
      for (int v : faces_[f]) face_index_[cursor[v]++] = static_cast<int>(f);
  }

  std::vector<std::vector<int>> adjacency(vertex_count_);
  for (const auto& f : faces_) {
    for (int e = 0; e < 3; ++e) {
      adjacency[f[e]].push_back(f[(e + 1) % 3]);
      adjacency[f[(e + 1) % 3]].push_back(f[e]);
    }
  }
  neighbor_offsets_.assign(vertex_count_ + 1, 0);
  for (std::size_t v = 0; v < vertex_count_; ++v) {
    auto& a = adjacency[v];
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    neighbor_offsets_[v + 1] = neighbor_offsets_[v] + static_cast<int>(a.size());
  }
  neighbor_index_.reserve(neighbor_offsets_.back());
  for (const auto& a : adjacency) neighbor_index_.insert(neighbor_index_.end(), a.begin(), a.end());

  // Directed half-edge counts: closed iff every (a,b) appears once and (b,a) once.
  std::map<std::pair<int, int>, int> half_edges;
  for (const auto& f : faces_)
    for (int e = 0; e < 3; ++e) ++half_edges[{f[e], f[(e + 1) % 3]}];
  closed_ = !faces_.empty();
  for (const auto& [edge, count] : half_edges) {
    auto twin = half_edges.find({edge.second, edge.first});
    if (count != 1 || twin == half_edges.end() || twin->second != 1) {
      closed_ = false;
      break;
    }
  }
}

std::span<const int> Topology::incident_faces(int v) const {
  return {face_index_.data() + face_offsets_[v], static_cast<std::size_t>(face_offsets_[v + 1] - face_offsets_[v])};
}

std::span<const int> Topology::neighbors(int v) const {
  return {neighbor_index_.data() + neighbor_offsets_[v],
          static_cast<std::size_t>(neighbor_offsets_[v + 1] - neighbor_offsets_[v])};
}

TriangleMesh::TriangleMesh(std::vector<Vec3> positions, std::vector<Face> faces)
    : positions_(std::move(positions)),
      topology_(std::make_shared<const Topology>(std::move(faces), positions_.size())) {
  validate();
}

TriangleMesh::TriangleMesh(std::vector<Vec3> positions, std::shared_ptr<const Topology> topology)
    : positions_(std::move(positions)), topology_(std::move(topology)) {
  if (!topology_) fail(ErrorKind::Data, "mesh without topology");
  if (topology_->vertex_count() != positions_.size()) {
    fail(ErrorKind::Data, "position count " + std::to_string(positions_.size()) + " does not match topology (" +
                              std::to_string(topology_->vertex_count()) + ")");
  }
  validate();
}

void TriangleMesh::validate() const {
  std::vector<std::size_t> degenerate;
  for (std::size_t v = 0; v < positions_.size(); ++v) {
    if (!positions_[v].allFinite()) fail(ErrorKind::Data, "non-finite position at vertex " + std::to_string(v));
  }
  const auto& faces = topology_->faces();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if (!(face_area(positions_, faces[f]) > kMinFaceArea)) degenerate.push_back(f);
  }
  if (!degenerate.empty()) {
    std::ostringstream os;
    os << "degenerate faces (area <= " << kMinFaceArea << " m^2):";
    for (std::size_t i = 0; i < degenerate.size() && i < 20; ++i) os << ' ' << degenerate[i];
    if (degenerate.size() > 20) os << " ... (" << degenerate.size() << " total)";
    fail(ErrorKind::Data, os.str());
  }
}

TriangleMesh TriangleMesh::with_positions(std::vector<Vec3> positions) const {
  return TriangleMesh(std::move(positions), topology_);
}

bool TriangleMesh::same_topology(const TriangleMesh& other) const {
  return topology_ == other.topology_ ||
         (vertex_count() == other.vertex_count() && faces() == other.faces());
}

Eigen::Map<const Eigen::VectorXd> TriangleMesh::stacked() const {
  static_assert(sizeof(Vec3) == 3 * sizeof(double));
  return {positions_.empty() ? nullptr : positions_.front().data(),
          static_cast<Eigen::Index>(3 * positions_.size())};
}

Eigen::VectorXd stack(std::span<const Vec3> positions) {
  Eigen::VectorXd x(3 * positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) x.segment<3>(3 * i) = positions[i];
  return x;
}

std::vector<Vec3> unstack(const Eigen::VectorXd& stacked) {
  if (stacked.size() % 3 != 0) fail(ErrorKind::Data, "stacked vector length is not a multiple of 3");
  std::vector<Vec3> out(stacked.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stacked.segment<3>(3 * i);
  return out;
}

double face_area(std::span<const Vec3> positions, const Face& f) {
  const Vec3& a = positions[f[0]];
  return 0.5 * (positions[f[1]] - a).cross(positions[f[2]] - a).norm();
}

double surface_area(const TriangleMesh& mesh) {
  double total = 0.0;
  for (const auto& f : mesh.faces()) total += face_area(mesh.positions(), f);
  return total;
}

double volume(const TriangleMesh& mesh) {
  if (!mesh.topology().is_closed()) fail(ErrorKind::Data, "volume requires a closed mesh");
  const auto& p = mesh.positions();
  double six_v = 0.0;
  for (const auto& f : mesh.faces()) six_v += p[f[0]].dot(p[f[1]].cross(p[f[2]]));
  return six_v / 6.0;
}

VertexRegion::VertexRegion(std::vector<int> indices, std::size_t vertex_count)
    : indices_(std::move(indices)), vertex_count_(vertex_count) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
  if (!indices_.empty() && (indices_.front() < 0 || indices_.back() >= static_cast<int>(vertex_count_))) {
    fail(ErrorKind::Data, "region index out of range [0, " + std::to_string(vertex_count_) + ")");
  }
}

VertexRegion VertexRegion::all(std::size_t vertex_count) {
  std::vector<int> idx(vertex_count);
  for (std::size_t i = 0; i < vertex_count; ++i) idx[i] = static_cast<int>(i);
  return {std::move(idx), vertex_count};
}

bool VertexRegion::contains(int v) const { return std::binary_search(indices_.begin(), indices_.end(), v); }

std::vector<bool> VertexRegion::mask() const {
  std::vector<bool> m(vertex_count_, false);
  for (int v : indices_) m[v] = true;
  return m;
}

VertexRegion VertexRegion::complement() const {
  auto m = mask();
  std::vector<int> out;
  out.reserve(vertex_count_ - indices_.size());
  for (std::size_t v = 0; v < vertex_count_; ++v)
    if (!m[v]) out.push_back(static_cast<int>(v));
  return {std::move(out), vertex_count_};
}

VertexRegion VertexRegion::united(const VertexRegion& other) const {
  std::vector<int> out;
  std::set_union(indices_.begin(), indices_.end(), other.indices_.begin(), other.indices_.end(),
                 std::back_inserter(out));
  return {std::move(out), vertex_count_};
}

VertexRegion VertexRegion::minus(const VertexRegion& other) const {
  std::vector<int> out;
  std::set_difference(indices_.begin(), indices_.end(), other.indices_.begin(), other.indices_.end(),
                      std::back_inserter(out));
  return {std::move(out), vertex_count_};
}

VertexRegion expand_one_ring(const TriangleMesh& mesh, const VertexRegion& region) {
  if (region.vertex_count() != mesh.vertex_count()) {
    fail(ErrorKind::Data, "region was built for " + std::to_string(region.vertex_count()) +
                              " vertices, mesh has " + std::to_string(mesh.vertex_count()));
  }
  std::vector<int> out = region.indices();
  for (int v : region.indices()) {
    auto nb = mesh.topology().neighbors(v);
    out.insert(out.end(), nb.begin(), nb.end());
  }
  return {std::move(out), mesh.vertex_count()};
}

}  // namespace bwm::mesh
