#include <algorithm>
#include <cmath>

#include "bwm/error.hpp"
#include "bwm/shape_model.hpp"

namespace bwm::shape {

ShapeModel::ShapeModel(std::shared_ptr<const mesh::Topology> topology, Eigen::VectorXd mean, VertexRegion face_region,
                       Eigen::MatrixXd basis, Eigen::MatrixXd map, std::size_t subjects,
                       std::optional<AnthroVector> base)
    : topology_(std::move(topology)),
      mean_(std::move(mean)),
      face_region_(std::move(face_region)),
      basis_(std::move(basis)),
      map_(std::move(map)),
      subjects_(subjects),
      base_(base) {
  if (!topology_) fail(ErrorKind::Data, "shape model without topology");
  const auto n = topology_->vertex_count();
  if (face_region_.vertex_count() != n) fail(ErrorKind::Data, "face region does not match model vertex count");
  if (face_region_.empty()) fail(ErrorKind::Data, "face region must not be empty (it anchors the stitching)");
  body_region_ = face_region_.complement();
  if (static_cast<std::size_t>(mean_.size()) != 3 * n) fail(ErrorKind::Data, "mean has wrong length");
  if (static_cast<std::size_t>(basis_.rows()) != 3 * body_region_.size()) {
    fail(ErrorKind::Data, "basis rows do not match 3V");
  }
  if (map_.rows() != 5 || map_.cols() != basis_.cols()) fail(ErrorKind::Data, "measurement map must be 5 x k");
  if (basis_.cols() > static_cast<Eigen::Index>(std::min<std::size_t>(3 * body_region_.size(), subjects_ - 1))) {
    fail(ErrorKind::Data, "component count exceeds min(3V, M-1)");
  }
  if (orthonormality_error() > 1e-9) fail(ErrorKind::Data, "PCA basis is not orthonormal");
  if (base_) base_->validate();
}

ShapeModel ShapeModel::train(const Corpus& corpus, const VertexRegion& face_region, int components) {
  const PcaResult pca = train_pca(corpus, face_region, components);
  const Eigen::MatrixXd d = corpus.measurement_matrix();
  const MeasurementMap map = fit_measurement_map(d, pca.coefficients);
  const Eigen::Vector4d mean_anthro = d.colwise().mean().transpose();
  AnthroVector base{mean_anthro[0], mean_anthro[1], mean_anthro[2], mean_anthro[3]};
  return ShapeModel(corpus.meshes.front().shared_topology(), pca.mean, face_region, pca.basis, map.coefficients,
                    corpus.size(), base);
}

TriangleMesh ShapeModel::mean_mesh() const { return TriangleMesh(mesh::unstack(mean_), topology_); }

Eigen::VectorXd ShapeModel::select_body(const Eigen::VectorXd& stacked) const {
  Eigen::VectorXd out(3 * static_cast<Eigen::Index>(body_region_.size()));
  Eigen::Index r = 0;
  for (int v : body_region_.indices()) {
    out.segment<3>(r) = stacked.segment<3>(3 * v);
    r += 3;
  }
  return out;
}

void ShapeModel::require_topology(const TriangleMesh& mesh) const {
  if (mesh.shared_topology() == topology_) return;
  if (mesh.vertex_count() != topology_->vertex_count() || mesh.faces() != topology_->faces()) {
    fail(ErrorKind::Data, "mesh topology does not match the shape model template");
  }
}

Eigen::VectorXd ShapeModel::project(const TriangleMesh& mesh) const {
  require_topology(mesh);
  return basis_.transpose() * (select_body(mesh.stacked()) - select_body(mean_));
}

std::vector<Vec3> ShapeModel::morph_region(const TriangleMesh& mesh, const AnthroDelta& delta) const {
  require_topology(mesh);
  const auto d = delta.as_vector();
  if (!d.allFinite()) fail(ErrorKind::Data, "measurement change must be finite");
  const Eigen::VectorXd offset = basis_ * (map_.transpose() * d);
  std::vector<Vec3> out;
  out.reserve(body_region_.size());
  const auto& p = mesh.positions();
  Eigen::Index r = 0;
  for (int v : body_region_.indices()) {
    out.push_back(p[v] + offset.segment<3>(r));
    r += 3;
  }
  return out;
}

TriangleMesh ShapeModel::modify_weight(const TriangleMesh& mesh, double delta_kg, const StitchOptions& options) const {
  const auto body_positions = morph_region(mesh, AnthroDelta::weight_only(delta_kg));
  const auto& original = mesh.positions();
  std::vector<Vec3> modified = original;
  for (std::size_t i = 0; i < body_positions.size(); ++i) modified[body_region_.indices()[i]] = body_positions[i];

  // The face ring keeps its original differential coordinates so the seam
  // blends into the fixed face; everything else follows the morphed shape.
  const VertexRegion ring = mesh::expand_one_ring(mesh, face_region_);
  const VertexRegion ring_rows = ring.minus(face_region_);
  const VertexRegion morphed_rows = body_region_.minus(ring_rows);
  const auto l_original = mesh::cotangent_laplacian(original, *topology_, ring_rows, 0);
  const auto l_modified = mesh::cotangent_laplacian(modified, *topology_, morphed_rows, 1);
  const auto d_original = mesh::differential_coordinates(l_original, original);
  const auto d_modified = mesh::differential_coordinates(l_modified, modified);
  const auto laplacian = l_original.merged(l_modified);

  std::vector<Vec3> deltas;
  deltas.reserve(laplacian.rows().size());
  std::size_t io = 0, im = 0;
  for (const auto& row : laplacian.rows()) {
    deltas.push_back(row.tag == 0 ? d_original[io++] : d_modified[im++]);
  }

  std::map<int, Vec3> constraints;
  for (int v : face_region_.indices()) constraints.emplace_hint(constraints.end(), v, original[v]);
  auto positions = mesh::reconstruct(laplacian, deltas, constraints, options.solver);
  return mesh.with_positions(std::move(positions));
}

double ShapeModel::orthonormality_error() const {
  if (basis_.cols() == 0) return 0.0;
  const Eigen::MatrixXd gram = basis_.transpose() * basis_;
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

double weight_from_volume(const TriangleMesh& mesh, const TriangleMesh& base_mesh, double base_weight_kg) {
  const double base_volume = mesh::volume(base_mesh);
  if (!(base_volume > 0.0)) fail(ErrorKind::Data, "base mesh must enclose a positive volume");
  return base_weight_kg * mesh::volume(mesh) / base_volume;
}

MorphTable::MorphTable(std::vector<double> samples, std::vector<std::vector<Vec3>> buffers)
    : samples_(std::move(samples)), buffers_(std::move(buffers)) {
  if (samples_.empty() || samples_.size() != buffers_.size()) {
    fail(ErrorKind::Data, "morph table needs one buffer per sample");
  }
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (!(samples_[i] > samples_[i - 1])) fail(ErrorKind::Data, "morph samples must be strictly increasing");
    if (buffers_[i].size() != buffers_[0].size()) fail(ErrorKind::Data, "morph buffers differ in vertex count");
  }
}

std::vector<Vec3> MorphTable::interpolate(double delta_kg) const {
  if (delta_kg <= samples_.front()) return buffers_.front();
  if (delta_kg >= samples_.back()) return buffers_.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(samples_.begin(), samples_.end(), delta_kg) - samples_.begin());
  const std::size_t lo = hi - 1;
  if (samples_[lo] == delta_kg) return buffers_[lo];
  const double t = (delta_kg - samples_[lo]) / (samples_[hi] - samples_[lo]);
  std::vector<Vec3> out(buffers_[lo].size());
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = (1.0 - t) * buffers_[lo][v] + t * buffers_[hi][v];
  return out;
}

MorphTable precompute_morph_targets(const ShapeModel& model, const TriangleMesh& mesh, std::span<const double> samples,
                                    const StitchOptions& options) {
  std::vector<double> s(samples.begin(), samples.end());
  std::vector<std::vector<Vec3>> buffers;
  buffers.reserve(s.size());
  for (double dw : s) {
    buffers.push_back(dw == 0.0 ? mesh.positions() : model.modify_weight(mesh, dw, options).positions());
  }
  return {std::move(s), std::move(buffers)};
}

std::vector<double> morph_grid(double base_weight_kg, double fraction, double max_spacing_kg) {
  if (!(base_weight_kg > 0.0) || !(fraction > 0.0) || !(max_spacing_kg > 0.0)) {
    fail(ErrorKind::Usage, "morph grid needs positive base weight, fraction and spacing");
  }
  const double half = fraction * base_weight_kg;
  // Symmetric grid with an exact zero in the middle.
  const auto per_side = static_cast<int>(std::ceil(half / max_spacing_kg - 1e-12));
  const double step = half / per_side;
  std::vector<double> grid(2 * per_side + 1);
  for (int i = -per_side; i <= per_side; ++i) grid[i + per_side] = i * step;
  grid.front() = -half;
  grid.back() = half;
  return grid;
}

}  // namespace bwm::shape
