#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bwm/laplacian.hpp"
#include "bwm/mesh.hpp"

namespace bwm::shape {

using mesh::TriangleMesh;
using mesh::Vec3;
using mesh::VertexRegion;

// Body measurements of one subject.
struct AnthroVector {
  double weight_kg = 0.0;
  double height_m = 0.0;
  double armspan_m = 0.0;
  double inseam_m = 0.0;

  void validate() const;
  Eigen::Vector4d as_vector() const { return {weight_kg, height_m, armspan_m, inseam_m}; }
};

// Change in measurements. The trailing bias entry of the 5-vector is always 0.
struct AnthroDelta {
  double weight_kg = 0.0;
  double height_m = 0.0;
  double armspan_m = 0.0;
  double inseam_m = 0.0;

  static AnthroDelta weight_only(double delta_kg) { return {delta_kg, 0.0, 0.0, 0.0}; }
  Eigen::Matrix<double, 5, 1> as_vector() const;
};

// Registered meshes sharing one topology, each with its measurements.
struct Corpus {
  std::vector<TriangleMesh> meshes;
  std::vector<AnthroVector> measurements;

  std::size_t size() const noexcept { return meshes.size(); }
  void validate() const;
  // M x 4 matrix (weight, height, armspan, inseam).
  Eigen::MatrixXd measurement_matrix() const;
};

struct PcaResult {
  Eigen::VectorXd mean;               // 3N, all vertices
  Eigen::MatrixXd basis;              // 3V x k, orthonormal columns
  Eigen::MatrixXd coefficients;       // k x M
  Eigen::VectorXd explained_variance; // k, non-increasing
};

// PCA over the vertices outside `face_region`, via the M x M Gram matrix.
PcaResult train_pca(const Corpus& corpus, const VertexRegion& face_region, int components);

struct MeasurementMap {
  Eigen::MatrixXd coefficients;    // 5 x k; rows weight, height, armspan, inseam, bias
  Eigen::VectorXd residual_norms;  // per PCA component
};

// Least-squares solution of (D | 1) C = W^T through the normal equations.
MeasurementMap fit_measurement_map(const Eigen::MatrixXd& measurements, const Eigen::MatrixXd& pca_coefficients);

int default_component_count(std::size_t subjects);

struct StitchOptions {
  mesh::ReconstructOptions solver;
};

class ShapeModel {
 public:
  ShapeModel(std::shared_ptr<const mesh::Topology> topology, Eigen::VectorXd mean, VertexRegion face_region,
             Eigen::MatrixXd basis, Eigen::MatrixXd map, std::size_t subjects,
             std::optional<AnthroVector> base = std::nullopt);

  static ShapeModel train(const Corpus& corpus, const VertexRegion& face_region, int components);

  std::size_t vertex_count() const noexcept { return topology_->vertex_count(); }
  std::size_t body_vertex_count() const noexcept { return body_region_.size(); }
  int components() const noexcept { return static_cast<int>(basis_.cols()); }
  std::size_t subjects() const noexcept { return subjects_; }

  const mesh::Topology& topology() const noexcept { return *topology_; }
  const std::shared_ptr<const mesh::Topology>& shared_topology() const noexcept { return topology_; }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const VertexRegion& face_region() const noexcept { return face_region_; }
  // Complement of the face region; the rows of the basis follow its order.
  const VertexRegion& body_region() const noexcept { return body_region_; }
  const Eigen::MatrixXd& basis() const noexcept { return basis_; }
  const Eigen::MatrixXd& measurement_map() const noexcept { return map_; }
  const std::optional<AnthroVector>& base() const noexcept { return base_; }

  TriangleMesh mean_mesh() const;
  Eigen::VectorXd select_body(const Eigen::VectorXd& stacked) const;

  // w = P^T (S x - S mean)
  Eigen::VectorXd project(const TriangleMesh& mesh) const;
  // S x + P (C^T delta), one position per body-region vertex.
  std::vector<Vec3> morph_region(const TriangleMesh& mesh, const AnthroDelta& delta) const;
  // Morph the body region, then stitch it to the fixed face region.
  TriangleMesh modify_weight(const TriangleMesh& mesh, double delta_kg, const StitchOptions& options = {}) const;

  // Largest |P^T P - I| entry.
  double orthonormality_error() const;

 private:
  void require_topology(const TriangleMesh& mesh) const;

  std::shared_ptr<const mesh::Topology> topology_;
  Eigen::VectorXd mean_;
  VertexRegion face_region_;
  VertexRegion body_region_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd map_;
  std::size_t subjects_ = 0;
  std::optional<AnthroVector> base_;
};

// base_weight * volume(mesh) / volume(base_mesh)
double weight_from_volume(const TriangleMesh& mesh, const TriangleMesh& base_mesh, double base_weight_kg);

// Precomputed stitched meshes at sampled weight changes, linearly interpolated in between.
class MorphTable {
 public:
  MorphTable(std::vector<double> samples, std::vector<std::vector<Vec3>> buffers);

  const std::vector<double>& samples() const noexcept { return samples_; }
  const std::vector<std::vector<Vec3>>& buffers() const noexcept { return buffers_; }
  // Clamps to the table ends outside the sampled range.
  std::vector<Vec3> interpolate(double delta_kg) const;

 private:
  std::vector<double> samples_;
  std::vector<std::vector<Vec3>> buffers_;
};

// The sample at 0 is the input mesh itself.
MorphTable precompute_morph_targets(const ShapeModel& model, const TriangleMesh& mesh, std::span<const double> samples,
                                    const StitchOptions& options = {});

// Evenly spaced grid from -fraction * base to +fraction * base with spacing <= max_spacing.
std::vector<double> morph_grid(double base_weight_kg, double fraction, double max_spacing_kg);

// "BWMM" binary model file.
std::string serialize_model(const ShapeModel& model);
ShapeModel deserialize_model(std::string_view bytes);
void save_model(const ShapeModel& model, const std::filesystem::path& path);
ShapeModel load_model(const std::filesystem::path& path);

// meshes/NNN.obj + measurements.csv (+ face_region.txt when given).
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir, const VertexRegion* face_region = nullptr);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace bwm::shape
