#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "bwm/error.hpp"
#include "bwm/shape_model.hpp"

namespace bwm::shape {

void AnthroVector::validate() const {
  const Eigen::Vector4d v = as_vector();
  if (!v.allFinite() || (v.array() <= 0.0).any()) fail(ErrorKind::Data, "measurements must be positive and finite");
  if (weight_kg >= 500.0) fail(ErrorKind::Data, "weight must be below 500 kg");
  if (height_m >= 3.0) fail(ErrorKind::Data, "height must be below 3 m");
}

Eigen::Matrix<double, 5, 1> AnthroDelta::as_vector() const {
  Eigen::Matrix<double, 5, 1> d;
  d << weight_kg, height_m, armspan_m, inseam_m, 0.0;
  return d;
}

void Corpus::validate() const {
  if (meshes.size() < 2) fail(ErrorKind::Data, "corpus needs at least 2 meshes");
  if (measurements.size() != meshes.size()) {
    fail(ErrorKind::Data, "corpus has " + std::to_string(meshes.size()) + " meshes but " +
                              std::to_string(measurements.size()) + " measurement rows");
  }
  for (std::size_t j = 1; j < meshes.size(); ++j) {
    if (!meshes[j].same_topology(meshes[0])) {
      fail(ErrorKind::Data, "corpus mesh " + std::to_string(j) + " does not share the template topology");
    }
  }
  for (const auto& m : measurements) m.validate();
}

Eigen::MatrixXd Corpus::measurement_matrix() const {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(measurements.size()), 4);
  for (std::size_t j = 0; j < measurements.size(); ++j) d.row(static_cast<Eigen::Index>(j)) = measurements[j].as_vector();
  return d;
}

int default_component_count(std::size_t subjects) {
  return static_cast<int>(std::min<std::size_t>(30, subjects > 0 ? subjects - 1 : 0));
}

namespace {

// Orthogonalize against the first `count` columns, twice (classical
// Gram-Schmidt with re-orthogonalization).
void orthogonalize(Eigen::VectorXd& y, const Eigen::MatrixXd& basis, Eigen::Index count) {
  for (int pass = 0; pass < 2; ++pass) {
    if (count == 0) return;
    const auto prev = basis.leftCols(count);
    y -= prev * (prev.transpose() * y);
  }
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> column) {
  Eigen::Index arg = 0;
  column.cwiseAbs().maxCoeff(&arg);
  if (column[arg] < 0.0) column = -column;
}

}  // namespace

PcaResult train_pca(const Corpus& corpus, const VertexRegion& face_region, int components) {
  corpus.validate();
  const auto n = corpus.meshes.front().vertex_count();
  if (face_region.vertex_count() != n) fail(ErrorKind::Data, "face region does not match corpus vertex count");
  const VertexRegion body = face_region.complement();
  const auto m = static_cast<Eigen::Index>(corpus.size());
  const auto rows = static_cast<Eigen::Index>(3 * body.size());
  if (components < 1 || components > std::min<Eigen::Index>(rows, m - 1)) {
    fail(ErrorKind::Usage, "component count " + std::to_string(components) + " must be in [1, min(3V, M-1)] = [1, " +
                               std::to_string(std::min<Eigen::Index>(rows, m - 1)) + "]");
  }

  PcaResult out;
  out.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * n));
  for (const auto& mesh : corpus.meshes) out.mean += mesh.stacked();
  out.mean /= static_cast<double>(m);

  Eigen::MatrixXd data(rows, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto x = corpus.meshes[j].stacked();
    Eigen::Index r = 0;
    for (int v : body.indices()) {
      data.block<3, 1>(r, j) = x.segment<3>(3 * v) - out.mean.segment<3>(3 * v);
      r += 3;
    }
  }

  // M << 3V: eigen-decompose the Gram matrix and lift the eigenvectors.
  const Eigen::MatrixXd gram = data.transpose() * data;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) fail(ErrorKind::Numeric, "Gram eigendecomposition failed");
  const Eigen::VectorXd lambda = eig.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  const double lambda_max = std::max(lambda.size() > 0 ? lambda[0] : 0.0, 0.0);
  const double null_threshold = 1e-12 * lambda_max;

  out.basis.resize(rows, components);
  out.explained_variance.resize(components);
  Eigen::Index next_canonical = 0;
  for (Eigen::Index c = 0; c < components; ++c) {
    Eigen::VectorXd y;
    bool accepted = false;
    if (lambda[c] > null_threshold && lambda[c] > 0.0) {
      y = data * vectors.col(c);
      const double before = y.norm();
      orthogonalize(y, out.basis, c);
      const double after = y.norm();
      accepted = after > 1e-6 * before && after > 0.0;
      out.explained_variance[c] = lambda[c] / static_cast<double>(m - 1);
    }
    if (!accepted) {
      // Zero-variance direction: complete the basis with canonical vectors.
      out.explained_variance[c] = 0.0;
      while (true) {
        if (next_canonical >= rows) fail(ErrorKind::Numeric, "cannot complete PCA basis");
        y = Eigen::VectorXd::Unit(rows, next_canonical++);
        orthogonalize(y, out.basis, c);
        if (y.norm() > 0.5) break;
      }
    }
    out.basis.col(c) = y.normalized();
    fix_sign(out.basis.col(c));
  }
  out.coefficients = out.basis.transpose() * data;
  return out;
}

MeasurementMap fit_measurement_map(const Eigen::MatrixXd& measurements, const Eigen::MatrixXd& pca_coefficients) {
  const Eigen::Index m = measurements.rows();
  if (measurements.cols() != 4) fail(ErrorKind::Data, "measurement matrix must have 4 columns");
  if (pca_coefficients.cols() != m) fail(ErrorKind::Data, "coefficient matrix must have one column per subject");
  if (m < 5) fail(ErrorKind::Data, "measurement map needs at least 5 subjects");

  Eigen::MatrixXd design(m, 5);
  design.leftCols(4) = measurements;
  design.col(4).setOnes();
  // Column equilibration keeps the normal matrix well scaled.
  Eigen::VectorXd scale(5);
  for (Eigen::Index c = 0; c < 5; ++c) {
    const double norm = design.col(c).norm();
    if (!(norm > 0.0)) fail(ErrorKind::Numeric, "rank-deficient measurements: zero column " + std::to_string(c));
    scale[c] = 1.0 / norm;
  }
  const Eigen::MatrixXd scaled = design * scale.asDiagonal();
  const Eigen::MatrixXd normal = scaled.transpose() * scaled;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 1e-12 * lmax)) fail(ErrorKind::Numeric, "rank-deficient measurements: (D|1) lacks full column rank");

  const Eigen::MatrixXd target = pca_coefficients.transpose();  // M x k
  Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  Eigen::MatrixXd c_scaled = ldlt.solve(scaled.transpose() * target);
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::MatrixXd residual = target - scaled * c_scaled;
    c_scaled += ldlt.solve(scaled.transpose() * residual);
  }

  MeasurementMap out;
  out.coefficients = scale.asDiagonal() * c_scaled;
  out.residual_norms = (target - design * out.coefficients).colwise().norm().transpose();
  return out;
}

}  // namespace bwm::shape
