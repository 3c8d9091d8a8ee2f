#include "bwm/rigid.hpp"

#include <cctype>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "bwm/error.hpp"
#include "bwm/text_io.hpp"

namespace bwm::rigid {
namespace {

// Cold starts converge slowly when singular values are close.
constexpr int kIterativeMaxIterations = 5000;

struct Centered {
  Vec3 src_centroid;
  Vec3 dst_centroid;
  Eigen::Matrix3d covariance;  // sum (src_i - cs)(dst_i - cd)^T
};

Centered prepare(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) fail(ErrorKind::Data, "point sets differ in length");
  if (src.size() < 3) fail(ErrorKind::Data, "rigid alignment needs at least 3 point pairs");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!src[i].allFinite() || !dst[i].allFinite()) fail(ErrorKind::Data, "non-finite point " + std::to_string(i));
  }
  Centered c;
  c.src_centroid.setZero();
  c.dst_centroid.setZero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    c.src_centroid += src[i];
    c.dst_centroid += dst[i];
  }
  c.src_centroid /= static_cast<double>(src.size());
  c.dst_centroid /= static_cast<double>(src.size());

  Eigen::Matrix3d spread = Eigen::Matrix3d::Zero();
  c.covariance.setZero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - c.src_centroid;
    spread += a * a.transpose();
    c.covariance += a * (dst[i] - c.dst_centroid).transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(spread, Eigen::EigenvaluesOnly);
  const Vec3 ev = eig.eigenvalues();  // ascending
  if (!(ev[1] > 1e-12 * ev[2])) {
    fail(ErrorKind::Data, "source points are collinear; rotation about their line is undetermined");
  }
  return c;
}

RigidTransform finish(const Centered& c, const Eigen::Matrix3d& r) {
  RigidTransform t;
  t.rotation = r;
  t.translation = c.dst_centroid - r * c.src_centroid;
  return t;
}

}  // namespace

RigidTransform kabsch_align(std::span<const Vec3> src, std::span<const Vec3> dst) {
  const Centered c = prepare(src, dst);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(c.covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return finish(c, v * d * u.transpose());
}

Eigen::Matrix3d extract_rotation(const Eigen::Matrix3d& a, const Eigen::Matrix3d& initial, int max_iterations,
                                 double tolerance) {
  Eigen::Quaterniond q(initial);
  q.normalize();
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::Matrix3d r = q.toRotationMatrix();
    const Vec3 num = r.col(0).cross(a.col(0)) + r.col(1).cross(a.col(1)) + r.col(2).cross(a.col(2));
    const double den = std::abs(r.col(0).dot(a.col(0)) + r.col(1).dot(a.col(1)) + r.col(2).dot(a.col(2))) + 1e-9;
    const Vec3 omega = num / den;
    const double w = omega.norm();
    if (w < tolerance) break;
    q = Eigen::Quaterniond(Eigen::AngleAxisd(w, omega / w)) * q;
    q.normalize();
  }
  return q.toRotationMatrix();
}

RigidTransform kabsch_align_iterative(std::span<const Vec3> src, std::span<const Vec3> dst) {
  const Centered c = prepare(src, dst);
  // tr(R H) is maximized by the polar rotation of H^T.
  const Eigen::Matrix3d a = c.covariance.transpose() / c.covariance.norm();
  Eigen::Matrix3d r = extract_rotation(a, Eigen::Matrix3d::Identity(), kIterativeMaxIterations);
  // A second start from the flipped frame avoids the rare stationary saddle.
  const Eigen::Matrix3d r2 =
      extract_rotation(a, Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitZ()).toRotationMatrix(), kIterativeMaxIterations);
  if ((r2.transpose() * a).trace() > (r.transpose() * a).trace()) r = r2;
  return finish(c, r);
}

double rmsd(const RigidTransform& transform, std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size() || src.empty()) fail(ErrorKind::Data, "point sets differ in length or are empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sum += (transform.apply(src[i]) - dst[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(src.size()));
}

double ground_offset(double contact_height_m, double controller_radius_m) {
  return contact_height_m - controller_radius_m;
}

std::vector<Vec3> parse_points_csv(std::string_view text) {
  std::vector<Vec3> points;
  std::size_t line_no = 0;
  bool first = true;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    const bool header = first && !cells.empty() && !trim(cells[0]).empty() &&
                        std::isalpha(static_cast<unsigned char>(trim(cells[0]).front()));
    first = false;
    if (header) continue;
    if (cells.size() != 3) fail(ErrorKind::Data, "line " + std::to_string(line_no) + ": expected x,y,z");
    try {
      points.emplace_back(parse_double(cells[0]), parse_double(cells[1]), parse_double(cells[2]));
    } catch (const Error& e) {
      fail(ErrorKind::Data, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return points;
}

std::vector<Vec3> load_points_csv(const std::filesystem::path& path) {
  try {
    return parse_points_csv(read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace bwm::rigid
