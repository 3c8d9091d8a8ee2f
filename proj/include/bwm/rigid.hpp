#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace bwm::rigid {

using Vec3 = Eigen::Vector3d;

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

// Least-squares rigid alignment R * src_i + t ~ dst_i with det(R) = +1.
// Throws Data for fewer than 3 pairs, mismatched lengths, or collinear src.
RigidTransform kabsch_align(std::span<const Vec3> src, std::span<const Vec3> dst);

// Iterative rotation extraction (quaternion fixed-point update): the rotation R that
// maximizes tr(R^T A), warm-started from `initial`.
Eigen::Matrix3d extract_rotation(const Eigen::Matrix3d& a, const Eigen::Matrix3d& initial = Eigen::Matrix3d::Identity(),
                                 int max_iterations = 100, double tolerance = 1e-12);

// Same alignment with the rotation taken from extract_rotation instead of an SVD.
RigidTransform kabsch_align_iterative(std::span<const Vec3> src, std::span<const Vec3> dst);

double rmsd(const RigidTransform& transform, std::span<const Vec3> src, std::span<const Vec3> dst);

inline constexpr double kDefaultControllerRadius = 0.03;  // m

// Offset that maps a controller resting on the floor to virtual ground y = 0.
double ground_offset(double contact_height_m, double controller_radius_m = kDefaultControllerRadius);

// "x,y,z" per line; blank lines, '#' comments and one leading header line are skipped.
std::vector<Vec3> parse_points_csv(std::string_view text);
std::vector<Vec3> load_points_csv(const std::filesystem::path& path);

}  // namespace bwm::rigid
