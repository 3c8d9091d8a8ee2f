#include "bwm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "bwm/error.hpp"

namespace bwm::shape {
namespace {

constexpr double kReferenceWeight = 70.0;
constexpr double kReferenceHeight = 1.72;
constexpr double kInseamRatio = 0.45;
constexpr double kCrotchLevel = 0.47;
constexpr double kHeadStart = 0.84;  // face capping only applies above this level
constexpr double kRingLow = 0.012;
constexpr double kRingHigh = 0.988;
constexpr double kBlendDistance = 0.1;  // m  // m  // m  // m

struct ProfileKnot {
  double u, half_width, half_depth, center;
};

// Reference body (70 kg, 1.72 m) sampled at normalized height u.
constexpr ProfileKnot kProfile[] = {
    {0.00, 0.10, 0.07, -0.10}, {0.05, 0.13, 0.07, -0.10}, {0.25, 0.15, 0.08, -0.10}, {0.47, 0.19, 0.11, -0.11},
    {0.55, 0.18, 0.12, -0.10}, {0.65, 0.17, 0.12, -0.10}, {0.75, 0.21, 0.12, -0.10}, {0.81, 0.22, 0.10, -0.10},
    {0.85, 0.06, 0.06, -0.09}, {0.88, 0.075, 0.115, -0.10}, {0.93, 0.08, 0.12, -0.10}, {0.97, 0.07, 0.09, -0.10},
    {1.00, 0.02, 0.02, -0.10},
};

ProfileKnot profile(double u) {
  const auto n = std::size(kProfile);
  if (u <= kProfile[0].u) return kProfile[0];
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const auto& a = kProfile[k];
    const auto& b = kProfile[k + 1];
    if (u <= b.u) {
      const double t = (u - a.u) / (b.u - a.u);
      const double s = 0.5 * (1.0 - std::cos(std::numbers::pi * t));
      return {u, a.half_width + s * (b.half_width - a.half_width), a.half_depth + s * (b.half_depth - a.half_depth),
              a.center + s * (b.center - a.center)};
    }
  }
  return kProfile[n - 1];
}

double ring_level(int ring, int rings) { return kRingLow + (kRingHigh - kRingLow) * ring / (rings - 1); }

// Front-back coordinate of the reference body; the flat face sits at y = 0.
double reference_depth(double u, double theta) {
  const auto p = profile(u);
  const double y = p.center + p.half_depth * std::sin(theta);
  return u > kHeadStart ? std::min(0.0, y) : y;
}

bool is_face_vertex(double u, double theta) {
  const auto p = profile(u);
  return u > kHeadStart && p.center + p.half_depth * std::sin(theta) >= 0.0;
}

// Piecewise-linear hat peaking at the crotch; moves that level with inseam.
double crotch_hat(double u) {
  if (u <= kCrotchLevel) return u / kCrotchLevel;
  if (u < 0.8) return (0.8 - u) / (0.8 - kCrotchLevel);
  return 0.0;
}

double bump(double u, double center, double width) {
  const double d = (u - center) / width;
  return std::exp(-d * d);
}

void check_options(const SyntheticOptions& o) {
  if (o.rings < 8 || o.segments < 8) fail(ErrorKind::Usage, "synthetic body needs at least 8 rings and 8 segments");
  if (!(o.noise >= 0.0)) fail(ErrorKind::Usage, "noise must be >= 0");
}

std::vector<mesh::Face> body_faces(int rings, int segments) {
  std::vector<mesh::Face> faces;
  const int bottom = 0;
  const int top = rings * segments + 1;
  auto id = [segments](int r, int s) { return 1 + r * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) faces.push_back({bottom, id(0, s + 1), id(0, s)});
  for (int r = 0; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      faces.push_back({id(r, s), id(r, s + 1), id(r + 1, s + 1)});
      faces.push_back({id(r, s), id(r + 1, s + 1), id(r + 1, s)});
    }
  }
  for (int s = 0; s < segments; ++s) faces.push_back({top, id(rings - 1, s), id(rings - 1, s + 1)});
  return faces;
}

std::vector<int> face_indices(const SyntheticOptions& o) {
  std::vector<int> face;
  for (int r = 0; r < o.rings; ++r) {
    const double u = ring_level(r, o.rings);
    for (int s = 0; s < o.segments; ++s) {
      if (is_face_vertex(u, 2.0 * std::numbers::pi * s / o.segments)) face.push_back(1 + r * o.segments + s);
    }
  }
  return face;
}

// y = (1 + blend * (w / w_ref - 1)) * reference depth. `blend` is 1 on the
// body, 0 on the face and its 1-ring, and ramps smoothly in between.
std::vector<Vec3> body_positions(const AnthroVector& a, const SyntheticOptions& o, const NoiseModes& noise,
                                 std::span<const double> blend) {
  const double depth_scale = a.weight_kg / kReferenceWeight;
  const double width_scale = (2.0 * kReferenceHeight - a.height_m) / kReferenceHeight;
  const double inseam_shift = a.inseam_m - kInseamRatio * a.height_m;
  const double shoulder_gain = 1.5 * (a.armspan_m - a.height_m);
  auto y_scale = [&](std::size_t v) { return 1.0 + (blend.empty() ? 1.0 : blend[v]) * (depth_scale - 1.0); };

  std::vector<Vec3> p;
  p.reserve(static_cast<std::size_t>(o.rings * o.segments + 2));
  p.emplace_back(0.0, y_scale(0) * profile(0.0).center, 0.0);
  for (int r = 0; r < o.rings; ++r) {
    const double u = ring_level(r, o.rings);
    const auto prof = profile(u);
    const double z = a.height_m * u + inseam_shift * crotch_hat(u);
    const double modes = noise[0] * bump(u, 0.58, 0.06) + noise[1] * bump(u, 0.45, 0.05) +
                         noise[2] * bump(u, 0.30, 0.08);
    const double x_scale = width_scale + shoulder_gain * bump(u, 0.80, 0.04) + modes;
    for (int s = 0; s < o.segments; ++s) {
      const double theta = 2.0 * std::numbers::pi * s / o.segments;
      p.emplace_back(x_scale * prof.half_width * std::cos(theta), y_scale(p.size()) * reference_depth(u, theta), z);
    }
  }
  p.emplace_back(0.0, y_scale(p.size()) * profile(1.0).center, a.height_m);
  return p;
}

std::vector<double> depth_blend(const SyntheticOptions& o) {
  const auto n = static_cast<std::size_t>(o.rings * o.segments + 2);
  const mesh::Topology topo(body_faces(o.rings, o.segments), n);
  std::vector<bool> anchored(n, false);
  for (int v : face_indices(o)) {
    anchored[v] = true;
    for (int nb : topo.neighbors(v)) anchored[nb] = true;
  }
  const auto ref = body_positions({kReferenceWeight, kReferenceHeight, kReferenceHeight, kInseamRatio * kReferenceHeight},
                                  o, NoiseModes{}, {});
  std::vector<Vec3> anchors;
  for (std::size_t v = 0; v < n; ++v)
    if (anchored[v]) anchors.push_back(ref[v]);
  std::vector<double> blend(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    if (anchored[v]) continue;
    double d = std::numeric_limits<double>::infinity();
    for (const auto& q : anchors) d = std::min(d, (ref[v] - q).norm());
    const double t = std::min(1.0, d / kBlendDistance);
    blend[v] = t * t * (3.0 - 2.0 * t);
  }
  return blend;
}

AnthroVector sample_anthro(std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> bmi(18.0, 32.0);
  AnthroVector a;
  a.height_m = std::clamp(kReferenceHeight + 0.08 * unit(rng), 1.52, 1.95);
  a.weight_kg = bmi(rng) * a.height_m * a.height_m;
  a.armspan_m = a.height_m * (1.0 + 0.02 * unit(rng));
  a.inseam_m = a.height_m * (kInseamRatio + 0.012 * unit(rng));
  return a;
}

}  // namespace

TriangleMesh synthetic_body(const AnthroVector& anthro, const SyntheticOptions& options, const NoiseModes& noise) {
  check_options(options);
  anthro.validate();
  return TriangleMesh(body_positions(anthro, options, noise, depth_blend(options)), body_faces(options.rings, options.segments));
}

VertexRegion synthetic_face_region(const SyntheticOptions& options) {
  check_options(options);
  return {face_indices(options), static_cast<std::size_t>(options.rings * options.segments + 2)};
}

SyntheticCorpus generate_synthetic_corpus(int subjects, std::uint64_t seed, const SyntheticOptions& options) {
  if (subjects < 5) fail(ErrorKind::Usage, "synthetic corpus needs at least 5 subjects");
  check_options(options);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  SyntheticCorpus out;
  out.face_region = synthetic_face_region(options);
  const auto blend = depth_blend(options);
  std::shared_ptr<const mesh::Topology> topology;
  for (int j = 0; j < subjects; ++j) {
    const AnthroVector a = sample_anthro(rng);
    NoiseModes n{};
    for (auto& v : n) v = options.noise * unit(rng);
    auto positions = body_positions(a, options, n, blend);
    if (!topology) {
      TriangleMesh first(std::move(positions), body_faces(options.rings, options.segments));
      topology = first.shared_topology();
      out.corpus.meshes.push_back(std::move(first));
    } else {
      out.corpus.meshes.emplace_back(std::move(positions), topology);
    }
    out.corpus.measurements.push_back(a);
    out.noise.push_back(n);
  }
  return out;
}

}  // namespace bwm::shape
