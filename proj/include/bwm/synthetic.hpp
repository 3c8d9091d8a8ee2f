#pragma once

#include <array>
#include <cstdint>

#include "bwm/shape_model.hpp"

namespace bwm::shape {

// Procedural stand-in for a registered scan corpus. Every subject is a closed
// stacked-ellipse body (feet to crown) with a flat face patch on the front of
// the head. Vertex positions are affine in the measurements:
//   y scales with weight about the face plane y = 0, so enclosed volume is
//   proportional to weight at fixed height/armspan/inseam (to within the
//   small band around the face, whose depth blends from fixed to scaled);
//   z scales with height, the crotch level shifts with inseam;
//   x widens with armspan at the shoulders and narrows slightly with height.
// `noise` adds subject-specific x-only shape modes.
struct SyntheticOptions {
  int rings = 48;
  int segments = 40;
  double noise = 0.004;
};

inline constexpr int kSyntheticNoiseModes = 3;
using NoiseModes = std::array<double, kSyntheticNoiseModes>;

struct SyntheticCorpus {
  Corpus corpus;
  VertexRegion face_region;
  std::vector<NoiseModes> noise;
};

SyntheticCorpus generate_synthetic_corpus(int subjects, std::uint64_t seed, const SyntheticOptions& options = {});

// Ground-truth generator for one subject.
TriangleMesh synthetic_body(const AnthroVector& anthro, const SyntheticOptions& options, const NoiseModes& noise = {});
VertexRegion synthetic_face_region(const SyntheticOptions& options);

}  // namespace bwm::shape
