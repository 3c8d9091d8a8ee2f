#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>

#include "bwm/error.hpp"
#include "bwm/shape_model.hpp"
#include "bwm/text_io.hpp"

// Layout (all little-endian):
//   0  "BWMM"            4  u32 version
//   8  u64 N            16  u64 V            24  u64 k           32  u64 M
//  40  u64 face count   48  u32 flags (bit 0: base measurements present)
//  52  zero padding to 64
// then f64 arrays: mean (3N), face region indices (N - V), P (3V x k, row-major),
// C (5 x k, row-major); u32 faces (3F); f64 base measurements (4) if flagged.

namespace bwm::shape {
namespace {

constexpr char kMagic[4] = {'B', 'W', 'M', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 64;

template <typename T>
void put(std::string& out, T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    out.append(bytes.rbegin(), bytes.rend());
  } else {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) fail(ErrorKind::Data, "model file truncated");
    std::array<char, sizeof(T)> raw;
    std::memcpy(raw.data(), bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    return std::bit_cast<T>(raw);
  }

  void seek(std::size_t pos) { pos_ = pos; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const ShapeModel& model) {
  const auto n = static_cast<std::uint64_t>(model.vertex_count());
  const auto v = static_cast<std::uint64_t>(model.body_vertex_count());
  const auto k = static_cast<std::uint64_t>(model.components());
  const auto& faces = model.topology().faces();

  std::string out;
  out.append(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, n);
  put<std::uint64_t>(out, v);
  put<std::uint64_t>(out, k);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(model.subjects()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(faces.size()));
  put<std::uint32_t>(out, model.base() ? 1u : 0u);
  out.resize(kHeaderSize, '\0');

  for (Eigen::Index i = 0; i < model.mean().size(); ++i) put<double>(out, model.mean()[i]);
  for (int idx : model.face_region().indices()) put<double>(out, static_cast<double>(idx));
  for (Eigen::Index r = 0; r < model.basis().rows(); ++r)
    for (Eigen::Index c = 0; c < model.basis().cols(); ++c) put<double>(out, model.basis()(r, c));
  for (Eigen::Index r = 0; r < 5; ++r)
    for (Eigen::Index c = 0; c < model.measurement_map().cols(); ++c) put<double>(out, model.measurement_map()(r, c));
  for (const auto& f : faces)
    for (int idx : f) put<std::uint32_t>(out, static_cast<std::uint32_t>(idx));
  if (const auto& b = model.base()) {
    put<double>(out, b->weight_kg);
    put<double>(out, b->height_m);
    put<double>(out, b->armspan_m);
    put<double>(out, b->inseam_m);
  }
  return out;
}

ShapeModel deserialize_model(std::string_view bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::Data, "not a BWMM model file");
  }
  Reader in(bytes);
  in.seek(4);
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) fail(ErrorKind::Data, "unsupported model version " + std::to_string(version));
  const auto n = in.get<std::uint64_t>();
  const auto v = in.get<std::uint64_t>();
  const auto k = in.get<std::uint64_t>();
  const auto m = in.get<std::uint64_t>();
  const auto f = in.get<std::uint64_t>();
  const auto flags = in.get<std::uint32_t>();
  if (v > n || k > 3 * v || n > (1u << 26) || f > (1u << 28)) fail(ErrorKind::Data, "model header dimensions invalid");
  const std::size_t expected = 8 * (3 * n + (n - v) + 3 * v * k + 5 * k) + 12 * f + ((flags & 1u) ? 32 : 0);
  in.seek(kHeaderSize);
  if (in.remaining() != expected) fail(ErrorKind::Data, "model file size does not match its header");

  Eigen::VectorXd mean(static_cast<Eigen::Index>(3 * n));
  for (Eigen::Index i = 0; i < mean.size(); ++i) mean[i] = in.get<double>();
  std::vector<int> face(n - v);
  for (auto& idx : face) {
    const double raw = in.get<double>();
    if (!(raw >= 0.0 && raw < static_cast<double>(n)) || raw != std::floor(raw)) {
      fail(ErrorKind::Data, "invalid face region index in model file");
    }
    idx = static_cast<int>(raw);
  }
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(3 * v), static_cast<Eigen::Index>(k));
  for (Eigen::Index r = 0; r < basis.rows(); ++r)
    for (Eigen::Index c = 0; c < basis.cols(); ++c) basis(r, c) = in.get<double>();
  Eigen::MatrixXd map(5, static_cast<Eigen::Index>(k));
  for (Eigen::Index r = 0; r < 5; ++r)
    for (Eigen::Index c = 0; c < map.cols(); ++c) map(r, c) = in.get<double>();
  std::vector<mesh::Face> faces(f);
  for (auto& tri : faces)
    for (auto& idx : tri) idx = static_cast<int>(in.get<std::uint32_t>());
  std::optional<AnthroVector> base;
  if (flags & 1u) {
    AnthroVector b;
    b.weight_kg = in.get<double>();
    b.height_m = in.get<double>();
    b.armspan_m = in.get<double>();
    b.inseam_m = in.get<double>();
    base = b;
  }

  VertexRegion face_region(std::move(face), n);
  if (face_region.size() != n - v) fail(ErrorKind::Data, "duplicate face region indices in model file");
  auto topology = std::make_shared<const mesh::Topology>(std::move(faces), n);
  return ShapeModel(std::move(topology), std::move(mean), std::move(face_region), std::move(basis), std::move(map),
                    m, base);
}

void save_model(const ShapeModel& model, const std::filesystem::path& path) {
  write_text_file(path, serialize_model(model));
}

ShapeModel load_model(const std::filesystem::path& path) {
  try {
    return deserialize_model(read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace bwm::shape
