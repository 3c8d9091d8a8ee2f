#include "bwm/error.hpp"
#include "bwm/mesh.hpp"
#include "bwm/text_io.hpp"

namespace bwm::mesh {

namespace {

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void parse_error(std::size_t line_no, const std::string& what) {
  fail(ErrorKind::Data, "OBJ line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

TriangleMesh parse_obj(std::string_view text) {
  std::vector<Vec3> positions;
  std::vector<Face> faces;
  // Face indices are resolved after reading so forward references work.
  std::vector<std::pair<std::array<long long, 3>, std::size_t>> raw_faces;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tok = tokens(trim(line));
    if (tok.empty()) continue;

    if (tok[0] == "v") {
      if (tok.size() < 4) parse_error(line_no, "vertex needs 3 coordinates");
      Vec3 p;
      try {
        for (int c = 0; c < 3; ++c) p[c] = parse_double(tok[c + 1]);
      } catch (const Error& e) {
        parse_error(line_no, e.what());
      }
      positions.push_back(p);
    } else if (tok[0] == "f") {
      if (tok.size() != 4) {
        parse_error(line_no, "non-triangular face (" + std::to_string(tok.size() - 1) + " vertices)");
      }
      std::array<long long, 3> idx{};
      for (int c = 0; c < 3; ++c) {
        auto slash = tok[c + 1].find('/');
        try {
          idx[c] = parse_int(tok[c + 1].substr(0, slash));
        } catch (const Error& e) {
          parse_error(line_no, e.what());
        }
        if (idx[c] == 0) parse_error(line_no, "face index 0 is invalid (indices are 1-based)");
        // Negative indices are relative to the vertices read so far.
        if (idx[c] < 0) idx[c] = static_cast<long long>(positions.size()) + idx[c] + 1;
      }
      raw_faces.push_back({idx, line_no});
    }
    // vn, vt, o, g, s, usemtl, mtllib and friends are ignored.
  }

  faces.reserve(raw_faces.size());
  for (const auto& [idx, ln] : raw_faces) {
    Face f{};
    for (int c = 0; c < 3; ++c) {
      if (idx[c] < 1 || idx[c] > static_cast<long long>(positions.size())) {
        parse_error(ln, "face index " + std::to_string(idx[c]) + " out of range");
      }
      f[c] = static_cast<int>(idx[c] - 1);
    }
    faces.push_back(f);
  }
  if (positions.empty()) fail(ErrorKind::Data, "OBJ contains no vertices");
  return TriangleMesh(std::move(positions), std::move(faces));
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  try {
    return parse_obj(read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

std::string format_obj(const TriangleMesh& mesh) {
  std::string out;
  out.reserve(mesh.vertex_count() * 64 + mesh.face_count() * 24);
  for (const auto& p : mesh.positions()) {
    out += "v ";
    out += format_double(p.x());
    out += ' ';
    out += format_double(p.y());
    out += ' ';
    out += format_double(p.z());
    out += '\n';
  }
  for (const auto& f : mesh.faces()) {
    out += "f ";
    out += std::to_string(f[0] + 1);
    out += ' ';
    out += std::to_string(f[1] + 1);
    out += ' ';
    out += std::to_string(f[2] + 1);
    out += '\n';
  }
  return out;
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  write_text_file(path, format_obj(mesh));
}

VertexRegion load_region(const std::filesystem::path& path, std::size_t vertex_count) {
  const std::string text = read_text_file(path);
  std::vector<int> indices;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    long long v = 0;
    try {
      v = parse_int(line);
    } catch (const Error& e) {
      fail(ErrorKind::Data, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (v < 0 || v >= static_cast<long long>(vertex_count)) {
      fail(ErrorKind::Data, path.string() + ":" + std::to_string(line_no) + ": vertex " + std::to_string(v) +
                                " out of range");
    }
    indices.push_back(static_cast<int>(v));
  }
  return {std::move(indices), vertex_count};
}

void save_region(const VertexRegion& region, const std::filesystem::path& path) {
  std::string out = "# vertex region, " + std::to_string(region.size()) + " of " +
                    std::to_string(region.vertex_count()) + " vertices\n";
  for (int v : region.indices()) {
    out += std::to_string(v);
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace bwm::mesh
