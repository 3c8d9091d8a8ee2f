#include <algorithm>
#include <cstdio>

#include "bwm/error.hpp"
#include "bwm/shape_model.hpp"
#include "bwm/text_io.hpp"

namespace bwm::shape {
namespace {

constexpr std::string_view kMeasurementHeader = "weight_kg,height_m,armspan_m,inseam_m";

std::string mesh_name(std::size_t index, std::size_t count) {
  const int digits = std::max<int>(3, static_cast<int>(std::to_string(count - 1).size()));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*zu.obj", digits, index);
  return buf;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir, const VertexRegion* face_region) {
  corpus.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir / "meshes", ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + (dir / "meshes").string() + ": " + ec.message());
  std::string csv(kMeasurementHeader);
  csv += '\n';
  for (std::size_t j = 0; j < corpus.size(); ++j) {
    mesh::save_mesh(corpus.meshes[j], dir / "meshes" / mesh_name(j, corpus.size()));
    const auto& a = corpus.measurements[j];
    csv += format_double(a.weight_kg) + ',' + format_double(a.height_m) + ',' + format_double(a.armspan_m) + ',' +
           format_double(a.inseam_m) + '\n';
  }
  write_text_file(dir / "measurements.csv", csv);
  if (face_region) mesh::save_region(*face_region, dir / "face_region.txt");
}

Corpus load_corpus(const std::filesystem::path& dir) {
  const std::string csv = read_text_file(dir / "measurements.csv");
  Corpus corpus;
  std::size_t line_no = 0;
  for (auto line : split(csv, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kMeasurementHeader) {
        fail(ErrorKind::Data, "measurements.csv header must be '" + std::string(kMeasurementHeader) + "'");
      }
      continue;
    }
    auto cells = split(line, ',');
    if (cells.size() != 4) fail(ErrorKind::Data, "measurements.csv:" + std::to_string(line_no) + ": expected 4 columns");
    AnthroVector a{parse_double(cells[0]), parse_double(cells[1]), parse_double(cells[2]), parse_double(cells[3])};
    a.validate();
    corpus.measurements.push_back(a);
  }

  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "meshes", ec)) {
    if (entry.path().extension() == ".obj") files.push_back(entry.path());
  }
  if (ec) fail(ErrorKind::Io, "cannot list " + (dir / "meshes").string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  if (files.size() != corpus.measurements.size()) {
    fail(ErrorKind::Data, "corpus has " + std::to_string(files.size()) + " meshes but " +
                              std::to_string(corpus.measurements.size()) + " measurement rows");
  }
  for (const auto& file : files) {
    auto m = mesh::load_mesh(file);
    if (!corpus.meshes.empty()) {
      if (!m.same_topology(corpus.meshes.front())) fail(ErrorKind::Data, file.string() + ": topology mismatch");
      m = TriangleMesh(m.positions(), corpus.meshes.front().shared_topology());
    }
    corpus.meshes.push_back(std::move(m));
  }
  corpus.validate();
  return corpus;
}

}  // namespace bwm::shape
