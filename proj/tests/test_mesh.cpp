#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "bwm/error.hpp"
#include "bwm/laplacian.hpp"
#include "bwm/mesh.hpp"
#include "bwm/primitives.hpp"
#include "support.hpp"

using namespace bwm;
using namespace bwm::mesh;

namespace {

// Center vertex 0 surrounded by a regular hexagon (vertices 1..6).
TriangleMesh hexagon_fan() {
  std::vector<Vec3> p{{0, 0, 0}};
  for (int k = 0; k < 6; ++k) {
    const double a = k * std::numbers::pi / 3.0;
    p.emplace_back(std::cos(a), std::sin(a), 0.0);
  }
  std::vector<Face> f;
  for (int k = 0; k < 6; ++k) f.push_back({0, 1 + k, 1 + (k + 1) % 6});
  return TriangleMesh(std::move(p), std::move(f));
}

double row_weight(const LaplacianRow& row, int col) {
  for (const auto& [j, w] : row.weights)
    if (j == col) return w;
  return std::nan("");
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Usage;
}

}  // namespace

TEST_CASE("parse_obj reads a single triangle") {
  const auto m = parse_obj("# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n");
  CHECK(m.vertex_count() == 3);
  CHECK(m.face_count() == 1);
  CHECK(m.faces()[0] == Face{0, 1, 2});
}

TEST_CASE("parse_obj accepts negative indices") {
  const auto m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n");
  CHECK(m.faces()[0] == Face{0, 1, 2});
}

TEST_CASE("parse_obj rejects quads with the line number") {
  try {
    parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    FAIL("quad accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("non-triangular face") != std::string::npos);
    CHECK(std::string(e.what()).find("5") != std::string::npos);
  }
}

TEST_CASE("degenerate faces are listed") {
  try {
    parse_obj("v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 4\nf 1 2 3\n");
    FAIL("degenerate face accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("degenerate") != std::string::npos);
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("face index out of range is rejected") {
  CHECK(kind_of([] { parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n"); }) == ErrorKind::Data);
}

TEST_CASE("icosphere file round trip and area") {
  testing::TempDir dir("mesh");
  const auto sphere = make_icosphere(3, 1.0);
  REQUIRE(sphere.vertex_count() == 642);
  save_mesh(sphere, dir / "ico.obj");
  const auto loaded = load_mesh(dir / "ico.obj");
  CHECK(loaded.vertex_count() == 642);
  CHECK(loaded.faces() == sphere.faces());
  double max_dev = 0.0;
  for (std::size_t v = 0; v < 642; ++v)
    max_dev = std::max(max_dev, (loaded.positions()[v] - sphere.positions()[v]).cwiseAbs().maxCoeff());
  CHECK(max_dev <= 1e-9);
  CHECK(std::abs(surface_area(loaded) - 4.0 * std::numbers::pi) / (4.0 * std::numbers::pi) < 0.02);
}

TEST_CASE("save_mesh to a missing directory is an I/O error") {
  CHECK(kind_of([] { save_mesh(make_cube(), "/nonexistent-dir/x/cube.obj"); }) == ErrorKind::Io);
}

TEST_CASE("load_mesh on a missing file is an I/O error") {
  CHECK(kind_of([] { load_mesh("/nonexistent-dir/none.obj"); }) == ErrorKind::Io);
}

TEST_CASE("cube volume and closedness") {
  const auto cube = make_cube(1.0);
  CHECK(cube.topology().is_closed());
  CHECK(std::abs(volume(cube) - 1.0) <= 1e-12);
  CHECK(std::abs(volume(make_cube(2.0)) - 8.0) <= 1e-12);
  CHECK(kind_of([] { volume(make_grid(2, 2)); }) == ErrorKind::Data);
}

TEST_CASE("vertex regions") {
  VertexRegion r({5, 1, 3, 1}, 8);
  CHECK(r.indices() == std::vector<int>{1, 3, 5});
  CHECK(r.contains(3));
  CHECK_FALSE(r.contains(2));
  CHECK(r.complement().size() == 5);
  CHECK(r.united(r.complement()) == VertexRegion::all(8));
  CHECK(r.minus(VertexRegion({3}, 8)).indices() == std::vector<int>{1, 5});
  CHECK(kind_of([] { VertexRegion({9}, 8); }) == ErrorKind::Data);
}

TEST_CASE("expand_one_ring") {
  const auto fan = hexagon_fan();
  CHECK(expand_one_ring(fan, VertexRegion({}, 7)).empty());
  CHECK(expand_one_ring(fan, VertexRegion::all(7)) == VertexRegion::all(7));
  CHECK(expand_one_ring(fan, VertexRegion({0}, 7)).size() == 7);
  const auto rim = expand_one_ring(fan, VertexRegion({1}, 7));
  CHECK(rim.indices() == std::vector<int>{0, 1, 2, 6});
  CHECK(kind_of([&] { expand_one_ring(fan, VertexRegion({0}, 9)); }) == ErrorKind::Data);
}

TEST_CASE("unit square split along its diagonal") {
  // The diagonal is opposite the two right angles, the sides are opposite 45 degree corners.
  TriangleMesh square({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, std::vector<Face>{{0, 1, 2}, {0, 2, 3}});
  const auto lap = cotangent_laplacian(square.positions(), square.topology(), VertexRegion::all(4));
  const auto* row = lap.find(0);
  REQUIRE(row);
  CHECK(std::abs(row_weight(*row, 2)) <= 1e-12);
  CHECK(row_weight(*row, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(row_weight(*row, 3) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("edge between two 45 degree corners has weight 1") {
  // Two right isosceles triangles sharing a leg; the far corners are 45 degrees.
  TriangleMesh kite({{0, 0, 0}, {0, 1, 0}, {1, 0, 0}, {-1, 0, 0}}, std::vector<Face>{{0, 2, 1}, {0, 1, 3}});
  const auto lap = cotangent_laplacian(kite.positions(), kite.topology(), VertexRegion::all(4));
  CHECK(row_weight(*lap.find(0), 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(row_weight(*lap.find(1), 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Laplacian rows sum to zero and areas cover the surface") {
  const auto sphere = make_icosphere(3, 1.3);
  const auto lap = cotangent_laplacian(sphere.positions(), sphere.topology(), VertexRegion::all(642));
  double area_sum = 0.0;
  for (const auto& row : lap.rows()) {
    double s = row.diagonal;
    for (const auto& [j, w] : row.weights) s += w;
    CHECK(std::abs(s) <= 1e-10);
    CHECK(row.area > 0.0);
    area_sum += row.area;
  }
  CHECK(std::abs(area_sum - surface_area(sphere)) / surface_area(sphere) <= 1e-6);

  // Obtuse triangles exercise the barycentric fallback of the mixed-area rule.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> jitter(-0.04, 0.04);
  auto p = make_icosphere(2, 1.0).positions();
  for (auto& v : p) v += Vec3(jitter(rng), jitter(rng), jitter(rng));
  const auto bumpy = make_icosphere(2, 1.0).with_positions(p);
  const auto lap2 = cotangent_laplacian(p, bumpy.topology(), VertexRegion::all(p.size()));
  double sum2 = 0.0;
  for (const auto& row : lap2.rows()) sum2 += row.area;
  CHECK(std::abs(sum2 - surface_area(bumpy)) / surface_area(bumpy) <= 1e-6);
}

TEST_CASE("planar grid interior deltas vanish") {
  const auto grid = make_grid(8, 6, 0.1);
  std::vector<int> interior;
  for (int j = 1; j < 6; ++j)
    for (int i = 1; i < 8; ++i) interior.push_back(j * 9 + i);
  const auto lap = cotangent_laplacian(grid.positions(), grid.topology(), VertexRegion(interior, grid.vertex_count()));
  for (const auto& d : differential_coordinates(lap, grid.positions())) CHECK(d.norm() < 1e-9);
}

TEST_CASE("icosphere deltas match the mean-curvature normal") {
  for (double r : {1.0, 2.5}) {
    const auto sphere = make_icosphere(3, r);
    const auto lap = cotangent_laplacian(sphere.positions(), sphere.topology(), VertexRegion::all(642));
    const auto deltas = differential_coordinates(lap, sphere.positions());
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      const Vec3& p = sphere.positions()[i];
      CHECK(std::abs(deltas[i].norm() - 2.0 / r) / (2.0 / r) < 0.05);
      const double cosang = deltas[i].normalized().dot(-p.normalized());
      CHECK(cosang > std::cos(5.0 * std::numbers::pi / 180.0));
    }
  }
}

TEST_CASE("deltas are translation invariant") {
  const auto sphere = make_icosphere(2, 1.0);
  const auto lap = cotangent_laplacian(sphere.positions(), sphere.topology(), VertexRegion::all(sphere.vertex_count()));
  auto moved = sphere.positions();
  for (auto& v : moved) v += Vec3(3.0, -2.0, 7.5);
  const auto a = differential_coordinates(lap, sphere.positions());
  const auto b = differential_coordinates(lap, moved);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() < 1e-9);
}

TEST_CASE("degenerate triangle in the support of a row") {
  std::vector<Vec3> p{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  const Topology topo({{0, 1, 2}, {1, 3, 2}}, 4);
  p[3] = p[1];  // collapses the second triangle
  CHECK(kind_of([&] { cotangent_laplacian(p, topo, VertexRegion({3}, 4)); }) == ErrorKind::Numeric);
  // Rows whose support avoids the collapsed triangle are fine.
  CHECK_NOTHROW(cotangent_laplacian(p, topo, VertexRegion({0}, 4)));
}

TEST_CASE("reconstruct: fully constrained copies the constraints") {
  const auto sphere = make_icosphere(1, 1.0);
  std::map<int, Vec3> c;
  for (std::size_t v = 0; v < sphere.vertex_count(); ++v) c[static_cast<int>(v)] = sphere.positions()[v];
  const auto out = reconstruct(LaplacianOperator(sphere.vertex_count(), {}), {}, c);
  CHECK(out == sphere.positions());
}

TEST_CASE("reconstruct: self reconstruction with a constrained cap") {
  const auto sphere = make_icosphere(3, 1.0);
  const auto n = sphere.vertex_count();
  std::vector<int> cap;
  for (std::size_t v = 0; v < n; ++v)
    if (sphere.positions()[v].z() > 0.7) cap.push_back(static_cast<int>(v));
  const VertexRegion fixed(cap, n);
  const auto lap = cotangent_laplacian(sphere.positions(), sphere.topology(), fixed.complement());
  const auto deltas = differential_coordinates(lap, sphere.positions());
  std::map<int, Vec3> c;
  for (int v : cap) c[v] = sphere.positions()[v];
  ReconstructReport report;
  const auto out = reconstruct(lap, deltas, c, {}, &report);
  double dev = 0.0;
  for (std::size_t v = 0; v < n; ++v) dev = std::max(dev, (out[v] - sphere.positions()[v]).norm());
  CHECK(dev <= 1e-6);
  CHECK(report.relative_residual <= 1e-8);
  for (int v : cap) {
    CHECK(out[v].x() == sphere.positions()[v].x());
    CHECK(out[v].y() == sphere.positions()[v].y());
    CHECK(out[v].z() == sphere.positions()[v].z());
  }
}

TEST_CASE("reconstruct: constraints are met bitwise even when moved") {
  const auto grid = make_grid(6, 6, 0.2);
  const auto n = grid.vertex_count();
  std::vector<int> boundary;
  for (int j = 0; j <= 6; ++j)
    for (int i = 0; i <= 6; ++i)
      if (i == 0 || j == 0 || i == 6 || j == 6) boundary.push_back(j * 7 + i);
  const VertexRegion fixed(boundary, n);
  const auto lap = cotangent_laplacian(grid.positions(), grid.topology(), fixed.complement());
  const auto deltas = differential_coordinates(lap, grid.positions());
  std::map<int, Vec3> c;
  for (int v : boundary) c[v] = grid.positions()[v] + Vec3(0.1 / 3.0, 0.0, 0.3 * grid.positions()[v].x());
  const auto out = reconstruct(lap, deltas, c);
  for (const auto& [v, q] : c) CHECK(out[v] == q);
}

TEST_CASE("reconstruct: error cases") {
  const auto sphere = make_icosphere(1, 1.0);
  const auto n = sphere.vertex_count();
  const auto lap = cotangent_laplacian(sphere.positions(), sphere.topology(), VertexRegion::all(n));
  const auto deltas = differential_coordinates(lap, sphere.positions());
  try {
    reconstruct(lap, deltas, {});
    FAIL("accepted empty constraints");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    CHECK(std::string(e.what()) == "rank-deficient: constraints required");
  }
  // Missing row for a free vertex.
  const auto partial = cotangent_laplacian(sphere.positions(), sphere.topology(), VertexRegion({1, 2}, n));
  const auto pd = differential_coordinates(partial, sphere.positions());
  CHECK(kind_of([&] { reconstruct(partial, pd, {{0, sphere.positions()[0]}}); }) == ErrorKind::Data);
}

TEST_CASE("reconstruct: unreachable free vertices are rank deficient") {
  // Two disjoint triangles, constraints only on the first.
  TriangleMesh two({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 0, 0}, {6, 0, 0}, {5, 1, 0}},
                   std::vector<Face>{{0, 1, 2}, {3, 4, 5}});
  const VertexRegion free_rows({2, 3, 4, 5}, 6);
  const auto lap = cotangent_laplacian(two.positions(), two.topology(), free_rows);
  const auto d = differential_coordinates(lap, two.positions());
  CHECK(kind_of([&] { reconstruct(lap, d, {{0, two.positions()[0]}, {1, two.positions()[1]}}); }) ==
        ErrorKind::Numeric);
}

TEST_CASE("region file round trip") {
  testing::TempDir dir("region");
  const VertexRegion r({0, 4, 9}, 12);
  save_region(r, dir / "face.txt");
  CHECK(load_region(dir / "face.txt", 12) == r);
  {
    std::ofstream out(dir / "c.txt");
    out << "# face\n3\n\n 1 # trailing\n";
  }
  CHECK(load_region(dir / "c.txt", 5).indices() == std::vector<int>{1, 3});
  CHECK(kind_of([&] { load_region(dir / "c.txt", 2); }) == ErrorKind::Data);
}
