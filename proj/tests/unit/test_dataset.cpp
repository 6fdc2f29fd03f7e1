#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "pcsm/dataset.hpp"
#include "pcsm/geometry.hpp"
#include "pcsm/rng.hpp"
#include "pcsm/shapes.hpp"

using pcsm::PointCloud;
using pcsm::RawModel;
using pcsm::Rng;
using pcsm::Vec3;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 u{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  const Vec3 v{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
  const Vec3 x{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
               u[0] * v[1] - u[1] * v[0]};
  return 0.5 * std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
}

// Point-in-triangle test via barycentric coordinates, tolerant at the edges.
bool on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 v0{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  const Vec3 v1{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
  const Vec3 v2{p[0] - a[0], p[1] - a[1], p[2] - a[2]};
  const double d00 = v0[0] * v0[0] + v0[1] * v0[1] + v0[2] * v0[2];
  const double d01 = v0[0] * v1[0] + v0[1] * v1[1] + v0[2] * v1[2];
  const double d11 = v1[0] * v1[0] + v1[1] * v1[1] + v1[2] * v1[2];
  const double d20 = v2[0] * v0[0] + v2[1] * v0[1] + v2[2] * v0[2];
  const double d21 = v2[0] * v1[0] + v2[1] * v1[1] + v2[2] * v1[2];
  const double den = d00 * d11 - d01 * d01;
  const double u = (d11 * d20 - d01 * d21) / den;
  const double v = (d00 * d21 - d01 * d20) / den;
  // also require the point to lie in the triangle plane
  const Vec3 n{v0[1] * v1[2] - v0[2] * v1[1], v0[2] * v1[0] - v0[0] * v1[2],
               v0[0] * v1[1] - v0[1] * v1[0]};
  const double off = n[0] * v2[0] + n[1] * v2[1] + n[2] * v2[2];
  return u >= -1e-9 && v >= -1e-9 && u + v <= 1.0 + 1e-9 && std::abs(off) < 1e-9;
}

}  // namespace

TEST_CASE("off parser handles comments, blank lines and the glued header") {
  const auto p = temp_file("pcsm_test_mesh.off");
  write_text(p,
             "OFF\n"
             "# a comment line\n"
             "\n"
             "4 2 0\n"
             "0 0 0\n"
             "1 0 0   # trailing comment\n"
             "0 1 0\n"
             "0 0 1\n"
             "3 0 1 2\n"
             "3 0 1 3\n");
  RawModel m = pcsm::load_off(p.string());
  REQUIRE(m.vertices.size() == 4);
  REQUIRE(m.faces.size() == 2);
  CHECK(m.vertices[1][0] == 1.0);
  CHECK(m.faces[1][2] == 3);

  const auto g = temp_file("pcsm_test_glued.off");
  write_text(g,
             "OFF3 1 0\n"
             "0 0 0\n"
             "2 0 0\n"
             "0 2 0\n"
             "3 0 1 2\n");
  RawModel gm = pcsm::load_off(g.string());
  CHECK(gm.vertices.size() == 3);
  CHECK(gm.faces.size() == 1);

  const auto bad = temp_file("pcsm_test_bad.off");
  write_text(bad, "OFF\n3 1 0\n0 0 0\n1 0 0\n");
  CHECK_THROWS_AS(pcsm::load_off(bad.string()), std::runtime_error);
  CHECK_THROWS_AS(pcsm::load_off("/nonexistent/missing.off"), std::runtime_error);

  std::filesystem::remove(p);
  std::filesystem::remove(g);
  std::filesystem::remove(bad);
}

TEST_CASE("surface sampling weights faces by area and stays on the surface") {
  // Two coplanar triangles with area ratio 1 : 3.
  RawModel m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 2, 0},   // area 1
                {5, 0, 0}, {8, 0, 0}, {5, 2, 0}};  // area 3
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  REQUIRE(triangle_area(m.vertices[0], m.vertices[1], m.vertices[2]) == doctest::Approx(1.0));
  REQUIRE(triangle_area(m.vertices[3], m.vertices[4], m.vertices[5]) == doctest::Approx(3.0));

  Rng rng(pcsm::mix_seed(401));
  const int n = 4000;
  PointCloud cloud = pcsm::mesh_to_cloud(m, n, rng);
  REQUIRE(cloud.size() == n);

  int on_small = 0, on_large = 0;
  for (const Vec3& p : cloud.points) {
    const bool s = on_triangle(p, m.vertices[0], m.vertices[1], m.vertices[2]);
    const bool l = on_triangle(p, m.vertices[3], m.vertices[4], m.vertices[5]);
    CHECK((s || l));
    on_small += s;
    on_large += l;
  }
  // Binomial(n, 1/4): mean 1000, sigma ~ 13.7; allow 4 sigma.
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  CHECK(std::abs(on_small - n * 0.25) < 4 * sigma);
  CHECK(on_small + on_large == n);

  // Determinism: same seed, same cloud.
  Rng rng2(pcsm::mix_seed(401));
  PointCloud again = pcsm::mesh_to_cloud(m, n, rng2);
  CHECK(again.points == cloud.points);

  CHECK_THROWS_AS(pcsm::mesh_to_cloud(m, 0, rng), std::invalid_argument);

  RawModel degenerate;
  degenerate.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  degenerate.faces = {{0, 1, 2}};  // zero area
  CHECK_THROWS_AS(pcsm::mesh_to_cloud(degenerate, 10, rng), std::invalid_argument);
}

TEST_CASE("faceless models fall back to vertex subsampling") {
  RawModel m;
  for (int i = 0; i < 50; ++i)
    m.vertices.push_back({double(i), double(i % 7), double(i % 3)});

  Rng rng(pcsm::mix_seed(402));
  // Exact count: verbatim copy, original order.
  PointCloud all = pcsm::mesh_to_cloud(m, 50, rng);
  CHECK(all.points == m.vertices);

  // Subsample: every output point is one of the vertices, no duplicates.
  PointCloud sub = pcsm::mesh_to_cloud(m, 20, rng);
  REQUIRE(sub.size() == 20);
  std::set<std::array<double, 3>> seen;
  for (const Vec3& p : sub.points) {
    CHECK(std::find(m.vertices.begin(), m.vertices.end(), p) != m.vertices.end());
    seen.insert({p[0], p[1], p[2]});
  }
  CHECK(seen.size() == 20);

  CHECK_THROWS_AS(pcsm::mesh_to_cloud(m, 51, rng), std::invalid_argument);
}

TEST_CASE("normalize_cloud maps the long axis onto the range and centers the rest") {
  PointCloud c;
  // extents: x spans 4 (longest), y spans 2, z spans 0
  c.points = {{0, 0, 1}, {4, 2, 1}, {1, 1, 1}};
  PointCloud n = pcsm::normalize_cloud(c, -1.0, 1.0);
  REQUIRE(n.size() == 3);

  // Longest axis hits both ends of the target range.
  CHECK(n.points[0][0] == doctest::Approx(-1.0));
  CHECK(n.points[1][0] == doctest::Approx(1.0));
  // Uniform scale: y spans half the range, centered.
  CHECK(n.points[0][1] == doctest::Approx(-0.5));
  CHECK(n.points[1][1] == doctest::Approx(0.5));
  // Flat axis collapses to the range midpoint.
  CHECK(n.points[0][2] == doctest::Approx(0.0));
  CHECK(n.points[2][2] == doctest::Approx(0.0));

  // Shape preservation: all pairwise distance ratios survive (scale 1/2).
  const double d01 = std::sqrt(pcsm::dist2(c.points[0], c.points[1]));
  const double nd01 = std::sqrt(pcsm::dist2(n.points[0], n.points[1]));
  CHECK(nd01 == doctest::Approx(0.5 * d01));

  // Affine invariance: normalizing a shifted/scaled copy gives the same set.
  PointCloud moved = c;
  for (Vec3& p : moved.points)
    for (int a = 0; a < 3; ++a) p[a] = 3.0 * p[a] + 17.0;
  PointCloud n2 = pcsm::normalize_cloud(moved, -1.0, 1.0);
  for (int i = 0; i < n.size(); ++i)
    for (int a = 0; a < 3; ++a)
      CHECK(n2.points[size_t(i)][a] == doctest::Approx(n.points[size_t(i)][a]).epsilon(1e-12));

  CHECK_THROWS_AS(pcsm::normalize_cloud(PointCloud{}, 0, 1), std::invalid_argument);

  // Zero extent cannot define the scale.
  PointCloud one;
  one.points = {{5, 6, 7}};
  CHECK_THROWS_AS(pcsm::normalize_cloud(one, 2.0, 4.0), std::invalid_argument);
}

TEST_CASE("ply round trip preserves coordinates") {
  Rng rng(pcsm::mix_seed(403));
  PointCloud c;
  for (int i = 0; i < 37; ++i)
    c.points.push_back({rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)});

  const auto p = temp_file("pcsm_test_cloud.ply");
  pcsm::write_ply(c, p.string());
  PointCloud back = pcsm::read_ply(p.string());
  REQUIRE(back.size() == c.size());
  for (int i = 0; i < c.size(); ++i)
    for (int a = 0; a < 3; ++a)
      CHECK(back.points[size_t(i)][a] == doctest::Approx(c.points[size_t(i)][a]).epsilon(1e-15));

  CHECK_THROWS_AS(pcsm::read_ply("/nonexistent/missing.ply"), std::runtime_error);
  std::filesystem::remove(p);
}

TEST_CASE("toy shapes are deterministic, sized and distinct") {
  const int n = 512;
  const std::vector<PointCloud> set_a = pcsm::toy_dataset(n, 77);
  const std::vector<PointCloud> set_b = pcsm::toy_dataset(n, 77);
  const std::vector<PointCloud> set_c = pcsm::toy_dataset(n, 78);
  REQUIRE(set_a.size() == pcsm::kToyShapeCount);

  for (std::size_t i = 0; i < set_a.size(); ++i) {
    CHECK(set_a[i].size() == n);
    CHECK(set_a[i].points == set_b[i].points);   // same seed, same clouds
    CHECK(set_a[i].points != set_c[i].points);   // different seed differs
    for (const Vec3& p : set_a[i].points)
      for (int a = 0; a < 3; ++a) {
        CHECK(std::isfinite(p[a]));
        CHECK(std::abs(p[a]) < 10.0);  // roughly unit scale
      }
  }

  // Shapes differ from each other (no copy-paste generator).
  for (std::size_t i = 1; i < set_a.size(); ++i)
    CHECK(set_a[0].points != set_a[i].points);

  // Names exist and are unique.
  std::set<std::string> names;
  for (int s = 0; s < pcsm::kToyShapeCount; ++s)
    names.insert(pcsm::toy_shape_name(static_cast<pcsm::ToyShape>(s)));
  CHECK(names.size() == pcsm::kToyShapeCount);

  // A sphere's points sit on the unit sphere.
  Rng rng(pcsm::mix_seed(404));
  PointCloud sphere = pcsm::make_shape(pcsm::ToyShape::sphere, 100, rng);
  for (const Vec3& p : sphere.points) {
    const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    CHECK(r == doctest::Approx(1.0).epsilon(1e-9));
  }
}
