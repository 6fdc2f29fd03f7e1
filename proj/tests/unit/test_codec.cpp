#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pcsm/codec.hpp"
#include "pcsm/geometry.hpp"
#include "pcsm/rng.hpp"
#include "pcsm/tensor.hpp"

using pcsm::CameraParams;
using pcsm::PatchSet;
using pcsm::PointCloud;
using pcsm::ProjectionStack;
using pcsm::Rng;
using pcsm::Tensor;
using pcsm::Vec3;

namespace {

constexpr double kPi = std::numbers::pi;

PointCloud random_cloud(int n, Rng& rng, double extent = 1.0) {
  PointCloud c;
  for (int i = 0; i < n; ++i)
    c.points.push_back({rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                        rng.uniform(-extent, extent)});
  return c;
}

PatchSet random_patches(int s, int k, Rng& rng) {
  PatchSet ps;
  ps.s = s;
  ps.k = k;
  for (int i = 0; i < s * k; ++i)
    ps.patch_points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  for (int i = 0; i < s; ++i)
    ps.centroids.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
  return ps;
}

// Brute-force symmetric squared nearest-neighbor sum, over |reference|.
double chamfer_oracle(const PointCloud& ref, const PointCloud& cand) {
  double total = 0.0;
  for (const Vec3& p : ref.points) {
    double best = 1e300;
    for (const Vec3& q : cand.points) best = std::min(best, pcsm::dist2(p, q));
    total += best;
  }
  for (const Vec3& q : cand.points) {
    double best = 1e300;
    for (const Vec3& p : ref.points) best = std::min(best, pcsm::dist2(p, q));
    total += best;
  }
  return total / ref.size();
}

void zero_values(pcsm::nn::Parameter& p) {
  std::fill(p.tensor.values().begin(), p.tensor.values().end(), 0.0);
}

std::vector<double> fd_vals(Rng& rng, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("local encoder is invariant to point order within a patch") {
  Rng rng(pcsm::mix_seed(501));
  pcsm::LocalEncoder enc("enc", 16, 6, rng);

  PatchSet ps = random_patches(3, 16, rng);
  const Tensor base = enc.encode(ps);
  REQUIRE(base.shape() == pcsm::Shape{3, 6});

  // Shuffle the points of every patch independently; features must not move.
  PatchSet shuffled = ps;
  for (int i = 0; i < ps.s; ++i) {
    auto begin = shuffled.patch_points.begin() + static_cast<std::ptrdiff_t>(i) * ps.k;
    for (int j = ps.k - 1; j > 0; --j)
      std::swap(begin[j], begin[static_cast<std::ptrdiff_t>(rng.index(j + 1))]);
  }
  const Tensor same = enc.encode(shuffled);
  CHECK(same.values() == base.values());

  // Rows depend only on their own patch: deform patch 2, rows 0 and 1 stay.
  PatchSet moved = ps;
  for (int j = 0; j < ps.k; ++j)
    moved.patch_points[static_cast<std::size_t>(2 * ps.k + j)][0] *= 1.7;
  const Tensor other = enc.encode(moved);
  for (int col = 0; col < 6; ++col) {
    CHECK(other.values()[static_cast<std::size_t>(col)] == base.values()[static_cast<std::size_t>(col)]);
    CHECK(other.values()[static_cast<std::size_t>(6 + col)] == base.values()[static_cast<std::size_t>(6 + col)]);
  }
  CHECK(other.values() != base.values());

  CHECK_THROWS_AS(pcsm::LocalEncoder("bad", 6, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(pcsm::LocalEncoder("bad", 0, 4, rng), std::invalid_argument);
  PatchSet wrong = random_patches(2, 8, rng);
  CHECK_THROWS_AS(enc.encode(wrong), std::invalid_argument);
}

TEST_CASE("zeroed camera head yields canonical evenly spaced views") {
  Rng rng(pcsm::mix_seed(502));
  const int v = 4;
  pcsm::CameraPredictor cam("cam", v, rng);
  zero_values(cam.head2.w);
  zero_values(cam.head2.b);

  PointCloud cloud = random_cloud(64, rng);
  // Bounding-sphere radius about the bbox center, straight from the data.
  Vec3 bmin = cloud.points[0], bmax = cloud.points[0];
  for (const Vec3& p : cloud.points)
    for (int a = 0; a < 3; ++a) {
      bmin[a] = std::min(bmin[a], p[a]);
      bmax[a] = std::max(bmax[a], p[a]);
    }
  const Vec3 center{0.5 * (bmin[0] + bmax[0]), 0.5 * (bmin[1] + bmax[1]),
                    0.5 * (bmin[2] + bmax[2])};
  double r2 = 0.0;
  for (const Vec3& p : cloud.points) r2 = std::max(r2, pcsm::dist2(p, center));
  const double radius = std::sqrt(r2);

  const CameraParams cams = cam.predict(cloud);
  REQUIRE(cams.views() == v);
  for (int i = 0; i < v; ++i) {
    CHECK(cams.azimuth[static_cast<std::size_t>(i)] ==
          doctest::Approx(2.0 * kPi * i / v).epsilon(1e-12));
    CHECK(cams.elevation[static_cast<std::size_t>(i)] == doctest::Approx(0.0));
    CHECK(cams.distance[static_cast<std::size_t>(i)] ==
          doctest::Approx(2.0 * radius).epsilon(1e-12));
  }

  // With the real (small but nonzero) head the views move off canonical.
  pcsm::CameraPredictor cam2("cam2", v, rng);
  const CameraParams moved = cam2.predict(cloud);
  bool any_off = false;
  for (int i = 0; i < v; ++i)
    any_off = any_off || std::abs(moved.azimuth[static_cast<std::size_t>(i)] -
                                  2.0 * kPi * i / v) > 1e-9;
  CHECK(any_off);
  // Distance stays within its design band (R, 3R).
  for (double d : moved.distance) {
    CHECK(d > radius);
    CHECK(d < 3.0 * radius);
  }

  CHECK_THROWS_AS(pcsm::CameraPredictor("bad", 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(cam.forward(PointCloud{}), std::invalid_argument);
}

TEST_CASE("renderer places single points at hand-computed pixels") {
  const int hw = 17;  // odd, so the image center is an exact pixel
  const double sigma = 1.0;

  // A point on the +x axis seen from azimuth 0: right = (1,0,0), up = (0,0,1),
  // a = 0.5, b = 0 -> px = 0.5*(1 + 0.5/2)*16 = 10, py = 8.
  PointCloud one;
  one.points = {{0.5, 0.0, 0.0}};
  CameraParams cams;
  cams.azimuth = {0.0};
  cams.elevation = {0.0};
  cams.distance = {2.0};

  ProjectionStack img = pcsm::render_views(one, cams, hw, hw, sigma);
  REQUIRE(img.v == 1);
  CHECK(img.at(0, 8, 10) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(img.at(0, 8, 9) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
  CHECK(img.at(0, 8, 11) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
  CHECK(img.at(0, 7, 10) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
  CHECK(img.at(0, 8, 12) == doctest::Approx(std::exp(-2.0)).epsilon(1e-9));
  CHECK(img.at(0, 0, 0) < 1e-10);

  // Rotating the camera a quarter turn moves the point onto the optical
  // axis: right = (0,1,0) gives a = 0 -> the center pixel.
  cams.azimuth = {kPi / 2.0};
  ProjectionStack turned = pcsm::render_views(one, cams, hw, hw, sigma);
  CHECK(turned.at(0, 8, 8) == doctest::Approx(1.0).epsilon(1e-12));

  // Zoom out: distance 4 halves the offset, px = 0.5*(1+0.125)*16 = 9.
  cams.azimuth = {0.0};
  cams.distance = {4.0};
  ProjectionStack far = pcsm::render_views(one, cams, hw, hw, sigma);
  CHECK(far.at(0, 8, 9) == doctest::Approx(1.0).epsilon(1e-12));

  // Elevation pi/2 looks straight down: up = (0,-1,0)*sin + ... for a +y
  // point, b = (0.5,0,0)... use a +z point instead: up = (0,0,1) at el=0
  // maps z onto rows.
  PointCloud zpt;
  zpt.points = {{0.0, 0.0, 0.5}};
  cams.distance = {2.0};
  ProjectionStack zimg = pcsm::render_views(zpt, cams, hw, hw, sigma);
  // py = 0.5*(1 - 0.25)*16 = 6: +z goes up the image (smaller row index).
  CHECK(zimg.at(0, 6, 8) == doctest::Approx(1.0).epsilon(1e-12));

  // The pixel cap: two coincident points sum to 2 and clamp to 1.
  PointCloud dup;
  dup.points = {{0.5, 0.0, 0.0}, {0.5, 0.0, 0.0}};
  ProjectionStack capped = pcsm::render_views(dup, cams, hw, hw, sigma);
  CHECK(capped.at(0, 8, 10) == 1.0);

  // The differentiable path produces the identical stack.
  Tensor cam_t = Tensor::constant({1, 3}, {0.0, 0.0, 2.0});
  Tensor timg = pcsm::render_views_op(cam_t, one, hw, hw, sigma);
  REQUIRE(timg.shape() == pcsm::Shape{1, 1, hw, hw});
  ProjectionStack base = pcsm::render_views(one, {{0.0}, {0.0}, {2.0}}, hw, hw, sigma);
  CHECK(timg.values() == base.pixels);

  CHECK_THROWS_AS(pcsm::render_views(one, cams, 8, 17, sigma), std::invalid_argument);
  CHECK_THROWS_AS(pcsm::render_views(one, cams, 17, 17, 0.0), std::invalid_argument);
  CameraParams bad = cams;
  bad.distance = {0.0};
  CHECK_THROWS_AS(pcsm::render_views(one, bad, 17, 17, sigma), std::invalid_argument);
}

TEST_CASE("translated clouds render differently (projection is about the origin)") {
  Rng rng(pcsm::mix_seed(503));
  PointCloud cloud = random_cloud(64, rng, 0.5);
  PointCloud shifted = cloud;
  for (Vec3& p : shifted.points) p[0] += 0.7;

  CameraParams cams;
  cams.azimuth = {0.0, 2.1};
  cams.elevation = {0.2, -0.4};
  cams.distance = {2.0, 2.5};
  const ProjectionStack a = pcsm::render_views(cloud, cams, 16, 16, 1.0);
  const ProjectionStack b = pcsm::render_views(shifted, cams, 16, 16, 1.0);
  CHECK(a.pixels != b.pixels);

  // And all pixels stay in [0,1].
  for (double px : a.pixels) {
    CHECK(px >= 0.0);
    CHECK(px <= 1.0);
  }
}

TEST_CASE("pgm dump writes a parsable grayscale image") {
  PointCloud one;
  one.points = {{0.0, 0.0, 0.0}};
  CameraParams cams{{0.0}, {0.0}, {2.0}};
  const ProjectionStack img = pcsm::render_views(one, cams, 17, 17, 1.0);
  const auto path = std::filesystem::temp_directory_path() / "pcsm_test_view.pgm";
  pcsm::write_pgm(img, 0, path.string());

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  CHECK(magic == "P2");
  CHECK(w == 17);
  CHECK(h == 17);
  CHECK(maxv == 255);
  int count = 0, value = 0, peak = 0;
  while (in >> value) {
    CHECK(value >= 0);
    CHECK(value <= maxv);
    peak = std::max(peak, value);
    ++count;
  }
  CHECK(count == 17 * 17);
  CHECK(peak == 255);  // the splat center saturates
  std::filesystem::remove(path);
}

TEST_CASE("global encoder ignores view order") {
  Rng rng(pcsm::mix_seed(504));
  const int hw = 16, v = 3;
  pcsm::GlobalEncoder enc("g", hw, hw, 8, 5, rng);

  std::vector<double> pix(static_cast<std::size_t>(v) * hw * hw);
  for (double& x : pix) x = rng.uniform(0.0, 1.0);
  Tensor views = Tensor::constant({v, 1, hw, hw}, pix);
  const Tensor feat = enc.encode(views);
  REQUIRE(feat.shape() == pcsm::Shape{1, 5});

  // Rotate the view order; the pooled feature must not move.
  std::vector<double> rot(pix.size());
  const std::size_t plane = static_cast<std::size_t>(hw) * hw;
  std::rotate_copy(pix.begin(), pix.end() - static_cast<std::ptrdiff_t>(plane), pix.end(),
                   rot.begin());
  const Tensor feat2 = enc.encode(Tensor::constant({v, 1, hw, hw}, rot));
  CHECK(feat2.values() == feat.values());

  // Different images give a different feature.
  std::vector<double> other = pix;
  for (std::size_t i = 0; i < plane; ++i) other[i] = 1.0 - other[i];
  CHECK(enc.encode(Tensor::constant({v, 1, hw, hw}, other)).values() != feat.values());

  CHECK_THROWS_AS(enc.encode(Tensor::constant({v, 2, hw, hw},
                                              std::vector<double>(static_cast<std::size_t>(v) * 2 * plane, 0.0))),
                  std::invalid_argument);
}

TEST_CASE("decoder output shifts exactly with the patch anchors") {
  Rng rng(pcsm::mix_seed(505));
  const int s = 3, d = 5, dprime = 4, pts = 6;
  pcsm::SemanticDecoder dec("dec", d, dprime, pts, rng, 32);

  Tensor local = Tensor::constant({s, d}, fd_vals(rng, s * d));
  Tensor global = Tensor::constant({1, dprime}, fd_vals(rng, dprime));
  std::vector<Vec3> anchors;
  for (int i = 0; i < s; ++i)
    anchors.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});

  const Tensor out = dec.decode(local, global, anchors);
  REQUIRE(out.shape() == pcsm::Shape{s * pts, 3});

  const Vec3 t{0.3, -0.2, 0.15};
  std::vector<Vec3> moved = anchors;
  for (Vec3& a : moved)
    for (int c = 0; c < 3; ++c) a[c] += t[c];
  const Tensor out2 = dec.decode(local, global, moved);
  for (int i = 0; i < s * pts; ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(out2.values()[static_cast<std::size_t>(i * 3 + c)] -
                out.values()[static_cast<std::size_t>(i * 3 + c)] ==
            doctest::Approx(t[c]).epsilon(1e-12));

  // The global row reaches every patch: change it, everything moves.
  Tensor global2 = Tensor::constant({1, dprime}, fd_vals(rng, dprime));
  const Tensor out3 = dec.decode(local, global2, anchors);
  CHECK(out3.values() != out.values());

  // decode_cloud agrees with the tensor path.
  const PointCloud cloud = dec.decode_cloud(local, global, anchors);
  REQUIRE(cloud.size() == s * pts);
  for (int i = 0; i < cloud.size(); ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(cloud.points[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] ==
            out.values()[static_cast<std::size_t>(i * 3 + c)]);

  // Without a global stream the decoder still upsamples.
  pcsm::SemanticDecoder solo("solo", d, 0, pts, rng, 32);
  const Tensor lone = solo.decode(local, anchors);
  CHECK(lone.shape() == pcsm::Shape{s * pts, 3});

  // Mismatched inputs are rejected.
  CHECK_THROWS_AS(dec.decode(local, anchors), std::invalid_argument);  // needs global
  std::vector<Vec3> short_anchors(anchors.begin(), anchors.end() - 1);
  CHECK_THROWS_AS(dec.decode(local, global, short_anchors), std::invalid_argument);
  Tensor bad_global = Tensor::constant({1, dprime + 1},
                                       std::vector<double>(static_cast<std::size_t>(dprime + 1), 0.0));
  CHECK_THROWS_AS(dec.decode(local, bad_global, anchors), std::invalid_argument);
}

TEST_CASE("chamfer distance: hand values and brute-force agreement") {
  PointCloud a, b;
  a.points = {{0, 0, 0}};
  b.points = {{1, 0, 0}};
  CHECK(pcsm::chamfer(a, b) == doctest::Approx(2.0));

  PointCloud c, d;
  c.points = {{0, 0, 0}, {2, 0, 0}};
  d.points = {{0, 0, 0}};
  // c->d: 0 + 4; d->c: 0; total 4 over |c| = 2.
  CHECK(pcsm::chamfer(c, d) == doctest::Approx(2.0));
  // Swapped, the normalizer is |d| = 1.
  CHECK(pcsm::chamfer(d, c) == doctest::Approx(4.0));

  CHECK(pcsm::chamfer(a, a) == 0.0);

  Rng rng(pcsm::mix_seed(506));
  for (int trial = 0; trial < 10; ++trial) {
    PointCloud x = random_cloud(40 + static_cast<int>(rng.index(30)), rng);
    PointCloud y = random_cloud(30 + static_cast<int>(rng.index(40)), rng);
    CHECK(pcsm::chamfer(x, y) == doctest::Approx(chamfer_oracle(x, y)).epsilon(1e-12));
  }

  // The differentiable form computes the same number.
  PointCloud ref = random_cloud(25, rng);
  PointCloud cand = random_cloud(30, rng);
  std::vector<double> flat;
  for (const Vec3& p : cand.points) {
    flat.push_back(p[0]);
    flat.push_back(p[1]);
    flat.push_back(p[2]);
  }
  Tensor cand_t = Tensor::constant({30, 3}, flat);
  CHECK(pcsm::chamfer_loss(ref, cand_t).item() ==
        doctest::Approx(pcsm::chamfer(ref, cand)).epsilon(1e-12));

  CHECK_THROWS_AS(pcsm::chamfer(PointCloud{}, a), std::invalid_argument);
  CHECK_THROWS_AS(pcsm::chamfer(a, PointCloud{}), std::invalid_argument);
  CHECK_THROWS_AS(pcsm::chamfer_loss(PointCloud{}, cand_t), std::invalid_argument);
  CHECK_THROWS_AS(pcsm::chamfer_loss(ref, Tensor::constant({4, 2}, {0, 0, 0, 0, 0, 0, 0, 0})),
                  std::invalid_argument);
}
