#include "pcsm/shapes.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pcsm {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 sphere_dir(Rng& rng) {
  for (;;) {
    const Vec3 v{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    const double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (len > 1e-12) return {v[0] / len, v[1] / len, v[2] / len};
  }
}

Vec3 sample_sphere(Rng& rng) {
  const Vec3 d = sphere_dir(rng);
  return {d[0], d[1], d[2]};
}

Vec3 sample_torus(Rng& rng) {
  const double big = 0.8, small = 0.35;
  for (;;) {
    const double u = rng.uniform(0.0, 2.0 * kPi);
    const double v = rng.uniform(0.0, 2.0 * kPi);
    // Area density scales with the distance from the axis.
    if (rng.uniform() * (big + small) > big + small * std::cos(v)) continue;
    const double ring = big + small * std::cos(v);
    return {ring * std::cos(u), ring * std::sin(u), small * std::sin(v)};
  }
}

// Axis-aligned box surface with half extents h, centered at c.
Vec3 sample_box_at(const Vec3& c, const Vec3& h, Rng& rng) {
  const double ax = h[1] * h[2], ay = h[0] * h[2], az = h[0] * h[1];
  const double pick = rng.uniform() * (ax + ay + az);
  Vec3 p{rng.uniform(-h[0], h[0]), rng.uniform(-h[1], h[1]), rng.uniform(-h[2], h[2])};
  const int axis = pick < ax ? 0 : (pick < ax + ay ? 1 : 2);
  p[axis] = rng.uniform() < 0.5 ? -h[axis] : h[axis];
  return {c[0] + p[0], c[1] + p[1], c[2] + p[2]};
}

Vec3 sample_box(Rng& rng) { return sample_box_at({0, 0, 0}, {0.8, 1.0, 0.6}, rng); }

Vec3 sample_cylinder(Rng& rng) {
  const double r = 0.5, hh = 1.0;
  const double side = 2.0 * kPi * r * (2.0 * hh);
  const double caps = 2.0 * kPi * r * r;
  if (rng.uniform() * (side + caps) < side) {
    const double a = rng.uniform(0.0, 2.0 * kPi);
    return {r * std::cos(a), r * std::sin(a), rng.uniform(-hh, hh)};
  }
  const double a = rng.uniform(0.0, 2.0 * kPi);
  const double rr = r * std::sqrt(rng.uniform());
  const double z = rng.uniform() < 0.5 ? -hh : hh;
  return {rr * std::cos(a), rr * std::sin(a), z};
}

Vec3 sample_cone(Rng& rng) {
  const double r = 0.8, h = 1.6;
  const double lateral = kPi * r * std::sqrt(r * r + h * h);
  const double base = kPi * r * r;
  const double a = rng.uniform(0.0, 2.0 * kPi);
  if (rng.uniform() * (lateral + base) < lateral) {
    // Fraction of the way down from the apex; area grows linearly with it.
    const double t = std::sqrt(rng.uniform());
    return {t * r * std::cos(a), t * r * std::sin(a), h * (0.5 - t)};
  }
  const double rr = r * std::sqrt(rng.uniform());
  return {rr * std::cos(a), rr * std::sin(a), -0.5 * h};
}

Vec3 sample_capsule(Rng& rng) {
  const double r = 0.45, hh = 0.7;
  const double side = 2.0 * kPi * r * (2.0 * hh);
  const double domes = 4.0 * kPi * r * r;
  if (rng.uniform() * (side + domes) < side) {
    const double a = rng.uniform(0.0, 2.0 * kPi);
    return {r * std::cos(a), r * std::sin(a), rng.uniform(-hh, hh)};
  }
  Vec3 d = sphere_dir(rng);
  const double z = d[2] >= 0.0 ? hh : -hh;
  return {r * d[0], r * d[1], r * d[2] + z};
}

Vec3 sample_bracket(Rng& rng) {
  // Two slabs joined into an L lying in the xz plane.
  const Vec3 h_foot{0.9, 0.2, 0.2};
  const Vec3 c_foot{0.0, 0.0, -0.8};
  const Vec3 h_leg{0.2, 0.2, 0.8};
  const Vec3 c_leg{-0.7, 0.0, 0.2};
  auto area = [](const Vec3& h) {
    return 8.0 * (h[1] * h[2] + h[0] * h[2] + h[0] * h[1]);
  };
  if (rng.uniform() * (area(h_foot) + area(h_leg)) < area(h_foot))
    return sample_box_at(c_foot, h_foot, rng);
  return sample_box_at(c_leg, h_leg, rng);
}

Vec3 sample_helix(Rng& rng) {
  const double big = 0.7, tube = 0.16;
  const double turns = 2.0;
  const double pitch = 1.0 / (turns * kPi);  // total height 2 over 2 turns
  const double t = rng.uniform(0.0, turns * 2.0 * kPi);
  const double speed = std::sqrt(big * big + pitch * pitch);
  const Vec3 center{big * std::cos(t), big * std::sin(t), pitch * t - 1.0};
  const Vec3 tangent{-big * std::sin(t) / speed, big * std::cos(t) / speed, pitch / speed};
  const Vec3 normal{-std::cos(t), -std::sin(t), 0.0};
  const Vec3 binormal{tangent[1] * normal[2] - tangent[2] * normal[1],
                      tangent[2] * normal[0] - tangent[0] * normal[2],
                      tangent[0] * normal[1] - tangent[1] * normal[0]};
  const double a = rng.uniform(0.0, 2.0 * kPi);
  const double cn = tube * std::cos(a), cb = tube * std::sin(a);
  return {center[0] + cn * normal[0] + cb * binormal[0],
          center[1] + cn * normal[1] + cb * binormal[1],
          center[2] + cn * normal[2] + cb * binormal[2]};
}

}  // namespace

const char* toy_shape_name(ToyShape shape) {
  switch (shape) {
    case ToyShape::sphere: return "sphere";
    case ToyShape::torus: return "torus";
    case ToyShape::box: return "box";
    case ToyShape::cylinder: return "cylinder";
    case ToyShape::cone: return "cone";
    case ToyShape::capsule: return "capsule";
    case ToyShape::bracket: return "bracket";
    case ToyShape::helix: return "helix";
  }
  throw std::invalid_argument("toy_shape_name: unknown shape");
}

PointCloud make_shape(ToyShape shape, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("make_shape: need a positive point count");
  PointCloud out;
  out.points.reserve(n);
  for (int i = 0; i < n; ++i) {
    switch (shape) {
      case ToyShape::sphere: out.points.push_back(sample_sphere(rng)); break;
      case ToyShape::torus: out.points.push_back(sample_torus(rng)); break;
      case ToyShape::box: out.points.push_back(sample_box(rng)); break;
      case ToyShape::cylinder: out.points.push_back(sample_cylinder(rng)); break;
      case ToyShape::cone: out.points.push_back(sample_cone(rng)); break;
      case ToyShape::capsule: out.points.push_back(sample_capsule(rng)); break;
      case ToyShape::bracket: out.points.push_back(sample_bracket(rng)); break;
      case ToyShape::helix: out.points.push_back(sample_helix(rng)); break;
    }
  }
  return out;
}

std::vector<PointCloud> toy_dataset(int n, std::uint64_t seed) {
  std::vector<PointCloud> out;
  out.reserve(kToyShapeCount);
  Rng root(seed);
  for (int i = 0; i < kToyShapeCount; ++i) {
    Rng shape_rng = root.fork(static_cast<std::uint64_t>(i));
    out.push_back(make_shape(static_cast<ToyShape>(i), n, shape_rng));
  }
  return out;
}

}  // namespace pcsm
