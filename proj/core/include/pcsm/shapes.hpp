#pragma once

#include <string>
#include <vector>

#include "pcsm/geometry.hpp"
#include "pcsm/rng.hpp"

namespace pcsm {

// Procedural stand-ins for mesh data so training and CI need no downloads.
enum class ToyShape { sphere, torus, box, cylinder, cone, capsule, bracket, helix };

constexpr int kToyShapeCount = 8;

const char* toy_shape_name(ToyShape shape);

// n points sampled from the shape's surface, in model units (roughly unit
// scale, centered near the origin). Deterministic given the rng state.
PointCloud make_shape(ToyShape shape, int n, Rng& rng);

// One cloud per shape, each drawn with an independent rng forked from seed.
std::vector<PointCloud> toy_dataset(int n, std::uint64_t seed);

}  // namespace pcsm
