#pragma once

#include <string>
#include <vector>

#include "pcsm/geometry.hpp"
#include "pcsm/rng.hpp"

namespace pcsm {

// Mesh as read from disk. faces may be empty for pure point files.
struct RawModel {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

// Reads an OFF mesh. Accepts '#' comments and the common variant where the
// counts are glued onto the OFF keyword. Parse errors name the line.
RawModel load_off(const std::string& path);

// Draws n_surface points from the mesh surface, faces weighted by area.
// Faceless models fall back to vertex subsampling (verbatim when counts
// match) and need at least n_surface vertices.
PointCloud mesh_to_cloud(const RawModel& model, int n_surface, Rng& rng);

// Uniform-scale affine map of the bounding box into [lo,hi]^3: the longest
// axis spans the full range, the others are centered. Shape is preserved.
PointCloud normalize_cloud(const PointCloud& cloud, double lo, double hi);

// ASCII PLY with x/y/z only.
void write_ply(const PointCloud& cloud, const std::string& path);
PointCloud read_ply(const std::string& path);

}  // namespace pcsm
