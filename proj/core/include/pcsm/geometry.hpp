#pragma once

#include <array>
#include <vector>

namespace pcsm {

using Vec3 = std::array<double, 3>;

// N x 3 coordinate set. Invariant: non-empty, all coordinates finite.
struct PointCloud {
  std::vector<Vec3> points;

  int size() const { return static_cast<int>(points.size()); }
};

// S patches of k points each, stored centered (centroid subtracted).
// extract_patches produces k = 2N/S; decoded sets may carry any k.
struct PatchSet {
  int s = 0;
  int k = 0;
  std::vector<Vec3> patch_points;  // s*k entries, patch-major
  std::vector<Vec3> centroids;     // s entries
};

struct NormalField {
  std::vector<Vec3> normals;  // unit length, aligned to a PointCloud
};

double dist2(const Vec3& a, const Vec3& b);

// Greedy farthest point sampling. First pick is seed_index; every later pick
// maximizes the min squared distance to the picked set, ties to lowest index.
std::vector<int> fps(const PointCloud& cloud, int m, int seed_index = 0);

// k nearest neighbors of query, ascending squared distance, ties to lowest
// index. The query may coincide with cloud points.
std::vector<int> knn(const PointCloud& cloud, const Vec3& query, int k);

// Splits the cloud into s patches of k = 2N/s points: centroids by FPS from
// index 0, members by kNN around each centroid, then re-centered. Points may
// land in several patches (oversampled cover).
PatchSet extract_patches(const PointCloud& cloud, int s);

// Undoes the centering: point j of patch i maps to value + centroid_i.
// Output order is patch-major, s*k points total.
PointCloud reassemble(const PatchSet& patches);

double bbox_diagonal(const PointCloud& cloud);

// Per-point plane fit over the k nearest neighbors: the normal is the
// eigenvector of the smallest covariance eigenvalue, sign fixed so the
// largest-magnitude component is positive.
NormalField estimate_normals(const PointCloud& cloud, int k = 12);

// Uniform-grid index over a fixed cloud for nearest-point queries. Matches
// the brute-force scan exactly, including the lowest-index tie rule.
class GridIndex {
 public:
  explicit GridIndex(const PointCloud& cloud);

  // Index of the cloud point nearest to query.
  int nearest(const Vec3& query) const;
  // Same, also reporting the squared distance.
  std::pair<int, double> nearest_with_dist2(const Vec3& query) const;

 private:
  const PointCloud& cloud_;
  Vec3 lo_{};
  double cell_ = 0.0;  // 0 means brute-force fallback
  int nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<std::vector<int>> cells_;

  int cell_of(double v, double lo, int n) const;
};

}  // namespace pcsm
