#include "pcsm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pcsm {

double dist2(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

std::vector<int> fps(const PointCloud& cloud, int m, int seed_index) {
  const int n = cloud.size();
  if (n < 1) throw std::invalid_argument("fps: empty cloud");
  if (m < 1 || m > n) throw std::invalid_argument("fps: m must be in [1, N]");
  if (seed_index < 0 || seed_index >= n)
    throw std::invalid_argument("fps: seed index out of range");

  std::vector<int> picked;
  picked.reserve(m);
  picked.push_back(seed_index);

  // min_d2[i] tracks the squared distance from point i to the picked set.
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  for (int step = 1; step < m; ++step) {
    const Vec3& last = cloud.points[picked.back()];
    int best = -1;
    double best_d2 = -1.0;
    for (int i = 0; i < n; ++i) {
      const double d2 = dist2(cloud.points[i], last);
      if (d2 < min_d2[i]) min_d2[i] = d2;
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    picked.push_back(best);
    min_d2[best] = -1.0;  // excludes it from future argmax rounds
  }
  return picked;
}

std::vector<int> knn(const PointCloud& cloud, const Vec3& query, int k) {
  const int n = cloud.size();
  if (k < 1 || k > n) throw std::invalid_argument("knn: k must be in [1, N]");

  std::vector<std::pair<double, int>> order(n);
  for (int i = 0; i < n; ++i) order[i] = {dist2(cloud.points[i], query), i};
  std::partial_sort(order.begin(), order.begin() + k, order.end());

  std::vector<int> out(k);
  for (int i = 0; i < k; ++i) out[i] = order[i].second;
  return out;
}

PatchSet extract_patches(const PointCloud& cloud, int s) {
  const int n = cloud.size();
  if (s < 1) throw std::invalid_argument("extract_patches: patch count must be positive");
  if ((2 * n) % s != 0)
    throw std::invalid_argument("extract_patches: patch count " + std::to_string(s) +
                                " does not divide 2N = " + std::to_string(2 * n));
  const int k = 2 * n / s;
  if (k > n)
    throw std::invalid_argument("extract_patches: patch size 2N/S = " + std::to_string(k) +
                                " exceeds cloud size");

  PatchSet out;
  out.s = s;
  out.k = k;
  out.patch_points.reserve(static_cast<std::size_t>(s) * k);
  out.centroids.reserve(s);

  const std::vector<int> centers = fps(cloud, s, 0);
  for (int ci : centers) {
    const Vec3& c = cloud.points[ci];
    out.centroids.push_back(c);
    for (int pi : knn(cloud, c, k)) {
      const Vec3& p = cloud.points[pi];
      out.patch_points.push_back({p[0] - c[0], p[1] - c[1], p[2] - c[2]});
    }
  }
  return out;
}

PointCloud reassemble(const PatchSet& patches) {
  const std::size_t want = static_cast<std::size_t>(patches.s) * patches.k;
  if (patches.patch_points.size() != want ||
      patches.centroids.size() != static_cast<std::size_t>(patches.s))
    throw std::invalid_argument("reassemble: patch/centroid shapes disagree");

  PointCloud out;
  out.points.reserve(want);
  for (int i = 0; i < patches.s; ++i) {
    const Vec3& c = patches.centroids[i];
    for (int j = 0; j < patches.k; ++j) {
      const Vec3& p = patches.patch_points[static_cast<std::size_t>(i) * patches.k + j];
      out.points.push_back({p[0] + c[0], p[1] + c[1], p[2] + c[2]});
    }
  }
  return out;
}

double bbox_diagonal(const PointCloud& cloud) {
  if (cloud.points.empty()) throw std::invalid_argument("bbox_diagonal: empty cloud");
  Vec3 lo = cloud.points[0], hi = cloud.points[0];
  for (const Vec3& p : cloud.points)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  const double dx = hi[0] - lo[0], dy = hi[1] - lo[1], dz = hi[2] - lo[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

namespace {

// Jacobi eigendecomposition of a symmetric 3x3 matrix. Columns of v become
// the eigenvectors of a's eigenvalues in eig.
void jacobi3(double a[3][3], double eig[3], double v[3][3]) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) v[i][j] = (i == j) ? 1.0 : 0.0;

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
    if (off == 0.0) break;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        const double app = a[p][p], aqq = a[q][q], apq = a[p][q];
        a[p][p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
        a[q][q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
        a[p][q] = a[q][p] = 0.0;
        const int r = 3 - p - q;
        const double arp = a[r][p], arq = a[r][q];
        a[r][p] = a[p][r] = c * arp - s * arq;
        a[r][q] = a[q][r] = s * arp + c * arq;
        for (int i = 0; i < 3; ++i) {
          const double vip = v[i][p], viq = v[i][q];
          v[i][p] = c * vip - s * viq;
          v[i][q] = s * vip + c * viq;
        }
      }
  }
  for (int i = 0; i < 3; ++i) eig[i] = a[i][i];
}

}  // namespace

NormalField estimate_normals(const PointCloud& cloud, int k) {
  const int n = cloud.size();
  if (k < 3) throw std::invalid_argument("estimate_normals: need k >= 3");
  if (k > n) throw std::invalid_argument("estimate_normals: k exceeds cloud size");

  NormalField out;
  out.normals.resize(n);
  for (int i = 0; i < n; ++i) {
    const std::vector<int> nb = knn(cloud, cloud.points[i], k);

    Vec3 mean{0.0, 0.0, 0.0};
    for (int j : nb)
      for (int a = 0; a < 3; ++a) mean[a] += cloud.points[j][a];
    for (int a = 0; a < 3; ++a) mean[a] /= k;

    double cov[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    for (int j : nb) {
      const Vec3& p = cloud.points[j];
      const double d[3] = {p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]};
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cov[r][c] += d[r] * d[c];
    }
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cov[r][c] /= k;

    double eig[3], vec[3][3];
    jacobi3(cov, eig, vec);
    int lo = 0;
    for (int a = 1; a < 3; ++a)
      if (eig[a] < eig[lo]) lo = a;

    Vec3 nrm{vec[0][lo], vec[1][lo], vec[2][lo]};
    const double len = std::sqrt(nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]);
    for (int a = 0; a < 3; ++a) nrm[a] /= len;

    int big = 0;
    for (int a = 1; a < 3; ++a)
      if (std::abs(nrm[a]) > std::abs(nrm[big])) big = a;
    if (nrm[big] < 0.0)
      for (int a = 0; a < 3; ++a) nrm[a] = -nrm[a];
    out.normals[i] = nrm;
  }
  return out;
}

GridIndex::GridIndex(const PointCloud& cloud) : cloud_(cloud) {
  const int n = cloud.size();
  if (n < 1) throw std::invalid_argument("GridIndex: empty cloud");
  Vec3 hi = cloud.points[0];
  lo_ = cloud.points[0];
  for (const Vec3& p : cloud.points)
    for (int a = 0; a < 3; ++a) {
      lo_[a] = std::min(lo_[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  const double ext = std::max({hi[0] - lo_[0], hi[1] - lo_[1], hi[2] - lo_[2]});
  // Small or degenerate clouds scan linearly; the grid buys nothing there.
  if (n < 64 || ext <= 0.0) return;

  const int per_axis = std::max(1, static_cast<int>(std::cbrt(static_cast<double>(n) / 2.0)));
  cell_ = ext / per_axis;
  nx_ = std::max(1, static_cast<int>((hi[0] - lo_[0]) / cell_) + 1);
  ny_ = std::max(1, static_cast<int>((hi[1] - lo_[1]) / cell_) + 1);
  nz_ = std::max(1, static_cast<int>((hi[2] - lo_[2]) / cell_) + 1);
  cells_.resize(static_cast<std::size_t>(nx_) * ny_ * nz_);
  for (int i = 0; i < n; ++i) {
    const Vec3& p = cloud.points[i];
    const int cx = cell_of(p[0], lo_[0], nx_);
    const int cy = cell_of(p[1], lo_[1], ny_);
    const int cz = cell_of(p[2], lo_[2], nz_);
    cells_[(static_cast<std::size_t>(cx) * ny_ + cy) * nz_ + cz].push_back(i);
  }
}

int GridIndex::cell_of(double v, double lo, int n) const {
  int c = static_cast<int>(std::floor((v - lo) / cell_));
  return std::clamp(c, 0, n - 1);
}

std::pair<int, double> GridIndex::nearest_with_dist2(const Vec3& query) const {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  auto consider = [&](int i) {
    const double d2 = dist2(cloud_.points[i], query);
    if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
      best_d2 = d2;
      best = i;
    }
  };

  if (cell_ == 0.0) {
    for (int i = 0; i < cloud_.size(); ++i) consider(i);
    return {best, best_d2};
  }

  // Unclamped cell coordinates keep the shell lower bound valid for queries
  // outside the indexed box. Queries further out than a full grid span fall
  // back to the linear scan, which also dodges int overflow in the floor.
  const double fx = std::floor((query[0] - lo_[0]) / cell_);
  const double fy = std::floor((query[1] - lo_[1]) / cell_);
  const double fz = std::floor((query[2] - lo_[2]) / cell_);
  if (fx < -nx_ || fx > 2.0 * nx_ || fy < -ny_ || fy > 2.0 * ny_ ||
      fz < -nz_ || fz > 2.0 * nz_) {
    for (int i = 0; i < cloud_.size(); ++i) consider(i);
    return {best, best_d2};
  }
  const int qx = static_cast<int>(fx);
  const int qy = static_cast<int>(fy);
  const int qz = static_cast<int>(fz);

  const int max_ring =
      std::max({std::max(qx, nx_ - 1 - qx), std::max(qy, ny_ - 1 - qy),
                std::max(qz, nz_ - 1 - qz), 0});

  for (int r = 0; r <= max_ring; ++r) {
    // Every point in ring r or beyond sits at least (r-1) cells away along
    // some axis, so once that bound beats the best hit the scan can stop.
    if (best >= 0) {
      const double bound = (r - 1) * cell_;
      if (bound > 0.0 && bound * bound > best_d2) break;
    }
    const int x0 = std::max(qx - r, 0), x1 = std::min(qx + r, nx_ - 1);
    const int y0 = std::max(qy - r, 0), y1 = std::min(qy + r, ny_ - 1);
    const int z0 = std::max(qz - r, 0), z1 = std::min(qz + r, nz_ - 1);
    for (int cx = x0; cx <= x1; ++cx)
      for (int cy = y0; cy <= y1; ++cy)
        for (int cz = z0; cz <= z1; ++cz) {
          const int ring = std::max({std::abs(cx - qx), std::abs(cy - qy), std::abs(cz - qz)});
          if (ring != r) continue;  // inner cells were already scanned
          for (int i : cells_[(static_cast<std::size_t>(cx) * ny_ + cy) * nz_ + cz])
            consider(i);
        }
  }
  return {best, best_d2};
}

int GridIndex::nearest(const Vec3& query) const { return nearest_with_dist2(query).first; }

}  // namespace pcsm
