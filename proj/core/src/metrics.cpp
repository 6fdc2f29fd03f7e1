#include "pcsm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pcsm {

namespace {

void check_pair(const PointCloud& a, const PointCloud& b, const char* who) {
  if (a.points.empty() || b.points.empty())
    throw std::invalid_argument(std::string(who) + ": clouds must be non-empty");
}

// Both error flavors in one sweep over A.
void errors_from(const PointCloud& a, const PointCloud& b, const NormalField* normals_of_a,
                 double& c2c, double& c2p) {
  const GridIndex index(b);
  double sum_c2c = 0.0, sum_c2p = 0.0;
  for (int j = 0; j < a.size(); ++j) {
    const Vec3& p = a.points[j];
    const Vec3& q = b.points[index.nearest(p)];
    const Vec3 e{q[0] - p[0], q[1] - p[1], q[2] - p[2]};
    sum_c2c += e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
    if (normals_of_a != nullptr) {
      const Vec3& n = normals_of_a->normals[j];
      const double along = e[0] * n[0] + e[1] * n[1] + e[2] * n[2];
      sum_c2p += along * along;
    }
  }
  c2c = sum_c2c / a.size();
  c2p = normals_of_a != nullptr ? sum_c2p / a.size() : 0.0;
}

}  // namespace

double d1_error(const PointCloud& a, const PointCloud& b) {
  check_pair(a, b, "d1_error");
  double c2c = 0.0, unused = 0.0;
  errors_from(a, b, nullptr, c2c, unused);
  return c2c;
}

double d2_error(const PointCloud& a, const PointCloud& b, const NormalField& normals_of_a) {
  check_pair(a, b, "d2_error");
  if (normals_of_a.normals.size() != a.points.size())
    throw std::invalid_argument("d2_error: normals do not align with the reference cloud");
  const GridIndex index(b);
  double sum = 0.0;
  for (int j = 0; j < a.size(); ++j) {
    const Vec3& p = a.points[j];
    const Vec3& q = b.points[index.nearest(p)];
    const Vec3& n = normals_of_a.normals[j];
    const double along =
        (q[0] - p[0]) * n[0] + (q[1] - p[1]) * n[1] + (q[2] - p[2]) * n[2];
    sum += along * along;
  }
  return sum / a.size();
}

double psnr(double e, double peak) {
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  if (e < 0.0) throw std::invalid_argument("psnr: error must be non-negative");
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / e);
}

double csv_db(double psnr_db) { return std::min(psnr_db, 100.0); }

QualityReport evaluate(const PointCloud& a, const PointCloud& b, int normal_k) {
  check_pair(a, b, "evaluate");
  const NormalField normals = estimate_normals(a, std::min(normal_k, a.size()));

  QualityReport rep;
  rep.n_a = a.size();
  rep.n_b = b.size();
  rep.peak = bbox_diagonal(a);

  errors_from(a, b, &normals, rep.e_c2c, rep.e_c2p);

  // Reverse direction: B's points against A, projected onto the normal of
  // the matched reference point.
  {
    const GridIndex index(a);
    double sum_c2c = 0.0, sum_c2p = 0.0;
    for (const Vec3& q : b.points) {
      const int i = index.nearest(q);
      const Vec3& p = a.points[i];
      const Vec3 e{p[0] - q[0], p[1] - q[1], p[2] - q[2]};
      sum_c2c += e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
      const Vec3& n = normals.normals[i];
      const double along = e[0] * n[0] + e[1] * n[1] + e[2] * n[2];
      sum_c2p += along * along;
    }
    rep.e_c2c_bwd = sum_c2c / b.size();
    rep.e_c2p_bwd = sum_c2p / b.size();
  }

  rep.d1_psnr_db = psnr(rep.e_c2c, rep.peak);
  rep.d2_psnr_db = psnr(rep.e_c2p, rep.peak);
  rep.d1_psnr_symmetric_db = psnr(std::max(rep.e_c2c, rep.e_c2c_bwd), rep.peak);
  rep.d2_psnr_symmetric_db = psnr(std::max(rep.e_c2p, rep.e_c2p_bwd), rep.peak);
  return rep;
}

}  // namespace pcsm
