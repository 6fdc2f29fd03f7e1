#pragma once

#include "pcsm/geometry.hpp"

namespace pcsm {

// Reconstruction quality of cloud B against reference A. Forward errors
// average over A's points toward their nearest neighbor in B; backward errors
// go the other way but still project onto A's normals (reconstructed normals
// are too noisy to trust). PSNRs may hold the +infinity sentinel.
struct QualityReport {
  double e_c2c = 0.0;
  double e_c2p = 0.0;
  double e_c2c_bwd = 0.0;
  double e_c2p_bwd = 0.0;
  double peak = 0.0;
  double d1_psnr_db = 0.0;
  double d2_psnr_db = 0.0;
  double d1_psnr_symmetric_db = 0.0;  // worse of the two directions
  double d2_psnr_symmetric_db = 0.0;
  int n_a = 0;
  int n_b = 0;
};

// Mean squared point-to-point distance from each point of A to its nearest
// neighbor in B (ties to lowest index). Asymmetric: prefactor is 1/|A|.
double d1_error(const PointCloud& a, const PointCloud& b);

// Mean squared point-to-plane residual: the A->B error vector projected onto
// A's unit normal at each point.
double d2_error(const PointCloud& a, const PointCloud& b, const NormalField& normals_of_a);

// 10*log10(peak^2/e); e = 0 maps to the +infinity sentinel.
double psnr(double e, double peak);

// Caps the sentinel (and anything above) at 100 dB for CSV display.
double csv_db(double psnr_db);

// Full report: normals and peak come from A, both directions are measured.
QualityReport evaluate(const PointCloud& a, const PointCloud& b, int normal_k = 12);

}  // namespace pcsm
