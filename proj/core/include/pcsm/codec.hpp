#pragma once

#include <string>
#include <vector>

#include "pcsm/geometry.hpp"
#include "pcsm/nn.hpp"
#include "pcsm/rng.hpp"
#include "pcsm/tensor.hpp"

namespace pcsm {

// Per-view virtual camera: azimuth and elevation in radians, distance in
// model units (> 0). The camera orbits the origin; distance sets the
// orthographic zoom.
struct CameraParams {
  std::vector<double> azimuth;
  std::vector<double> elevation;
  std::vector<double> distance;

  int views() const { return static_cast<int>(azimuth.size()); }
};

// V occupancy images, each H x W with values in [0,1] (0 = background).
struct ProjectionStack {
  int v = 0, h = 0, w = 0;
  std::vector<double> pixels;  // view-major, then rows

  double at(int view, int y, int x) const {
    return pixels[(static_cast<std::size_t>(view) * h + y) * w + x];
  }
};

// Patch feature extractor: per patch, points are regrouped around K/2
// sampled centers (K/4 relative neighbors each), lifted through two stacked
// point networks, and max-pooled into one d-wide row. Rows depend only on
// their own patch, and only through its point multiset.
struct LocalEncoder {
  int k;  // points per input patch, divisible by 4
  int d;  // feature width per patch
  nn::MlpChain inner;
  nn::MlpChain outer;

  LocalEncoder(const std::string& name, int k, int d, Rng& rng);

  Tensor encode(const PatchSet& patches) const;  // (S, d)
  void collect(std::vector<nn::Parameter*>& out);
};

// Predicts V camera triples from the cloud: a point network pools the
// normalized cloud into one feature, a two-layer head emits raw triples,
// and squashing maps them to azimuth = 2*pi*v/V + pi*tanh, elevation =
// (pi/3)*tanh, distance = R*(2 + tanh) with R the bounding sphere radius.
// A zero head therefore yields the canonical evenly spaced views.
struct CameraPredictor {
  int v;
  nn::MlpChain trunk;
  nn::Dense head1;
  nn::Dense head2;  // initialized small so early views stay near canonical

  CameraPredictor(const std::string& name, int v, Rng& rng);

  Tensor forward(const PointCloud& cloud) const;  // (V, 3)
  CameraParams predict(const PointCloud& cloud) const;
  void collect(std::vector<nn::Parameter*>& out);
};

CameraParams camera_params_from(const Tensor& cams);

// Renders each view by rotating the cloud into the camera frame and
// splatting every point as an isotropic Gaussian of std splat_sigma pixels;
// a pixel is min(1, sum of splats). The projection center is the origin, so
// callers typically center the cloud first. The tensor form differentiates
// the images with respect to the camera parameters.
ProjectionStack render_views(const PointCloud& cloud, const CameraParams& cams, int h, int w,
                             double splat_sigma = 1.0);
Tensor render_views_op(const Tensor& cams, const PointCloud& cloud, int h, int w,
                       double splat_sigma = 1.0);

// Debug dump of one view as ASCII PGM.
void write_pgm(const ProjectionStack& stack, int view, const std::string& path);

// Shared-weight CNN over each view (3 conv/pool blocks into a dense
// feature), element-wise max across views, then a 3-layer MLP down to the
// global feature. Output depends only on the image multiset.
struct GlobalEncoder {
  int h, w;
  int f;       // per-view feature width
  int dprime;  // global feature width
  int flat_dim;
  nn::Conv2d c1, c2, c3;
  nn::Dense flat;
  nn::MlpChain mlp;

  GlobalEncoder(const std::string& name, int h, int w, int f, int dprime, Rng& rng);

  Tensor encode(const Tensor& views) const;  // (V,1,H,W) -> (1, D')
  void collect(std::vector<nn::Parameter*>& out);
};

// Expands the global row to all patches, concatenates it with the local
// rows, and upsamples each patch independently to points_out offsets that
// are shifted by the patch centroid. Output is (S * points_out, 3).
struct SemanticDecoder {
  int d, dprime;
  int points_out;  // K/2 for patches from extract_patches
  nn::Dense fc1, fc2;

  SemanticDecoder(const std::string& name, int d, int dprime, int points_out, Rng& rng,
                  int hidden = 256);

  Tensor decode(const Tensor& local, const Tensor& global,
                const std::vector<Vec3>& centroids) const;
  // Variant for dprime == 0: the local rows feed the upsampler alone.
  Tensor decode(const Tensor& local, const std::vector<Vec3>& centroids) const;
  PointCloud decode_cloud(const Tensor& local, const Tensor& global,
                          const std::vector<Vec3>& centroids) const;
  void collect(std::vector<nn::Parameter*>& out);
};

// Symmetric squared-distance reconstruction loss, normalized by |reference|
// only (asymmetric when sizes differ). The tensor form flows gradient into
// the candidate points with nearest-neighbor matches held fixed.
double chamfer(const PointCloud& reference, const PointCloud& candidate);
Tensor chamfer_loss(const PointCloud& reference, const Tensor& candidate_points);

}  // namespace pcsm
