#include "pcsm/codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace pcsm {

namespace {

constexpr double kPi = std::numbers::pi;
// Splats truncate at this radius; exp(-32) there, small enough that the
// truncation step stays invisible to finite-difference gradient checks.
constexpr double kCutoffSigmas = 8.0;

}  // namespace

// ---- local encoder ----

LocalEncoder::LocalEncoder(const std::string& name, int k_, int d_, Rng& rng)
    : k(k_),
      d(d_),
      inner(name + ".inner", {3, 32, 64, 128}, rng),
      outer(name + ".outer", {128, 128, 128, d_}, rng) {
  if (k < 4 || k % 4 != 0) throw std::invalid_argument("LocalEncoder: patch size must be a positive multiple of 4");
  if (d < 1) throw std::invalid_argument("LocalEncoder: feature width must be positive");
}

Tensor LocalEncoder::encode(const PatchSet& patches) const {
  if (patches.k != k)
    throw std::invalid_argument("LocalEncoder: configured for patches of " + std::to_string(k) +
                                " points, got " + std::to_string(patches.k));
  const int s = patches.s;
  const int half = k / 2, quarter = k / 4;

  std::vector<double> groups;
  groups.reserve(static_cast<std::size_t>(s) * half * quarter * 3);
  PointCloud patch;
  patch.points.resize(k);
  for (int i = 0; i < s; ++i) {
    std::copy_n(patches.patch_points.begin() + static_cast<std::size_t>(i) * k, k,
                patch.points.begin());
    // Seeding at the point farthest from the patch origin keeps the sampled
    // center set independent of the point order.
    int seed = 0;
    double best = -1.0;
    for (int j = 0; j < k; ++j) {
      const double r2 = dist2(patch.points[j], {0.0, 0.0, 0.0});
      if (r2 > best) {
        best = r2;
        seed = j;
      }
    }
    for (int c : fps(patch, half, seed)) {
      const Vec3& center = patch.points[c];
      for (int nb : knn(patch, center, quarter)) {
        const Vec3& p = patch.points[nb];
        groups.push_back(p[0] - center[0]);
        groups.push_back(p[1] - center[1]);
        groups.push_back(p[2] - center[2]);
      }
    }
  }

  Tensor x = Tensor::constant({s * half, quarter, 3}, std::move(groups));
  Tensor per_center = max_mid(shared_mlp(x, inner));           // (s*half, 128)
  Tensor stacked = reshape(per_center, {s, half, 128});
  return max_mid(shared_mlp(stacked, outer));                  // (s, d)
}

void LocalEncoder::collect(std::vector<nn::Parameter*>& out) {
  inner.collect(out);
  outer.collect(out);
}

// ---- camera predictor ----

CameraPredictor::CameraPredictor(const std::string& name, int v_, Rng& rng)
    : v(v_),
      trunk(name + ".trunk", {3, 32, 64, 128}, rng),
      head1(name + ".head1", 128, 64, rng),
      head2(name + ".head2", 64, 3 * v_, rng, 0.1) {
  if (v < 1) throw std::invalid_argument("CameraPredictor: need at least one view");
}

Tensor CameraPredictor::forward(const PointCloud& cloud) const {
  const int n = cloud.size();
  if (n < 1) throw std::invalid_argument("CameraPredictor: empty cloud");

  Vec3 bmin = cloud.points[0], bmax = cloud.points[0];
  for (const Vec3& p : cloud.points)
    for (int a = 0; a < 3; ++a) {
      bmin[a] = std::min(bmin[a], p[a]);
      bmax[a] = std::max(bmax[a], p[a]);
    }
  const Vec3 center{0.5 * (bmin[0] + bmax[0]), 0.5 * (bmin[1] + bmax[1]),
                    0.5 * (bmin[2] + bmax[2])};
  double r2max = 0.0;
  for (const Vec3& p : cloud.points) r2max = std::max(r2max, dist2(p, center));
  const double radius = std::max(std::sqrt(r2max), 1e-12);

  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(n) * 3);
  for (const Vec3& p : cloud.points)
    for (int a = 0; a < 3; ++a) vals.push_back((p[a] - center[a]) / radius);

  Tensor x = Tensor::constant({1, n, 3}, std::move(vals));
  Tensor feat = max_mid(shared_mlp(x, trunk));                   // (1, 128)
  Tensor raw = reshape(head2.forward(relu(head1.forward(feat))), {v, 3});
  Tensor squashed = pcsm::tanh(raw);

  std::vector<double> scales(static_cast<std::size_t>(v) * 3);
  std::vector<double> offsets(static_cast<std::size_t>(v) * 3);
  for (int i = 0; i < v; ++i) {
    scales[i * 3 + 0] = kPi;
    scales[i * 3 + 1] = kPi / 3.0;
    scales[i * 3 + 2] = radius;
    offsets[i * 3 + 0] = 2.0 * kPi * i / v;
    offsets[i * 3 + 1] = 0.0;
    offsets[i * 3 + 2] = 2.0 * radius;
  }
  return cadd(cmul(squashed, scales), offsets);
}

CameraParams CameraPredictor::predict(const PointCloud& cloud) const {
  return camera_params_from(forward(cloud));
}

void CameraPredictor::collect(std::vector<nn::Parameter*>& out) {
  trunk.collect(out);
  head1.collect(out);
  head2.collect(out);
}

CameraParams camera_params_from(const Tensor& cams) {
  if (cams.ndim() != 2 || cams.dim(1) != 3)
    throw std::invalid_argument("camera_params_from: expected (V,3), got " +
                                shape_str(cams.shape()));
  CameraParams out;
  const int v = cams.dim(0);
  for (int i = 0; i < v; ++i) {
    out.azimuth.push_back(cams.values()[i * 3 + 0]);
    out.elevation.push_back(cams.values()[i * 3 + 1]);
    out.distance.push_back(cams.values()[i * 3 + 2]);
  }
  return out;
}

// ---- renderer ----

namespace {

struct ViewFrame {
  double right[3], up[3];
};

ViewFrame frame_of(double azimuth, double elevation) {
  const double ct = std::cos(azimuth), st = std::sin(azimuth);
  const double cp = std::cos(elevation), sp = std::sin(elevation);
  return {{ct, st, 0.0}, {st * sp, -ct * sp, cp}};
}

// Raw splat sums (before the min(1, .) clamp), view-major.
std::vector<double> splat_sums(const PointCloud& cloud, const double* cams, int v, int h, int w,
                               double sigma) {
  std::vector<double> sums(static_cast<std::size_t>(v) * h * w, 0.0);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const int rad = static_cast<int>(std::ceil(kCutoffSigmas * sigma));
  for (int view = 0; view < v; ++view) {
    const double r = cams[view * 3 + 2];
    if (!(r > 0.0)) throw std::invalid_argument("render_views: camera distance must be positive");
    const ViewFrame fr = frame_of(cams[view * 3 + 0], cams[view * 3 + 1]);
    double* img = sums.data() + static_cast<std::size_t>(view) * h * w;
    for (const Vec3& p : cloud.points) {
      const double a = p[0] * fr.right[0] + p[1] * fr.right[1] + p[2] * fr.right[2];
      const double b = p[0] * fr.up[0] + p[1] * fr.up[1] + p[2] * fr.up[2];
      const double px = 0.5 * (1.0 + a / r) * (w - 1);
      const double py = 0.5 * (1.0 - b / r) * (h - 1);
      const int x0 = std::max(0, static_cast<int>(std::ceil(px - rad)));
      const int x1 = std::min(w - 1, static_cast<int>(std::floor(px + rad)));
      const int y0 = std::max(0, static_cast<int>(std::ceil(py - rad)));
      const int y1 = std::min(h - 1, static_cast<int>(std::floor(py + rad)));
      for (int iy = y0; iy <= y1; ++iy)
        for (int ix = x0; ix <= x1; ++ix) {
          const double dx = ix - px, dy = iy - py;
          img[iy * w + ix] += std::exp(-(dx * dx + dy * dy) * inv2s2);
        }
    }
  }
  return sums;
}

void check_render_args(int h, int w, double sigma) {
  if (h < 16 || w < 16) throw std::invalid_argument("render_views: image must be at least 16x16");
  if (!(sigma > 0.0)) throw std::invalid_argument("render_views: splat sigma must be positive");
}

}  // namespace

ProjectionStack render_views(const PointCloud& cloud, const CameraParams& cams, int h, int w,
                             double splat_sigma) {
  check_render_args(h, w, splat_sigma);
  const int v = cams.views();
  std::vector<double> flat(static_cast<std::size_t>(v) * 3);
  for (int i = 0; i < v; ++i) {
    flat[i * 3 + 0] = cams.azimuth[i];
    flat[i * 3 + 1] = cams.elevation[i];
    flat[i * 3 + 2] = cams.distance[i];
  }
  ProjectionStack out;
  out.v = v;
  out.h = h;
  out.w = w;
  out.pixels = splat_sums(cloud, flat.data(), v, h, w, splat_sigma);
  for (double& px : out.pixels) px = std::min(1.0, px);
  return out;
}

Tensor render_views_op(const Tensor& cams, const PointCloud& cloud, int h, int w,
                       double splat_sigma) {
  check_render_args(h, w, splat_sigma);
  if (cams.ndim() != 2 || cams.dim(1) != 3)
    throw std::invalid_argument("render_views_op: expected (V,3) cameras, got " +
                                shape_str(cams.shape()));
  const int v = cams.dim(0);
  std::vector<double> sums = splat_sums(cloud, cams.data(), v, h, w, splat_sigma);
  std::vector<double> pix(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) pix[i] = std::min(1.0, sums[i]);

  const double sigma = splat_sigma;
  PointCloud pts = cloud;  // kept alive for the backward pass
  return make_op(
      {v, 1, h, w}, std::move(pix), {cams},
      [pts = std::move(pts), sums = std::move(sums), v, h, w, sigma](Node& self) {
        Node& pc = *self.parents[0];
        pc.ensure_grad();
        const double inv_s2 = 1.0 / (sigma * sigma);
        const int rad = static_cast<int>(std::ceil(kCutoffSigmas * sigma));
        for (int view = 0; view < v; ++view) {
          const double theta = pc.value[view * 3 + 0];
          const double phi = pc.value[view * 3 + 1];
          const double r = pc.value[view * 3 + 2];
          const ViewFrame fr = frame_of(theta, phi);
          const double ct = std::cos(theta), st = std::sin(theta);
          const double cp = std::cos(phi), sp = std::sin(phi);
          const std::size_t base = static_cast<std::size_t>(view) * h * w;
          double dtheta = 0.0, dphi = 0.0, dr = 0.0;
          for (const Vec3& p : pts.points) {
            const double a = p[0] * fr.right[0] + p[1] * fr.right[1] + p[2] * fr.right[2];
            const double b = p[0] * fr.up[0] + p[1] * fr.up[1] + p[2] * fr.up[2];
            const double px = 0.5 * (1.0 + a / r) * (w - 1);
            const double py = 0.5 * (1.0 - b / r) * (h - 1);
            const int x0 = std::max(0, static_cast<int>(std::ceil(px - rad)));
            const int x1 = std::min(w - 1, static_cast<int>(std::floor(px + rad)));
            const int y0 = std::max(0, static_cast<int>(std::ceil(py - rad)));
            const int y1 = std::min(h - 1, static_cast<int>(std::floor(py + rad)));
            double gx = 0.0, gy = 0.0;  // dL/dpx, dL/dpy for this point
            for (int iy = y0; iy <= y1; ++iy)
              for (int ix = x0; ix <= x1; ++ix) {
                const std::size_t at = base + static_cast<std::size_t>(iy) * w + ix;
                if (sums[at] >= 1.0) continue;  // clamp is flat past saturation
                const double up = self.grad[at];
                if (up == 0.0) continue;
                const double dx = ix - px, dy = iy - py;
                const double g = std::exp(-(dx * dx + dy * dy) * 0.5 * inv_s2);
                gx += up * g * dx * inv_s2;
                gy += up * g * dy * inv_s2;
              }
            const double da = gx * 0.5 * (w - 1) / r;
            const double db = gy * (-0.5) * (h - 1) / r;
            const double drr = gx * (-0.5) * (w - 1) * a / (r * r) +
                               gy * 0.5 * (h - 1) * b / (r * r);
            // Frame derivatives: right' = (-st, ct, 0) in theta; up varies in
            // both angles.
            const double da_dtheta = p[0] * (-st) + p[1] * ct;
            const double db_dtheta = p[0] * (ct * sp) + p[1] * (st * sp);
            const double db_dphi = p[0] * (st * cp) + p[1] * (-ct * cp) + p[2] * (-sp);
            dtheta += da * da_dtheta + db * db_dtheta;
            dphi += db * db_dphi;
            dr += drr;
          }
          pc.grad[view * 3 + 0] += dtheta;
          pc.grad[view * 3 + 1] += dphi;
          pc.grad[view * 3 + 2] += dr;
        }
      });
}

void write_pgm(const ProjectionStack& stack, int view, const std::string& path) {
  if (view < 0 || view >= stack.v) throw std::invalid_argument("write_pgm: view out of range");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P2\n" << stack.w << " " << stack.h << "\n255\n";
  for (int y = 0; y < stack.h; ++y) {
    for (int x = 0; x < stack.w; ++x) {
      const int gray = static_cast<int>(std::lround(255.0 * stack.at(view, y, x)));
      out << gray << (x + 1 == stack.w ? "" : " ");
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

// ---- global encoder ----

namespace {

int pooled_dim(int v) { return v / 2; }

}  // namespace

GlobalEncoder::GlobalEncoder(const std::string& name, int h_, int w_, int f_, int dprime_,
                             Rng& rng)
    : h(h_),
      w(w_),
      f(f_),
      dprime(dprime_),
      flat_dim(0),
      c1(name + ".c1", 1, 16, 3, 1, 1, rng),
      c2(name + ".c2", 16, 32, 3, 1, 1, rng),
      c3(name + ".c3", 32, 64, 3, 1, 1, rng),
      flat(name + ".flat",
           64 * pooled_dim(pooled_dim(pooled_dim(h_))) * pooled_dim(pooled_dim(pooled_dim(w_))),
           f_, rng),
      mlp(name + ".mlp", {f_, 64, 16, dprime_}, rng) {
  if (h < 16 || w < 16) throw std::invalid_argument("GlobalEncoder: image must be at least 16x16");
  if (f < 1 || dprime < 1) throw std::invalid_argument("GlobalEncoder: feature widths must be positive");
  flat_dim = 64 * pooled_dim(pooled_dim(pooled_dim(h))) * pooled_dim(pooled_dim(pooled_dim(w)));
}

Tensor GlobalEncoder::encode(const Tensor& views) const {
  if (views.ndim() != 4 || views.dim(1) != 1 || views.dim(2) != h || views.dim(3) != w)
    throw std::invalid_argument("GlobalEncoder: expected (V,1," + std::to_string(h) + "," +
                                std::to_string(w) + "), got " + shape_str(views.shape()));
  const int v = views.dim(0);
  Tensor x = max_pool2d(relu(c1.forward(views)), 2, 2);
  x = max_pool2d(relu(c2.forward(x)), 2, 2);
  x = max_pool2d(relu(c3.forward(x)), 2, 2);
  x = relu(flat.forward(reshape(x, {v, flat_dim})));  // (V, F)
  Tensor pooled = view_pool(reshape(x, {1, v, f}));   // (1, F)
  return mlp.forward(pooled);                         // (1, D')
}

void GlobalEncoder::collect(std::vector<nn::Parameter*>& out) {
  c1.collect(out);
  c2.collect(out);
  c3.collect(out);
  flat.collect(out);
  mlp.collect(out);
}

// ---- semantic decoder ----

SemanticDecoder::SemanticDecoder(const std::string& name, int d_, int dprime_, int points_out_,
                                 Rng& rng, int hidden)
    : d(d_),
      dprime(dprime_),
      points_out(points_out_),
      fc1(name + ".fc1", d_ + dprime_, hidden, rng),
      fc2(name + ".fc2", hidden, points_out_ * 3, rng) {
  if (points_out < 1) throw std::invalid_argument("SemanticDecoder: need a positive output size");
}

namespace {

Tensor upsample_with_centroids(const nn::Dense& fc1, const nn::Dense& fc2, const Tensor& x,
                               const std::vector<Vec3>& centroids, int points_out) {
  const int s = x.dim(0);
  Tensor offs = fc2.forward(relu(fc1.forward(x)));  // (S, points_out*3)

  std::vector<double> shift(static_cast<std::size_t>(s) * points_out * 3);
  std::size_t at = 0;
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < points_out; ++j)
      for (int a = 0; a < 3; ++a) shift[at++] = centroids[i][a];
  return cadd(reshape(offs, {s * points_out, 3}), shift);
}

}  // namespace

Tensor SemanticDecoder::decode(const Tensor& local, const Tensor& global,
                               const std::vector<Vec3>& centroids) const {
  if (dprime == 0) return decode(local, centroids);
  if (local.ndim() != 2 || local.dim(1) != d)
    throw std::invalid_argument("SemanticDecoder: expected (S," + std::to_string(d) +
                                ") local features, got " + shape_str(local.shape()));
  if (global.ndim() != 2 || global.dim(0) != 1 || global.dim(1) != dprime)
    throw std::invalid_argument("SemanticDecoder: expected (1," + std::to_string(dprime) +
                                ") global feature, got " + shape_str(global.shape()));
  const int s = local.dim(0);
  if (static_cast<int>(centroids.size()) != s)
    throw std::invalid_argument("SemanticDecoder: centroid count does not match patch count");

  Tensor x = concat_cols(local, broadcast_rows(global, s));  // (S, d+D')
  return upsample_with_centroids(fc1, fc2, x, centroids, points_out);
}

Tensor SemanticDecoder::decode(const Tensor& local, const std::vector<Vec3>& centroids) const {
  if (dprime != 0)
    throw std::invalid_argument("SemanticDecoder: global feature required when dprime > 0");
  if (local.ndim() != 2 || local.dim(1) != d)
    throw std::invalid_argument("SemanticDecoder: expected (S," + std::to_string(d) +
                                ") local features, got " + shape_str(local.shape()));
  if (static_cast<int>(centroids.size()) != local.dim(0))
    throw std::invalid_argument("SemanticDecoder: centroid count does not match patch count");
  return upsample_with_centroids(fc1, fc2, local, centroids, points_out);
}

PointCloud SemanticDecoder::decode_cloud(const Tensor& local, const Tensor& global,
                                         const std::vector<Vec3>& centroids) const {
  const Tensor pts = decode(local, global, centroids);
  PointCloud out;
  const int n = pts.dim(0);
  out.points.reserve(n);
  for (int i = 0; i < n; ++i)
    out.points.push_back({pts.values()[i * 3], pts.values()[i * 3 + 1], pts.values()[i * 3 + 2]});
  return out;
}

void SemanticDecoder::collect(std::vector<nn::Parameter*>& out) {
  fc1.collect(out);
  fc2.collect(out);
}

// ---- reconstruction loss ----

double chamfer(const PointCloud& reference, const PointCloud& candidate) {
  if (reference.points.empty() || candidate.points.empty())
    throw std::invalid_argument("chamfer: clouds must be non-empty");
  const GridIndex ref_index(reference);
  const GridIndex cand_index(candidate);
  double total = 0.0;
  for (const Vec3& p : reference.points) total += cand_index.nearest_with_dist2(p).second;
  for (const Vec3& q : candidate.points) total += ref_index.nearest_with_dist2(q).second;
  return total / reference.size();
}

Tensor chamfer_loss(const PointCloud& reference, const Tensor& candidate_points) {
  if (reference.points.empty()) throw std::invalid_argument("chamfer_loss: empty reference");
  if (candidate_points.ndim() != 2 || candidate_points.dim(1) != 3 ||
      candidate_points.dim(0) < 1)
    throw std::invalid_argument("chamfer_loss: expected (M,3) candidate points, got " +
                                shape_str(candidate_points.shape()));

  const int n = reference.size();
  const int m = candidate_points.dim(0);
  PointCloud cand;
  cand.points.resize(m);
  for (int j = 0; j < m; ++j)
    cand.points[j] = {candidate_points.values()[j * 3], candidate_points.values()[j * 3 + 1],
                      candidate_points.values()[j * 3 + 2]};

  const GridIndex ref_index(reference);
  const GridIndex cand_index(cand);
  std::vector<int> to_cand(n);   // nearest candidate of each reference point
  std::vector<int> to_ref(m);    // nearest reference of each candidate point
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [j, d2] = cand_index.nearest_with_dist2(reference.points[i]);
    to_cand[i] = j;
    total += d2;
  }
  for (int j = 0; j < m; ++j) {
    const auto [i, d2] = ref_index.nearest_with_dist2(cand.points[j]);
    to_ref[j] = i;
    total += d2;
  }

  PointCloud ref = reference;
  return make_op(
      {1}, {total / n}, {candidate_points},
      [ref = std::move(ref), to_cand = std::move(to_cand), to_ref = std::move(to_ref),
       n](Node& self) {
        Node& pc = *self.parents[0];
        pc.ensure_grad();
        const double up = self.grad[0] * 2.0 / n;
        for (std::size_t i = 0; i < to_cand.size(); ++i) {
          const int j = to_cand[i];
          for (int a = 0; a < 3; ++a)
            pc.grad[j * 3 + a] += up * (pc.value[j * 3 + a] - ref.points[i][a]);
        }
        for (std::size_t j = 0; j < to_ref.size(); ++j) {
          const Vec3& nearest = ref.points[to_ref[j]];
          for (int a = 0; a < 3; ++a)
            pc.grad[j * 3 + a] += up * (pc.value[j * 3 + a] - nearest[a]);
        }
      });
}

}  // namespace pcsm
