#include "pcsm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace pcsm {
namespace {

// Held-out split draws its surfaces from a disjoint stream.
constexpr std::uint64_t kTestSeedOffset = 10007;

const ExperimentConfig& validated(const ExperimentConfig& cfg) {
  cfg.validate();
  return cfg;
}

// The renderer projects about the origin, so views are taken of the cloud
// with its box center moved there. The camera distance range then keeps the
// whole cloud in frame.
PointCloud center_for_render(const PointCloud& cloud) {
  Vec3 lo = cloud.points.front();
  Vec3 hi = lo;
  for (const Vec3& p : cloud.points)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  const Vec3 c{0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])};
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points)
    out.points.push_back({p[0] - c[0], p[1] - c[1], p[2] - c[2]});
  return out;
}

PointCloud cloud_from(const Tensor& pts) {
  PointCloud out;
  const int m = pts.dim(0);
  out.points.resize(static_cast<std::size_t>(m));
  const double* v = pts.data();
  for (int i = 0; i < m; ++i)
    out.points[static_cast<std::size_t>(i)] = {v[3 * i], v[3 * i + 1], v[3 * i + 2]};
  return out;
}

struct CloudData {
  const PointCloud* cloud = nullptr;
  PointCloud centered;  // filled only when the global branch is on
  PatchSet patches;
};

std::vector<CloudData> prepare_clouds(const std::vector<PointCloud>& clouds,
                                      const ExperimentConfig& cfg) {
  if (clouds.empty()) throw std::invalid_argument("pipeline: dataset is empty");
  std::vector<CloudData> out;
  out.reserve(clouds.size());
  for (const PointCloud& c : clouds) {
    if (c.size() != cfg.n)
      throw std::invalid_argument("pipeline: cloud has " + std::to_string(c.size()) +
                                  " points, config expects " + std::to_string(cfg.n));
    CloudData cd;
    cd.cloud = &c;
    cd.patches = extract_patches(c, cfg.s);
    if (cfg.dprime > 0) cd.centered = center_for_render(c);
    out.push_back(std::move(cd));
  }
  return out;
}

Tensor global_feature(const SemModel& m, const PointCloud& centered) {
  Tensor cams = m.cameras->forward(centered);
  Tensor views =
      render_views_op(cams, centered, m.cfg.image_size, m.cfg.image_size, m.cfg.splat_sigma);
  return m.global->encode(views);
}

Tensor channel_pass(const SemModel& m, const Tensor& latents, double snr_db, Rng& rng) {
  Tensor x = power_normalize(latents);
  Tensor sent = m.chan_enc.forward(x);
  Tensor received = awgn_op(sent, snr_db, rng);
  return m.chan_dec.forward(received);
}

Tensor decode_points(const SemModel& m, const Tensor& y, const Tensor& g,
                     const PatchSet& patches) {
  if (m.cfg.dprime > 0) return m.decoder.decode(y, g, patches.centroids);
  return m.decoder.decode(y, patches.centroids);
}

double training_snr(const ExperimentConfig& cfg, Rng& rng) {
  if (cfg.snr_jitter) return rng.uniform(cfg.snr_db - 5.0, cfg.snr_db + 5.0);
  return cfg.snr_db;
}

using LossFn = std::function<Tensor(const CloudData&, Rng&)>;

// Shared epoch loop: shuffled batches, gradient averaged over the batch,
// one Adam step per batch, epoch mean of the raw per-cloud losses recorded.
std::vector<double> train_loop(const ExperimentConfig& cfg, int epochs,
                               const std::vector<CloudData>& data,
                               const std::vector<nn::Parameter*>& params, Rng& rng,
                               const LossFn& loss_of) {
  nn::AdamOptions opt;
  opt.lr = cfg.lr;
  std::vector<double> epoch_cd;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.index(i)]);
    double total = 0.0;
    std::size_t at = 0;
    while (at < order.size()) {
      const std::size_t take =
          std::min(static_cast<std::size_t>(cfg.batch), order.size() - at);
      for (std::size_t j = 0; j < take; ++j) {
        Tensor loss = loss_of(data[order[at + j]], rng);
        const double item = loss.item();
        if (!std::isfinite(item))
          throw std::runtime_error("training diverged: non-finite loss in epoch " +
                                   std::to_string(epoch + 1));
        total += item;
        scale(loss, 1.0 / static_cast<double>(take)).backward();
      }
      nn::adam_step(params, opt);
      at += take;
    }
    epoch_cd.push_back(total / static_cast<double>(data.size()));
    if (cfg.early_stop_ratio > 0.0 && epoch_cd.size() > 1 &&
        epoch_cd.back() <= cfg.early_stop_ratio * epoch_cd.front())
      break;
  }
  return epoch_cd;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void append_metric_cells(std::string& out, const SweepRow& row) {
  out += fmt(row.rate.bits_per_point) + "," + fmt(row.rate.symbols_per_point) + "," +
         fmt(row.d1_psnr_db) + "," + fmt(row.d2_psnr_db) + "," +
         fmt(row.d1_psnr_symmetric_db) + "," + fmt(row.d2_psnr_symmetric_db) + "," +
         fmt(row.cd) + "," + fmt(row.wall_ms) + "\n";
}

}  // namespace

SemModel::SemModel(const ExperimentConfig& cfg_, Rng& rng)
    : cfg(validated(cfg_)),
      local("local", cfg_.patch_points(), cfg_.d, rng),
      decoder("decoder", cfg_.d, cfg_.dprime, cfg_.patch_points() / 2, rng),
      chan_enc("chan_enc", cfg_.d, rng),
      chan_dec("chan_dec", cfg_.d, rng) {
  if (cfg.dprime > 0) {
    cameras.emplace("cameras", cfg.views, rng);
    global.emplace("global", cfg.image_size, cfg.image_size, cfg.feature_width, cfg.dprime, rng);
  }
}

std::vector<nn::Parameter*> SemModel::parameters() {
  std::vector<nn::Parameter*> out = semantic_encoder_params();
  decoder.collect(out);
  chan_enc.collect(out);
  chan_dec.collect(out);
  return out;
}

std::vector<nn::Parameter*> SemModel::semantic_encoder_params() {
  std::vector<nn::Parameter*> out;
  local.collect(out);
  if (cameras) cameras->collect(out);
  if (global) global->collect(out);
  return out;
}

std::vector<nn::Parameter*> SemModel::stage2_params() {
  std::vector<nn::Parameter*> out;
  decoder.collect(out);
  chan_enc.collect(out);
  chan_dec.collect(out);
  return out;
}

void SemModel::freeze_semantic_encoders() {
  for (nn::Parameter* p : semantic_encoder_params()) p->set_frozen(true);
}

Checkpoint snapshot(SemModel& model, const std::string& stage, const std::string& rng_state) {
  Checkpoint ck;
  ck.stage = stage;
  ck.rng_state = rng_state;
  ck.hyper["config"] = render_config(model.cfg);
  for (nn::Parameter* p : model.parameters()) {
    ParamBlob blob;
    blob.shape = p->tensor.shape();
    blob.values = p->tensor.values();
    ck.blobs.emplace(p->name, std::move(blob));
  }
  return ck;
}

void restore(SemModel& model, const Checkpoint& ckpt) {
  std::vector<nn::Parameter*> params = model.parameters();
  if (params.size() != ckpt.blobs.size())
    throw std::invalid_argument("restore: checkpoint has " +
                                std::to_string(ckpt.blobs.size()) + " blobs, model has " +
                                std::to_string(params.size()) + " parameters");
  for (nn::Parameter* p : params) {
    const auto it = ckpt.blobs.find(p->name);
    if (it == ckpt.blobs.end())
      throw std::invalid_argument("restore: checkpoint is missing '" + p->name + "'");
    if (it->second.shape != p->tensor.shape())
      throw std::invalid_argument("restore: shape mismatch for '" + p->name + "'");
    p->tensor.values() = it->second.values;
    std::fill(p->moment1.begin(), p->moment1.end(), 0.0);
    std::fill(p->moment2.begin(), p->moment2.end(), 0.0);
    p->step = 0;
  }
}

ToySplits make_toy_splits(const ExperimentConfig& cfg) {
  cfg.validate();
  const int dense = cfg.dense_factor * cfg.n;
  const auto build = [&cfg, dense](std::uint64_t seed) {
    std::vector<PointCloud> keep;
    for (const PointCloud& raw : toy_dataset(dense, seed)) {
      PointCloud sub;
      sub.points.reserve(static_cast<std::size_t>(cfg.n));
      for (int i : fps(raw, cfg.n)) sub.points.push_back(raw.points[static_cast<std::size_t>(i)]);
      keep.push_back(normalize_cloud(sub, cfg.range_lo, cfg.range_hi));
    }
    return keep;
  };
  ToySplits out;
  out.train = build(cfg.shuffle_seed);
  out.test = build(cfg.shuffle_seed + kTestSeedOffset);
  return out;
}

TrainResult train_stage1(const ExperimentConfig& cfg,
                         const std::vector<PointCloud>& train_clouds) {
  Rng rng(cfg.seed);
  SemModel model(cfg, rng);
  const std::vector<CloudData> data = prepare_clouds(train_clouds, cfg);
  const std::vector<nn::Parameter*> params = model.parameters();
  const LossFn loss_of = [&model](const CloudData& cd, Rng&) {
    Tensor latents = model.local.encode(cd.patches);
    Tensor g;
    if (model.cfg.dprime > 0) g = global_feature(model, cd.centered);
    Tensor pts = decode_points(model, latents, g, cd.patches);
    return chamfer_loss(*cd.cloud, pts);
  };
  TrainResult out;
  out.epoch_cd = train_loop(cfg, cfg.epochs_stage1, data, params, rng, loss_of);
  out.ckpt = snapshot(model, "stage1", rng.save_state());
  return out;
}

TrainResult train_stage2(const ExperimentConfig& cfg, const Checkpoint& stage1,
                         const std::vector<PointCloud>& train_clouds) {
  Rng rng(cfg.seed);
  SemModel model(cfg, rng);
  restore(model, stage1);
  model.freeze_semantic_encoders();
  const std::vector<CloudData> data = prepare_clouds(train_clouds, cfg);

  // Frozen encoders make the semantic features constants per cloud.
  std::vector<Tensor> latents(data.size());
  std::vector<Tensor> globals(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tensor l = model.local.encode(data[i].patches);
    latents[i] = Tensor::constant(l.shape(), l.values());
    if (cfg.dprime > 0) {
      Tensor g = global_feature(model, data[i].centered);
      globals[i] = Tensor::constant(g.shape(), g.values());
    }
  }

  const std::vector<nn::Parameter*> params = model.parameters();
  const LossFn loss_of = [&](const CloudData& cd, Rng& r) {
    const std::size_t i = static_cast<std::size_t>(&cd - data.data());
    Tensor y = channel_pass(model, latents[i], training_snr(cfg, r), r);
    Tensor pts = decode_points(model, y, globals[i], cd.patches);
    return chamfer_loss(*cd.cloud, pts);
  };
  TrainResult out;
  out.epoch_cd = train_loop(cfg, cfg.epochs_stage2, data, params, rng, loss_of);
  out.ckpt = snapshot(model, "stage2", rng.save_state());
  return out;
}

TrainResult train_no_pretrain(const ExperimentConfig& cfg,
                              const std::vector<PointCloud>& train_clouds) {
  Rng rng(cfg.seed);
  SemModel model(cfg, rng);
  const std::vector<CloudData> data = prepare_clouds(train_clouds, cfg);
  const std::vector<nn::Parameter*> params = model.parameters();
  const LossFn loss_of = [&](const CloudData& cd, Rng& r) {
    Tensor latents = model.local.encode(cd.patches);
    Tensor y = channel_pass(model, latents, training_snr(cfg, r), r);
    Tensor g;
    if (cfg.dprime > 0) g = global_feature(model, cd.centered);
    Tensor pts = decode_points(model, y, g, cd.patches);
    return chamfer_loss(*cd.cloud, pts);
  };
  TrainResult out;
  out.epoch_cd =
      train_loop(cfg, cfg.epochs_stage1 + cfg.epochs_stage2, data, params, rng, loss_of);
  out.ckpt = snapshot(model, "stage2", rng.save_state());
  return out;
}

PointCloud reconstruct(SemModel& model, const std::string& stage, const PointCloud& cloud,
                       double snr_db, Rng& noise_rng) {
  if (cloud.size() != model.cfg.n)
    throw std::invalid_argument("reconstruct: cloud has " + std::to_string(cloud.size()) +
                                " points, config expects " + std::to_string(model.cfg.n));
  const PatchSet patches = extract_patches(cloud, model.cfg.s);
  Tensor y = model.local.encode(patches);
  if (stage != "stage1") y = channel_pass(model, y, snr_db, noise_rng);
  Tensor g;
  if (model.cfg.dprime > 0) g = global_feature(model, center_for_render(cloud));
  return cloud_from(decode_points(model, y, g, patches));
}

SweepResult evaluate_model(const Checkpoint& ckpt, const ExperimentConfig& cfg,
                           const std::vector<PointCloud>& test_clouds,
                           const std::vector<double>& snr_list) {
  Rng init_rng(cfg.seed);
  SemModel model(cfg, init_rng);
  restore(model, ckpt);
  const bool bypass = ckpt.stage == "stage1";
  const std::vector<CloudData> data = prepare_clouds(test_clouds, cfg);

  // Weights are fixed, so the semantic features are per-cloud constants
  // shared by every sweep point.
  std::vector<Tensor> latents(data.size());
  std::vector<Tensor> globals(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tensor l = model.local.encode(data[i].patches);
    latents[i] = Tensor::constant(l.shape(), l.values());
    if (cfg.dprime > 0) {
      Tensor g = global_feature(model, data[i].centered);
      globals[i] = Tensor::constant(g.shape(), g.values());
    }
  }

  Rng noise_root(mix_seed(cfg.seed ^ 0x5eedbeefcafef00dull));
  SweepResult res;
  for (std::size_t r = 0; r < snr_list.size(); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepRow row;
    row.snr_db = snr_list[r];
    row.dprime = cfg.dprime;
    row.rate = rate_report(cfg.s, cfg.d, cfg.dprime, cfg.n, snr_list[r], cfg.p);
    double d1 = 0.0, d2 = 0.0, d1s = 0.0, d2s = 0.0, cd_sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      Rng noise = noise_root.fork(r * 1000003ull + i);
      Tensor y = latents[i];
      if (!bypass) y = channel_pass(model, latents[i], snr_list[r], noise);
      const PointCloud rec = cloud_from(decode_points(model, y, globals[i], data[i].patches));
      const QualityReport q = evaluate(test_clouds[i], rec);
      d1 += csv_db(q.d1_psnr_db);
      d2 += csv_db(q.d2_psnr_db);
      d1s += csv_db(q.d1_psnr_symmetric_db);
      d2s += csv_db(q.d2_psnr_symmetric_db);
      cd_sum += chamfer(test_clouds[i], rec);
    }
    const double den = static_cast<double>(data.size());
    row.d1_psnr_db = d1 / den;
    row.d2_psnr_db = d2 / den;
    row.d1_psnr_symmetric_db = d1s / den;
    row.d2_psnr_symmetric_db = d2s / den;
    row.cd = cd_sum / den;
    if (cfg.timings)
      row.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    res.rows.push_back(row);
  }
  return res;
}

SweepResult ablate_global(const std::vector<Checkpoint>& ckpt_family,
                          const ExperimentConfig& base, const std::vector<int>& dprime_list,
                          const std::vector<PointCloud>& test_clouds) {
  if (ckpt_family.size() != dprime_list.size())
    throw std::invalid_argument("ablate_global: need exactly one checkpoint per dprime");
  std::vector<std::size_t> idx(dprime_list.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&dprime_list](std::size_t a, std::size_t b) { return dprime_list[a] < dprime_list[b]; });
  SweepResult out;
  for (std::size_t i : idx) {
    ExperimentConfig cfg = base;
    cfg.dprime = dprime_list[i];
    SweepResult one = evaluate_model(ckpt_family[i], cfg, test_clouds,
                                     {std::numeric_limits<double>::infinity()});
    SweepRow row = one.rows.at(0);
    row.dprime = cfg.dprime;
    out.rows.push_back(row);
  }
  return out;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = "# schema: pcsm-sweep-v1\n";
  out +=
      "snr_db,bpp,symbols_per_point,d1_psnr_db,d2_psnr_db,d1_psnr_symmetric_db,"
      "d2_psnr_symmetric_db,cd,wall_ms\n";
  for (const SweepRow& row : result.rows) {
    out += fmt(row.snr_db) + ",";
    append_metric_cells(out, row);
  }
  return out;
}

std::string ablation_csv(const SweepResult& result) {
  std::string out = "# schema: pcsm-ablation-v1\n";
  out +=
      "dprime,bpp,symbols_per_point,d1_psnr_db,d2_psnr_db,d1_psnr_symmetric_db,"
      "d2_psnr_symmetric_db,cd,wall_ms\n";
  for (const SweepRow& row : result.rows) {
    out += std::to_string(row.dprime) + ",";
    append_metric_cells(out, row);
  }
  return out;
}

}  // namespace pcsm
