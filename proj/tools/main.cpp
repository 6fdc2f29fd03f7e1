// Command line front end: dataset preparation, the two training stages,
// evaluation sweeps, link budgeting, and metric reports.
//
// Exit codes: 0 success, 2 usage or configuration errors, 1 anything else.
// PCSM_OUT overrides the output directory from the environment.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcsm/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pcsm;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string loss_csv(const std::vector<double>& epoch_cd) {
  std::string out = "# schema: pcsm-loss-v1\nepoch,cd\n";
  for (std::size_t i = 0; i < epoch_cd.size(); ++i)
    out += std::to_string(i + 1) + "," + fmt(epoch_cd[i]) + "\n";
  return out;
}

std::vector<PointCloud> load_ply_dir(const std::string& dir) {
  std::vector<std::string> paths;
  for (const fs::directory_entry& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ply") paths.push_back(e.path().string());
  if (paths.empty()) throw std::invalid_argument("no .ply files in " + dir);
  std::sort(paths.begin(), paths.end());
  std::vector<PointCloud> out;
  out.reserve(paths.size());
  for (const std::string& p : paths) out.push_back(read_ply(p));
  return out;
}

ExperimentConfig config_of(const Checkpoint& ckpt) {
  const auto it = ckpt.hyper.find("config");
  if (it == ckpt.hyper.end())
    throw std::invalid_argument("checkpoint carries no embedded config");
  return parse_config(it->second);
}

void apply_out_env(ExperimentConfig& cfg) {
  if (const char* env = std::getenv("PCSM_OUT")) cfg.out_dir = env;
}

// Every config field as a flag. Precedence: built-in defaults, then
// --config file values, then explicit flags, then PCSM_OUT.
struct CfgArgs {
  std::string config_path;
  ExperimentConfig v;
  CLI::App* cmd = nullptr;

  void attach(CLI::App* sub) {
    cmd = sub;
    sub->add_option("--config", config_path, "Config file; explicit flags override it");
    sub->add_option("--n", v.n, "Points per cloud");
    sub->add_option("--s", v.s, "Patch count");
    sub->add_option("--d", v.d, "Local feature width");
    sub->add_option("--dprime", v.dprime, "Global feature width (0 disables the branch)");
    sub->add_option("--views", v.views, "Projection count");
    sub->add_option("--image-size", v.image_size, "Projection image side length");
    sub->add_option("--feature-width", v.feature_width, "Per-view CNN feature width");
    sub->add_option("--splat-sigma", v.splat_sigma, "Point splat std in pixels");
    sub->add_option("--snr", v.snr_db, "Channel SNR in dB");
    sub->add_option("--p", v.p, "Lossless side-channel success probability");
    sub->add_flag("--snr-jitter", v.snr_jitter,
                  "Randomize each training cloud's SNR by +-5 dB (experimental)");
    sub->add_option("--lr", v.lr, "Adam learning rate");
    sub->add_option("--batch", v.batch, "Batch size");
    sub->add_option("--epochs1", v.epochs_stage1, "Stage-1 epoch count");
    sub->add_option("--epochs2", v.epochs_stage2, "Stage-2 epoch count");
    sub->add_option("--seed", v.seed, "Training seed");
    sub->add_option("--early-stop", v.early_stop_ratio,
                    "Stop once epoch CD <= ratio x first epoch (0 disables)");
    sub->add_option("--root", v.root, "'toy' or a directory of OFF meshes");
    sub->add_option("--split", v.split, "Dataset split: train or test");
    sub->add_option("--dense-factor", v.dense_factor, "Surface samples per kept point");
    sub->add_option("--range-lo", v.range_lo, "Normalization cube low corner");
    sub->add_option("--range-hi", v.range_hi, "Normalization cube high corner");
    sub->add_option("--shuffle-seed", v.shuffle_seed, "Dataset generation seed");
    sub->add_option("--out-dir", v.out_dir, "Output directory");
    sub->add_flag("--timings", v.timings, "Real wall_ms in CSVs (breaks byte-stability)");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (cmd->count("--n")) cfg.n = v.n;
    if (cmd->count("--s")) cfg.s = v.s;
    if (cmd->count("--d")) cfg.d = v.d;
    if (cmd->count("--dprime")) cfg.dprime = v.dprime;
    if (cmd->count("--views")) cfg.views = v.views;
    if (cmd->count("--image-size")) cfg.image_size = v.image_size;
    if (cmd->count("--feature-width")) cfg.feature_width = v.feature_width;
    if (cmd->count("--splat-sigma")) cfg.splat_sigma = v.splat_sigma;
    if (cmd->count("--snr")) cfg.snr_db = v.snr_db;
    if (cmd->count("--p")) cfg.p = v.p;
    if (cmd->count("--snr-jitter")) cfg.snr_jitter = v.snr_jitter;
    if (cmd->count("--lr")) cfg.lr = v.lr;
    if (cmd->count("--batch")) cfg.batch = v.batch;
    if (cmd->count("--epochs1")) cfg.epochs_stage1 = v.epochs_stage1;
    if (cmd->count("--epochs2")) cfg.epochs_stage2 = v.epochs_stage2;
    if (cmd->count("--seed")) cfg.seed = v.seed;
    if (cmd->count("--early-stop")) cfg.early_stop_ratio = v.early_stop_ratio;
    if (cmd->count("--root")) cfg.root = v.root;
    if (cmd->count("--split")) cfg.split = v.split;
    if (cmd->count("--dense-factor")) cfg.dense_factor = v.dense_factor;
    if (cmd->count("--range-lo")) cfg.range_lo = v.range_lo;
    if (cmd->count("--range-hi")) cfg.range_hi = v.range_hi;
    if (cmd->count("--shuffle-seed")) cfg.shuffle_seed = v.shuffle_seed;
    if (cmd->count("--out-dir")) cfg.out_dir = v.out_dir;
    if (cmd->count("--timings")) cfg.timings = v.timings;
    apply_out_env(cfg);
    cfg.validate();
    return cfg;
  }
};

std::vector<PointCloud> pick_clouds(const ExperimentConfig& cfg, const std::string& data_dir,
                                    bool test_split) {
  if (!data_dir.empty()) return load_ply_dir(data_dir);
  ToySplits splits = make_toy_splits(cfg);
  return test_split ? std::move(splits.test) : std::move(splits.train);
}

void run_prepare(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  if (cfg.root == "toy") {
    const ToySplits splits = make_toy_splits(cfg);
    for (const auto& [name, clouds] :
         {std::pair{std::string("train"), &splits.train}, {std::string("test"), &splits.test}}) {
      const fs::path dir = fs::path(cfg.out_dir) / name;
      fs::create_directories(dir);
      for (std::size_t i = 0; i < clouds->size(); ++i) {
        char base[64];
        std::snprintf(base, sizeof base, "cloud_%02zu_%s.ply", i,
                      toy_shape_name(static_cast<ToyShape>(i % kToyShapeCount)));
        write_ply((*clouds)[i], (dir / base).string());
      }
      std::cout << name << ": " << clouds->size() << " clouds of " << cfg.n << " points\n";
    }
  } else {
    std::vector<std::string> meshes;
    for (const fs::directory_entry& e : fs::directory_iterator(cfg.root))
      if (e.is_regular_file() && e.path().extension() == ".off") meshes.push_back(e.path().string());
    if (meshes.empty()) throw std::invalid_argument("no .off files in " + cfg.root);
    std::sort(meshes.begin(), meshes.end());
    const fs::path dir = fs::path(cfg.out_dir) / cfg.split;
    fs::create_directories(dir);
    const Rng root_rng(cfg.shuffle_seed);
    for (std::size_t i = 0; i < meshes.size(); ++i) {
      Rng rng = root_rng.fork(i);
      const RawModel model = load_off(meshes[i]);
      const PointCloud dense = mesh_to_cloud(model, cfg.dense_factor * cfg.n, rng);
      PointCloud sub;
      sub.points.reserve(static_cast<std::size_t>(cfg.n));
      for (int idx : fps(dense, cfg.n)) sub.points.push_back(dense.points[static_cast<std::size_t>(idx)]);
      const PointCloud normed = normalize_cloud(sub, cfg.range_lo, cfg.range_hi);
      write_ply(normed, (dir / (fs::path(meshes[i]).stem().string() + ".ply")).string());
    }
    std::cout << cfg.split << ": " << meshes.size() << " clouds of " << cfg.n << " points\n";
  }
  save_config(cfg, (fs::path(cfg.out_dir) / "prepare.ini").string());
}

void run_train(const CfgArgs& args, int stage, const std::string& init_path, bool from_scratch,
               const std::string& data_dir) {
  const ExperimentConfig cfg = args.resolve();
  Checkpoint s1;
  if (stage == 2 && !from_scratch) {
    if (init_path.empty())
      throw std::invalid_argument(
          "train --stage 2 needs --init with a stage-1 checkpoint (or --from-scratch)");
    s1 = load_checkpoint(init_path);
    if (s1.stage != "stage1")
      throw std::invalid_argument("--init must point at a stage-1 checkpoint, got '" + s1.stage +
                                  "'");
  }
  const std::vector<PointCloud> train = pick_clouds(cfg, data_dir, false);
  TrainResult res;
  std::string tag;
  if (stage == 1) {
    res = train_stage1(cfg, train);
    tag = "stage1";
  } else if (from_scratch) {
    res = train_no_pretrain(cfg, train);
    tag = "scratch";
  } else {
    res = train_stage2(cfg, s1, train);
    tag = "stage2";
  }
  fs::create_directories(cfg.out_dir);
  save_checkpoint(res.ckpt, (fs::path(cfg.out_dir) / (tag + ".ckpt")).string());
  save_config(cfg, (fs::path(cfg.out_dir) / "config.ini").string());
  write_text((fs::path(cfg.out_dir) / (tag + "_loss.csv")).string(), loss_csv(res.epoch_cd));
  for (std::size_t i = 0; i < res.epoch_cd.size(); ++i)
    std::cout << "epoch " << (i + 1) << " cd " << fmt(res.epoch_cd[i]) << "\n";
  std::cout << tag << " done: " << res.epoch_cd.size() << " epochs, checkpoint in " << cfg.out_dir
            << "\n";
}

void run_eval(const std::string& ckpt_path, std::vector<double> snrs, const std::string& data_dir,
              const std::string& out_dir, bool timings, bool dump) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  ExperimentConfig cfg = config_of(ckpt);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (timings) cfg.timings = true;
  apply_out_env(cfg);
  if (snrs.empty()) snrs = {cfg.snr_db};
  const std::vector<PointCloud> test = pick_clouds(cfg, data_dir, true);
  const SweepResult sr = evaluate_model(ckpt, cfg, test, snrs);
  const std::string csv = sweep_csv(sr);
  fs::create_directories(cfg.out_dir);
  write_text((fs::path(cfg.out_dir) / "eval.csv").string(), csv);
  std::cout << csv;
  if (dump) {
    Rng init_rng(cfg.seed);
    SemModel model(cfg, init_rng);
    restore(model, ckpt);
    const Rng dump_root(mix_seed(cfg.seed ^ 0xd00dfeedULL));
    for (std::size_t r = 0; r < snrs.size(); ++r)
      for (std::size_t i = 0; i < test.size(); ++i) {
        Rng noise = dump_root.fork(r * 1000003ull + i);
        const PointCloud rec = reconstruct(model, ckpt.stage, test[i], snrs[r], noise);
        char base[64];
        std::snprintf(base, sizeof base, "recon_snr%g_cloud%02zu.ply", snrs[r], i);
        write_ply(rec, (fs::path(cfg.out_dir) / base).string());
      }
  }
}

void run_sweep(const std::vector<std::string>& ckpt_paths, std::vector<double> snrs,
               const std::string& data_dir, const std::string& out_dir, bool timings, bool rate,
               bool ablate) {
  if (ckpt_paths.empty()) throw std::invalid_argument("sweep needs at least one --ckpt");
  std::vector<Checkpoint> ckpts;
  ckpts.reserve(ckpt_paths.size());
  for (const std::string& p : ckpt_paths) ckpts.push_back(load_checkpoint(p));
  ExperimentConfig base = config_of(ckpts.front());
  if (!out_dir.empty()) base.out_dir = out_dir;
  if (timings) base.timings = true;
  apply_out_env(base);
  const std::vector<PointCloud> test = pick_clouds(base, data_dir, true);
  fs::create_directories(base.out_dir);

  std::string csv, file;
  if (ablate) {
    std::vector<int> dprimes;
    for (const Checkpoint& c : ckpts) dprimes.push_back(config_of(c).dprime);
    const SweepResult sr = ablate_global(ckpts, base, dprimes, test);
    csv = ablation_csv(sr);
    file = "ablation.csv";
  } else if (rate) {
    if (snrs.size() > 1) throw std::invalid_argument("rate sweeps take a single --snr");
    const double snr = snrs.empty() ? 10.0 : snrs.front();
    SweepResult all;
    for (const Checkpoint& c : ckpts) {
      ExperimentConfig cfg = config_of(c);
      cfg.timings = base.timings;
      const SweepResult one = evaluate_model(c, cfg, test, {snr});
      all.rows.push_back(one.rows.front());
    }
    std::sort(all.rows.begin(), all.rows.end(), [](const SweepRow& a, const SweepRow& b) {
      return a.rate.bits_per_point < b.rate.bits_per_point;
    });
    csv = sweep_csv(all);
    file = "rate.csv";
  } else {
    if (ckpts.size() != 1) throw std::invalid_argument("SNR sweeps take exactly one --ckpt");
    if (snrs.empty()) snrs = {0.0, 5.0, 10.0};
    ExperimentConfig cfg = config_of(ckpts.front());
    cfg.timings = base.timings;
    const SweepResult sr = evaluate_model(ckpts.front(), cfg, test, snrs);
    csv = sweep_csv(sr);
    file = "sweep.csv";
  }
  write_text((fs::path(base.out_dir) / file).string(), csv);
  std::cout << csv;
}

void run_budget(long long bits, double snr, double p, bool verbose) {
  const LinkBudget b = lossless_budget(bits, snr, p);
  std::cout << b.symbol_use << "\n";
  if (verbose) {
    std::cout << "capacity_bits_per_symbol " << fmt(b.capacity) << "\n";
    std::cout << "code_rate " << fmt(b.code_rate) << "\n";
    std::cout << "bit_use " << b.bit_use << "\n";
    std::cout << "success_p " << fmt(b.p) << "\n";
  }
}

void run_metrics(const std::string& a_path, const std::string& b_path, int normal_k) {
  const PointCloud a = read_ply(a_path);
  const PointCloud b = read_ply(b_path);
  const QualityReport q = evaluate(a, b, normal_k);
  std::cout << "n_a " << q.n_a << "\n";
  std::cout << "n_b " << q.n_b << "\n";
  std::cout << "peak " << fmt(q.peak) << "\n";
  std::cout << "cd " << fmt(chamfer(a, b)) << "\n";
  std::cout << "d1_psnr_db " << fmt(q.d1_psnr_db) << "\n";
  std::cout << "d2_psnr_db " << fmt(q.d2_psnr_db) << "\n";
  std::cout << "d1_psnr_symmetric_db " << fmt(q.d1_psnr_symmetric_db) << "\n";
  std::cout << "d2_psnr_symmetric_db " << fmt(q.d2_psnr_symmetric_db) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic point cloud transmission workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pcsm 0.1.0");
  app.footer("PCSM_OUT in the environment overrides every output directory.");

  CLI::App* prepare = app.add_subcommand("prepare", "Sample, downsample, and normalize clouds");
  CfgArgs prepare_args;
  prepare_args.attach(prepare);
  prepare->callback([&] { run_prepare(prepare_args.resolve()); });

  CLI::App* train = app.add_subcommand("train", "Run one training stage");
  CfgArgs train_args;
  train_args.attach(train);
  int stage = 1;
  std::string init_path, train_data;
  bool from_scratch = false;
  train->add_option("--stage", stage, "1 or 2")->required()->check(CLI::Range(1, 2));
  train->add_option("--init", init_path, "Stage-1 checkpoint (required for --stage 2)");
  train->add_flag("--from-scratch", from_scratch,
                  "Stage 2 control: train everything jointly under noise, no stage-1 weights");
  train->add_option("--data", train_data, "Directory of prepared .ply clouds (default: toy train split)");
  train->callback([&] { run_train(train_args, stage, init_path, from_scratch, train_data); });

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint over SNR points");
  std::string eval_ckpt, eval_data, eval_out;
  std::vector<double> eval_snrs;
  bool eval_timings = false, eval_dump = false;
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint to evaluate")->required();
  eval->add_option("--snr", eval_snrs, "SNR points in dB (repeatable or comma separated)")
      ->delimiter(',');
  eval->add_option("--data", eval_data, "Directory of prepared .ply clouds (default: toy test split)");
  eval->add_option("--out-dir", eval_out, "Output directory (default: from checkpoint config)");
  eval->add_flag("--timings", eval_timings, "Real wall_ms in the CSV");
  eval->add_flag("--dump", eval_dump, "Write reconstructed clouds as .ply");
  eval->callback(
      [&] { run_eval(eval_ckpt, eval_snrs, eval_data, eval_out, eval_timings, eval_dump); });

  CLI::App* sweep = app.add_subcommand("sweep", "CSV sweeps over SNR, rate, or global width");
  std::vector<std::string> sweep_ckpts;
  std::vector<double> sweep_snrs;
  std::string sweep_data, sweep_out;
  bool sweep_timings = false, sweep_rate = false, sweep_ablate = false;
  sweep->add_option("--ckpt", sweep_ckpts, "Checkpoint (repeat for rate/ablation families)")
      ->required();
  sweep->add_option("--snr", sweep_snrs, "SNR points in dB")->delimiter(',');
  auto* rate_flag = sweep->add_flag("--rate", sweep_rate, "One row per checkpoint, sorted by bpp");
  sweep->add_flag("--ablate", sweep_ablate, "Global-width ablation rows, sorted by dprime")
      ->excludes(rate_flag);
  sweep->add_option("--data", sweep_data, "Directory of prepared .ply clouds (default: toy test split)");
  sweep->add_option("--out-dir", sweep_out, "Output directory (default: from first checkpoint)");
  sweep->add_flag("--timings", sweep_timings, "Real wall_ms in the CSV");
  sweep->callback([&] {
    run_sweep(sweep_ckpts, sweep_snrs, sweep_data, sweep_out, sweep_timings, sweep_rate,
              sweep_ablate);
  });

  CLI::App* budget = app.add_subcommand("budget", "Lossless side-channel symbol budget");
  long long budget_bits = 0;
  double budget_snr = 0.0, budget_p = 0.9;
  bool budget_verbose = false;
  budget->add_option("--bits", budget_bits, "Payload size in bits")->required();
  budget->add_option("--snr", budget_snr, "Channel SNR in dB")->required();
  budget->add_option("--p", budget_p, "Success probability");
  budget->add_flag("--verbose", budget_verbose, "Also print the budget breakdown");
  budget->callback([&] { run_budget(budget_bits, budget_snr, budget_p, budget_verbose); });

  CLI::App* metrics = app.add_subcommand("metrics", "D1/D2 PSNR of candidate B against reference A");
  std::string metrics_a, metrics_b;
  int metrics_k = 12;
  metrics->add_option("reference", metrics_a, "Reference .ply")->required();
  metrics->add_option("candidate", metrics_b, "Candidate .ply")->required();
  metrics->add_option("--normal-k", metrics_k, "Neighborhood size for normal estimation");
  metrics->callback([&] { run_metrics(metrics_a, metrics_b, metrics_k); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
