#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "pcsm/channel.hpp"
#include "pcsm/codec.hpp"
#include "pcsm/config.hpp"
#include "pcsm/dataset.hpp"
#include "pcsm/metrics.hpp"
#include "pcsm/rng.hpp"

// PCSM_CLI_PATH is injected by the build; these tests exercise the real
// binary through a shell, capturing exit status and combined output.

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;
};

CmdResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd =
      (env.empty() ? "" : env + " ") + std::string(PCSM_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = pclose(pipe);
  CmdResult res;
  res.out = std::move(out);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("pcsm_cli_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

pcsm::PointCloud jittered_cube(int n, std::uint64_t seed) {
  pcsm::Rng rng(pcsm::mix_seed(seed));
  pcsm::PointCloud cloud;
  for (int i = 0; i < n; ++i)
    cloud.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  return cloud;
}

}  // namespace

TEST_CASE("budget subcommand prints the symbol count") {
  const CmdResult r = run_cli("budget --bits 3072 --snr 0 --p 0.9");
  CHECK(r.code == 0);
  CHECK(r.out == "6827\n");

  const CmdResult v = run_cli("budget --bits 3072 --snr 0 --p 0.9 --verbose");
  CHECK(v.code == 0);
  CHECK(v.out.rfind("6827\n", 0) == 0);
  CHECK(v.out.find("capacity_bits_per_symbol 1\n") != std::string::npos);
  CHECK(v.out.find("code_rate 0.5\n") != std::string::npos);
  CHECK(v.out.find("bit_use 3072\n") != std::string::npos);

  // Bad argument values surface as usage errors.
  CHECK(run_cli("budget --bits -1 --snr 0").code == 2);
  CHECK(run_cli("budget --snr 0").code == 2);  // --bits is required
}

TEST_CASE("metrics subcommand: identical clouds hit the infinite-PSNR sentinel") {
  TempDir tmp("metrics");
  const pcsm::PointCloud a = jittered_cube(64, 1);
  const std::string a_path = (tmp.path / "a.ply").string();
  pcsm::write_ply(a, a_path);

  const CmdResult r = run_cli("metrics " + a_path + " " + a_path);
  CHECK(r.code == 0);
  CHECK(r.out.find("n_a 64\n") != std::string::npos);
  CHECK(r.out.find("cd 0\n") != std::string::npos);
  CHECK(r.out.find("d1_psnr_db inf\n") != std::string::npos);
  CHECK(r.out.find("d2_psnr_db inf\n") != std::string::npos);
  CHECK(r.out.find("d1_psnr_symmetric_db inf\n") != std::string::npos);

  // Distinct clouds: every printed figure matches the library.
  const pcsm::PointCloud b = jittered_cube(64, 2);
  const std::string b_path = (tmp.path / "b.ply").string();
  pcsm::write_ply(b, b_path);
  const CmdResult d = run_cli("metrics " + a_path + " " + b_path);
  CHECK(d.code == 0);
  const pcsm::QualityReport q = pcsm::evaluate(a, b, 12);
  CHECK(d.out.find("d1_psnr_db " + fmt(q.d1_psnr_db) + "\n") != std::string::npos);
  CHECK(d.out.find("d2_psnr_db " + fmt(q.d2_psnr_db) + "\n") != std::string::npos);
  CHECK(d.out.find("cd " + fmt(pcsm::chamfer(a, b)) + "\n") != std::string::npos);

  CHECK(run_cli("metrics " + a_path).code == 2);  // candidate is required
  CHECK(run_cli("metrics /nonexistent.ply " + a_path).code == 1);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("budget --bits 10 --snr 0 --bogus").code == 2);
  CHECK(run_cli("no-such-subcommand").code == 2);
  CHECK(run_cli("").code == 2);  // a subcommand is required
  CHECK(run_cli("train --stage 3").code == 2);
  CHECK(run_cli("train --stage 2").code == 2);     // stage 2 without --init
  CHECK(run_cli("train --stage 1 --n 4").code == 2);  // rejected by validation
  CHECK(run_cli("--version").code == 0);
}

TEST_CASE("prepare writes normalized toy splits and a config snapshot") {
  TempDir tmp("prepare");
  const std::string out = (tmp.path / "data").string();
  const CmdResult r =
      run_cli("prepare --n 32 --s 4 --d 4 --dprime 0 --views 1 --image-size 16 "
              "--feature-width 8 --out-dir " +
              out);
  CHECK(r.code == 0);
  CHECK(r.out.find("train: 8 clouds of 32 points\n") != std::string::npos);
  CHECK(r.out.find("test: 8 clouds of 32 points\n") != std::string::npos);

  int train_plys = 0;
  for (const fs::directory_entry& e : fs::directory_iterator(fs::path(out) / "train"))
    train_plys += e.path().extension() == ".ply";
  CHECK(train_plys == 8);
  CHECK(fs::exists(fs::path(out) / "test"));

  const pcsm::ExperimentConfig snap = pcsm::load_config((fs::path(out) / "prepare.ini").string());
  CHECK(snap.n == 32);
  CHECK(snap.out_dir == out);

  // PCSM_OUT wins over --out-dir.
  const std::string env_out = (tmp.path / "env").string();
  const CmdResult e =
      run_cli("prepare --n 32 --s 4 --d 4 --dprime 0 --views 1 --image-size 16 "
              "--feature-width 8 --out-dir " +
                  out,
              "PCSM_OUT=" + env_out);
  CHECK(e.code == 0);
  CHECK(fs::exists(fs::path(env_out) / "train"));
  CHECK(pcsm::load_config((fs::path(env_out) / "prepare.ini").string()).out_dir == env_out);
}

TEST_CASE("train then eval round trip through checkpoint files") {
  TempDir tmp("train");
  const std::string out = (tmp.path / "run").string();
  const std::string small =
      "--n 32 --s 4 --d 4 --dprime 0 --views 1 --image-size 16 --feature-width 8 "
      "--batch 8 --seed 7 ";

  const CmdResult t1 =
      run_cli("train --stage 1 " + small + "--epochs1 2 --out-dir " + out);
  CHECK(t1.code == 0);
  CHECK(t1.out.find("stage1 done: 2 epochs") != std::string::npos);
  const std::string ckpt = (fs::path(out) / "stage1.ckpt").string();
  REQUIRE(fs::exists(ckpt));

  // The loss CSV has a schema line, a header, one line per epoch.
  std::ifstream loss((fs::path(out) / "stage1_loss.csv"));
  std::string line;
  std::getline(loss, line);
  CHECK(line == "# schema: pcsm-loss-v1");
  std::getline(loss, line);
  CHECK(line == "epoch,cd");
  int rows = 0;
  while (std::getline(loss, line)) rows += !line.empty();
  CHECK(rows == 2);

  const CmdResult ev = run_cli("eval --ckpt " + ckpt + " --snr 5,0 --out-dir " + out);
  CHECK(ev.code == 0);
  CHECK(ev.out.rfind("# schema: pcsm-sweep-v1\n", 0) == 0);
  CHECK(std::count(ev.out.begin(), ev.out.end(), '\n') == 4);

  // The CSV on disk is exactly what was printed.
  std::ifstream csv((fs::path(out) / "eval.csv"));
  std::string disk((std::istreambuf_iterator<char>(csv)), std::istreambuf_iterator<char>());
  CHECK(disk == ev.out);

  // Stage 2 refuses a stage-2 checkpoint as --init.
  const CmdResult t2 =
      run_cli("train --stage 2 " + small + "--epochs2 1 --init " + ckpt + " --out-dir " + out);
  CHECK(t2.code == 0);
  const std::string ckpt2 = (fs::path(out) / "stage2.ckpt").string();
  REQUIRE(fs::exists(ckpt2));
  CHECK(run_cli("train --stage 2 " + small + "--init " + ckpt2 + " --out-dir " + out).code == 2);
}
