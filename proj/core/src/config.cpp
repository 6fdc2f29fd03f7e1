#include "pcsm/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pcsm {

void ExperimentConfig::validate() const {
  if (n < 8) throw std::invalid_argument("config: n must be at least 8");
  if (s < 1) throw std::invalid_argument("config: s must be positive");
  if ((2 * n) % s != 0)
    throw std::invalid_argument("config: s must divide 2n so patches have a whole size");
  const int k = patch_points();
  if (k % 4 != 0) throw std::invalid_argument("config: patch size 2n/s must be divisible by 4");
  if (k > n) throw std::invalid_argument("config: patch size 2n/s cannot exceed n");
  if (d < 1) throw std::invalid_argument("config: d must be positive");
  if (dprime < 0) throw std::invalid_argument("config: dprime cannot be negative");
  if (views < 1) throw std::invalid_argument("config: need at least one view");
  if (image_size < 16) throw std::invalid_argument("config: image_size must be at least 16");
  if (feature_width < 1) throw std::invalid_argument("config: feature_width must be positive");
  if (!(splat_sigma > 0.0)) throw std::invalid_argument("config: splat_sigma must be positive");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("config: p must be in (0,1]");
  if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be positive");
  if (batch < 1) throw std::invalid_argument("config: batch must be positive");
  if (epochs_stage1 < 0 || epochs_stage2 < 0)
    throw std::invalid_argument("config: epoch counts cannot be negative");
  if (early_stop_ratio < 0.0 || early_stop_ratio >= 1.0)
    throw std::invalid_argument("config: early_stop_ratio must be in [0,1)");
  if (!(range_hi > range_lo)) throw std::invalid_argument("config: need range_hi > range_lo");
  if (dense_factor < 1) throw std::invalid_argument("config: dense_factor must be positive");
  if (root.empty()) throw std::invalid_argument("config: data root cannot be empty");
  if (split != "train" && split != "test")
    throw std::invalid_argument("config: split must be train or test");
}

ExperimentConfig toy_config() { return ExperimentConfig{}; }

ExperimentConfig full_scale_config() {
  ExperimentConfig cfg;
  cfg.n = 8192;
  cfg.s = 64;
  cfg.d = 8;
  cfg.dprime = 4;
  cfg.views = 4;
  cfg.image_size = 224;
  cfg.feature_width = 512;
  cfg.batch = 24;
  cfg.lr = 0.0005;
  cfg.epochs_stage1 = 100;
  cfg.epochs_stage2 = 100;
  cfg.root = "modelnet";
  return cfg;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& str) {
  std::size_t b = 0, e = str.size();
  while (b < e && std::isspace(static_cast<unsigned char>(str[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(str[e - 1]))) --e;
  return str.substr(b, e - b);
}

double parse_double(const std::string& v, const std::string& key) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size())
    throw std::invalid_argument("config: bad number '" + v + "' for " + key);
  return out;
}

long long parse_int(const std::string& v, const std::string& key) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size())
    throw std::invalid_argument("config: bad integer '" + v + "' for " + key);
  return out;
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size())
    throw std::invalid_argument("config: bad integer '" + v + "' for " + key);
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad flag '" + v + "' for " + key);
}

}  // namespace

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[model]\n";
  out << "n = " << cfg.n << "\n";
  out << "s = " << cfg.s << "\n";
  out << "d = " << cfg.d << "\n";
  out << "dprime = " << cfg.dprime << "\n";
  out << "views = " << cfg.views << "\n";
  out << "image_size = " << cfg.image_size << "\n";
  out << "feature_width = " << cfg.feature_width << "\n";
  out << "splat_sigma = " << fmt_double(cfg.splat_sigma) << "\n";
  out << "\n[channel]\n";
  out << "snr_db = " << fmt_double(cfg.snr_db) << "\n";
  out << "p = " << fmt_double(cfg.p) << "\n";
  out << "snr_jitter = " << (cfg.snr_jitter ? "true" : "false") << "\n";
  out << "\n[train]\n";
  out << "lr = " << fmt_double(cfg.lr) << "\n";
  out << "batch = " << cfg.batch << "\n";
  out << "epochs_stage1 = " << cfg.epochs_stage1 << "\n";
  out << "epochs_stage2 = " << cfg.epochs_stage2 << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "early_stop_ratio = " << fmt_double(cfg.early_stop_ratio) << "\n";
  out << "\n[data]\n";
  out << "root = " << cfg.root << "\n";
  out << "split = " << cfg.split << "\n";
  out << "dense_factor = " << cfg.dense_factor << "\n";
  out << "range_lo = " << fmt_double(cfg.range_lo) << "\n";
  out << "range_hi = " << fmt_double(cfg.range_hi) << "\n";
  out << "shuffle_seed = " << cfg.shuffle_seed << "\n";
  out << "\n[output]\n";
  out << "out_dir = " << cfg.out_dir << "\n";
  out << "timings = " << (cfg.timings ? "true" : "false") << "\n";
  return out.str();
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find_first_of("#;");
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "model.n") cfg.n = static_cast<int>(parse_int(val, key));
    else if (key == "model.s") cfg.s = static_cast<int>(parse_int(val, key));
    else if (key == "model.d") cfg.d = static_cast<int>(parse_int(val, key));
    else if (key == "model.dprime") cfg.dprime = static_cast<int>(parse_int(val, key));
    else if (key == "model.views") cfg.views = static_cast<int>(parse_int(val, key));
    else if (key == "model.image_size") cfg.image_size = static_cast<int>(parse_int(val, key));
    else if (key == "model.feature_width") cfg.feature_width = static_cast<int>(parse_int(val, key));
    else if (key == "model.splat_sigma") cfg.splat_sigma = parse_double(val, key);
    else if (key == "channel.snr_db") cfg.snr_db = parse_double(val, key);
    else if (key == "channel.p") cfg.p = parse_double(val, key);
    else if (key == "channel.snr_jitter") cfg.snr_jitter = parse_bool(val, key);
    else if (key == "train.lr") cfg.lr = parse_double(val, key);
    else if (key == "train.batch") cfg.batch = static_cast<int>(parse_int(val, key));
    else if (key == "train.epochs_stage1") cfg.epochs_stage1 = static_cast<int>(parse_int(val, key));
    else if (key == "train.epochs_stage2") cfg.epochs_stage2 = static_cast<int>(parse_int(val, key));
    else if (key == "train.seed") cfg.seed = parse_u64(val, key);
    else if (key == "train.early_stop_ratio") cfg.early_stop_ratio = parse_double(val, key);
    else if (key == "data.root") cfg.root = val;
    else if (key == "data.split") cfg.split = val;
    else if (key == "data.dense_factor") cfg.dense_factor = static_cast<int>(parse_int(val, key));
    else if (key == "data.range_lo") cfg.range_lo = parse_double(val, key);
    else if (key == "data.range_hi") cfg.range_hi = parse_double(val, key);
    else if (key == "data.shuffle_seed") cfg.shuffle_seed = parse_u64(val, key);
    else if (key == "output.out_dir") cfg.out_dir = val;
    else if (key == "output.timings") cfg.timings = parse_bool(val, key);
    else
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unknown key '" + key + "'");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << render_config(cfg);
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace pcsm
