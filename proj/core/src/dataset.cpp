#include "pcsm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pcsm {

namespace {

// Token stream over a text file that remembers line numbers for error
// messages. '#' starts a comment running to end of line.
class TokenReader {
 public:
  TokenReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  bool next(std::string& tok) {
    while (pos_ >= tokens_.size()) {
      std::string raw;
      if (!std::getline(in_, raw)) return false;
      ++line_;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      tokens_.clear();
      pos_ = 0;
      std::istringstream ss(raw);
      std::string t;
      while (ss >> t) tokens_.push_back(t);
    }
    tok = tokens_[pos_++];
    return true;
  }

  void push_back(const std::string& tok) {
    tokens_.insert(tokens_.begin() + pos_, tok);
  }

  void skip_line() { pos_ = tokens_.size(); }

  std::string require(const char* what) {
    std::string tok;
    if (!next(tok)) fail(std::string("unexpected end of file, expected ") + what);
    return tok;
  }

  long require_int(const char* what) {
    const std::string tok = require(what);
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) fail("expected integer " + std::string(what) + ", got '" + tok + "'");
    return v;
  }

  double require_float(const char* what) {
    const std::string tok = require(what);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) fail("expected number " + std::string(what) + ", got '" + tok + "'");
    return v;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw std::runtime_error(path_ + ":" + std::to_string(line_) + ": " + msg);
  }

 private:
  std::istream& in_;
  std::string path_;
  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
  int line_ = 0;
};

}  // namespace

RawModel load_off(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  TokenReader tr(in, path);

  std::string head = tr.require("OFF header");
  if (head.rfind("OFF", 0) != 0) tr.fail("missing OFF header, got '" + head + "'");
  if (head.size() > 3) tr.push_back(head.substr(3));  // "OFF123" glued variant

  const long nv = tr.require_int("vertex count");
  const long nf = tr.require_int("face count");
  tr.require_int("edge count");
  if (nv < 1) tr.fail("vertex count must be at least 1");

  RawModel model;
  model.vertices.reserve(nv);
  for (long i = 0; i < nv; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = tr.require_float("vertex coordinate");
    model.vertices.push_back(p);
  }
  model.faces.reserve(nf);
  for (long i = 0; i < nf; ++i) {
    const long arity = tr.require_int("face vertex count");
    if (arity != 3) tr.fail("only triangular faces are supported, got arity " +
                            std::to_string(arity));
    std::array<int, 3> f;
    for (int a = 0; a < 3; ++a) {
      const long idx = tr.require_int("face index");
      if (idx < 0 || idx >= nv)
        tr.fail("face index " + std::to_string(idx) + " out of range for " +
                std::to_string(nv) + " vertices");
      f[a] = static_cast<int>(idx);
    }
    model.faces.push_back(f);
  }
  return model;
}

PointCloud mesh_to_cloud(const RawModel& model, int n_surface, Rng& rng) {
  if (n_surface < 1) throw std::invalid_argument("mesh_to_cloud: need a positive sample count");

  if (model.faces.empty()) {
    const int nv = static_cast<int>(model.vertices.size());
    if (nv < n_surface)
      throw std::invalid_argument("mesh_to_cloud: faceless model has " + std::to_string(nv) +
                                  " vertices, need " + std::to_string(n_surface));
    PointCloud out;
    if (nv == n_surface) {
      out.points = model.vertices;
      return out;
    }
    std::vector<int> order(nv);
    std::iota(order.begin(), order.end(), 0);
    for (int i = nv - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
    out.points.reserve(n_surface);
    for (int i = 0; i < n_surface; ++i) out.points.push_back(model.vertices[order[i]]);
    return out;
  }

  std::vector<double> cum(model.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < model.faces.size(); ++f) {
    const Vec3& a = model.vertices[model.faces[f][0]];
    const Vec3& b = model.vertices[model.faces[f][1]];
    const Vec3& c = model.vertices[model.faces[f][2]];
    const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
    const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
    const double cx = uy * vz - uz * vy;
    const double cy = uz * vx - ux * vz;
    const double cz = ux * vy - uy * vx;
    total += 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
    cum[f] = total;
  }
  if (total <= 0.0) throw std::invalid_argument("mesh_to_cloud: mesh has zero surface area");

  PointCloud out;
  out.points.reserve(n_surface);
  for (int i = 0; i < n_surface; ++i) {
    const double pick = rng.uniform() * total;
    const std::size_t f =
        std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin();
    const std::size_t fi = std::min(f, model.faces.size() - 1);
    const Vec3& a = model.vertices[model.faces[fi][0]];
    const Vec3& b = model.vertices[model.faces[fi][1]];
    const Vec3& c = model.vertices[model.faces[fi][2]];
    double u = rng.uniform(), v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    out.points.push_back({a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]),
                          a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]),
                          a[2] + u * (b[2] - a[2]) + v * (c[2] - a[2])});
  }
  return out;
}

PointCloud normalize_cloud(const PointCloud& cloud, double lo, double hi) {
  if (cloud.points.empty()) throw std::invalid_argument("normalize_cloud: empty cloud");
  if (!(hi > lo)) throw std::invalid_argument("normalize_cloud: need hi > lo");

  Vec3 bmin = cloud.points[0], bmax = cloud.points[0];
  for (const Vec3& p : cloud.points)
    for (int a = 0; a < 3; ++a) {
      bmin[a] = std::min(bmin[a], p[a]);
      bmax[a] = std::max(bmax[a], p[a]);
    }
  const double ext = std::max({bmax[0] - bmin[0], bmax[1] - bmin[1], bmax[2] - bmin[2]});
  if (ext <= 0.0) throw std::invalid_argument("normalize_cloud: cloud has zero extent");

  const double scale = (hi - lo) / ext;
  Vec3 offset;
  for (int a = 0; a < 3; ++a)
    offset[a] = lo + 0.5 * ((hi - lo) - (bmax[a] - bmin[a]) * scale);

  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points)
    out.points.push_back({offset[0] + (p[0] - bmin[0]) * scale,
                          offset[1] + (p[1] - bmin[1]) * scale,
                          offset[2] + (p[2] - bmin[2]) * scale});
  return out;
}

void write_ply(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << cloud.points.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "end_header\n";
  out.precision(17);
  for (const Vec3& p : cloud.points) out << p[0] << " " << p[1] << " " << p[2] << "\n";
  if (!out) throw std::runtime_error("write failed for " + path);
}

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  TokenReader tr(in, path);

  if (tr.require("ply magic") != "ply") tr.fail("not a PLY file");
  long count = -1;
  int props = 0;
  bool in_vertex = false;
  for (;;) {
    const std::string tok = tr.require("header keyword");
    if (tok == "end_header") break;
    if (tok == "format") {
      if (tr.require("format name") != "ascii") tr.fail("only ascii PLY is supported");
      tr.require("format version");
    } else if (tok == "comment") {
      tr.skip_line();
    } else if (tok == "element") {
      const std::string name = tr.require("element name");
      const long n = tr.require_int("element count");
      in_vertex = (name == "vertex");
      if (in_vertex) count = n;
    } else if (tok == "property") {
      const std::string type = tr.require("property type");
      if (type == "list") {
        tr.require("list count type");
        tr.require("list value type");
      }
      tr.require("property name");
      if (in_vertex) ++props;
    } else {
      tr.fail("unexpected header keyword '" + tok + "'");
    }
  }
  if (count < 1) tr.fail("missing vertex element");
  if (props < 3) tr.fail("vertex element needs x y z properties");

  PointCloud out;
  out.points.reserve(count);
  for (long i = 0; i < count; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = tr.require_float("vertex coordinate");
    for (int a = 3; a < props; ++a) tr.require("vertex property");
    out.points.push_back(p);
  }
  return out;
}

}  // namespace pcsm
