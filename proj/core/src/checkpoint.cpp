#include "pcsm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace pcsm {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class ByteReader {
 public:
  ByteReader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

  std::string take(std::size_t n, const char* what) {
    if (pos_ + n > data_.size())
      throw std::runtime_error(path_ + ": truncated file while reading " + std::string(what));
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t take_u32(const char* what) {
    const std::string b = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
    return v;
  }

  std::uint64_t take_u64(const char* what) {
    const std::string b = take(8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
    return v;
  }

  double take_f64(const char* what) { return std::bit_cast<double>(take_u64(what)); }

  bool done() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json manifest;
  manifest["stage"] = ckpt.stage;
  manifest["rng_state"] = ckpt.rng_state;
  manifest["hyper"] = ckpt.hyper;
  auto& blobs = manifest["blobs"] = nlohmann::json::array();
  for (const auto& [name, blob] : ckpt.blobs) {
    std::size_t count = 1;
    for (int d : blob.shape) count *= static_cast<std::size_t>(d);
    if (count != blob.values.size())
      throw std::invalid_argument("checkpoint blob '" + name + "' shape/value mismatch");
    blobs.push_back({{"name", name}, {"shape", blob.shape}});
  }
  const std::string mtext = manifest.dump();

  std::string out;
  out += "PCSM";
  put_u32(out, Checkpoint::kVersion);
  put_u64(out, mtext.size());
  out += mtext;
  for (const auto& [name, blob] : ckpt.blobs)
    for (double v : blob.values) put_f64(out, v);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  ByteReader r(data, path);

  if (r.take(4, "magic") != "PCSM") throw std::runtime_error(path + ": not a checkpoint file");
  const std::uint32_t version = r.take_u32("version");
  if (version != Checkpoint::kVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));

  const std::uint64_t mlen = r.take_u64("manifest length");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(r.take(mlen, "manifest"));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": bad manifest: " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.stage = manifest.at("stage").get<std::string>();
    ckpt.rng_state = manifest.at("rng_state").get<std::string>();
    ckpt.hyper = manifest.at("hyper").get<std::map<std::string, std::string>>();
    for (const auto& entry : manifest.at("blobs")) {
      ParamBlob blob;
      blob.shape = entry.at("shape").get<Shape>();
      std::size_t count = 1;
      for (int d : blob.shape) count *= static_cast<std::size_t>(d);
      blob.values.resize(count);
      for (std::size_t i = 0; i < count; ++i) blob.values[i] = r.take_f64("blob values");
      ckpt.blobs.emplace(entry.at("name").get<std::string>(), std::move(blob));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": bad manifest: " + e.what());
  }
  if (!r.done()) throw std::runtime_error(path + ": trailing bytes after blobs");
  return ckpt;
}

}  // namespace pcsm
