#include "xmreg/io.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace xmreg {

namespace {

std::ifstream open_in(const std::string& path, std::ios::openmode mode) {
  std::ifstream f(path, mode);
  if (!f) throw IoError("cannot open for reading: " + path);
  return f;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
  std::ofstream f(path, mode);
  if (!f) throw IoError("cannot open for writing: " + path);
  return f;
}

}  // namespace

PointCloud4D read_cloud_bin(const std::string& path) {
  auto f = open_in(path, std::ios::binary);
  f.seekg(0, std::ios::end);
  const auto bytes = static_cast<size_t>(f.tellg());
  f.seekg(0);
  if (bytes % 16 != 0) throw IoError("cloud file size not a multiple of 16: " + path);
  const size_t n = bytes / 16;
  std::vector<float> raw(n * 4);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (!f) throw IoError("short read: " + path);

  PointCloud4D cloud;
  cloud.points.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    LidarPoint p{raw[4 * i], raw[4 * i + 1], raw[4 * i + 2], raw[4 * i + 3]};
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw IoError("non-finite coordinate in cloud: " + path);
    }
    cloud.points.push_back(p);
  }
  cloud.normalize_intensity();
  return cloud;
}

void write_cloud_bin(const std::string& path, const PointCloud4D& cloud) {
  auto f = open_out(path, std::ios::binary);
  std::vector<float> raw;
  raw.reserve(cloud.points.size() * 4);
  for (const auto& p : cloud.points) {
    raw.push_back(static_cast<float>(p.x));
    raw.push_back(static_cast<float>(p.y));
    raw.push_back(static_cast<float>(p.z));
    raw.push_back(static_cast<float>(p.intensity));
  }
  f.write(reinterpret_cast<const char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
}

void write_pfm(const std::string& path, const Grid& g) {
  auto f = open_out(path, std::ios::binary);
  const int h = static_cast<int>(g.rows());
  const int w = static_cast<int>(g.cols());
  f << "Pf\n" << w << " " << h << "\n-1.0\n";
  std::vector<float> row(w);
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) row[x] = static_cast<float>(g(y, x));
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

Grid read_pfm(const std::string& path) {
  auto f = open_in(path, std::ios::binary);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0;
  f >> magic >> w >> h >> scale;
  if (magic != "Pf" || w <= 0 || h <= 0) throw IoError("not a grayscale PFM: " + path);
  if (scale >= 0) throw IoError("big-endian PFM unsupported: " + path);
  f.get();  // single whitespace after the scale
  Grid g(h, w);
  std::vector<float> row(w);
  for (int y = h - 1; y >= 0; --y) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!f) throw IoError("short PFM read: " + path);
    for (int x = 0; x < w; ++x) g(y, x) = row[x];
  }
  return g;
}

void write_pgm(const std::string& path, const Grid& g, double lo, double hi) {
  auto f = open_out(path, std::ios::binary);
  const int h = static_cast<int>(g.rows());
  const int w = static_cast<int>(g.cols());
  f << "P5\n" << w << " " << h << "\n255\n";
  const double range = hi > lo ? hi - lo : 1.0;
  std::vector<unsigned char> row(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = (g(y, x) - lo) / range;
      v = std::clamp(v, 0.0, 1.0);
      row[x] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    f.write(reinterpret_cast<const char*>(row.data()), w);
  }
}

void write_pose_txt(const std::string& path, const RigidTransform& T) {
  std::ostringstream ss;
  ss.precision(17);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) ss << T.rotation(r, c) << " ";
    ss << T.translation(r) << (r == 2 ? "\n" : " ");
  }
  atomic_write_text(path, ss.str());
}

RigidTransform read_pose_txt(const std::string& path) {
  auto f = open_in(path, std::ios::in);
  double v[12];
  for (double& x : v) {
    if (!(f >> x)) throw IoError("pose file needs 12 reals: " + path);
  }
  RigidTransform T;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) T.rotation(r, c) = v[4 * r + c];
    T.translation(r) = v[4 * r + 3];
  }
  return T;
}

const Tensor& TensorFile::get(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw WeightShapeMismatch("missing tensor: " + name);
  return it->second;
}

namespace {

constexpr char kMagic[4] = {'X', 'M', 'R', 'W'};
constexpr uint32_t kVersion = 1;

void append(std::string& buf, const void* p, size_t n) {
  buf.append(reinterpret_cast<const char*>(p), n);
}

}  // namespace

void write_tensor_file(const std::string& path, const TensorFile& tf) {
  std::string buf;
  append(buf, kMagic, 4);
  append(buf, &kVersion, 4);
  const uint32_t count = static_cast<uint32_t>(tf.tensors.size());
  append(buf, &count, 4);
  for (const auto& [name, t] : tf.tensors) {
    const uint16_t nlen = static_cast<uint16_t>(name.size());
    append(buf, &nlen, 2);
    buf.append(name);
    const uint8_t rank = static_cast<uint8_t>(t.dims.size());
    append(buf, &rank, 1);
    append(buf, t.dims.data(), t.dims.size() * 4);
    if (t.data.size() != t.numel()) {
      throw WeightShapeMismatch("tensor payload size mismatch: " + name);
    }
    append(buf, t.data.data(), t.data.size() * 4);
  }
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
  append(buf, &crc, 4);

  auto f = open_out(path, std::ios::binary);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

TensorFile read_tensor_file(const std::string& path) {
  auto f = open_in(path, std::ios::binary);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw IoError("not a weight file: " + path);
  }
  const size_t body = buf.size() - 4;
  uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + body, 4);
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(body)));
  if (crc != stored_crc) throw IoError("weight file checksum mismatch: " + path);

  size_t off = 4;
  auto take = [&](void* p, size_t n) {
    if (off + n > body) throw IoError("truncated weight file: " + path);
    std::memcpy(p, buf.data() + off, n);
    off += n;
  };
  uint32_t version = 0, count = 0;
  take(&version, 4);
  if (version != kVersion) throw IoError("unsupported weight file version: " + path);
  take(&count, 4);

  TensorFile tf;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t nlen = 0;
    take(&nlen, 2);
    std::string name(nlen, '\0');
    take(name.data(), nlen);
    uint8_t rank = 0;
    take(&rank, 1);
    Tensor t;
    t.dims.resize(rank);
    take(t.dims.data(), rank * 4);
    t.data.resize(t.numel());
    take(t.data.data(), t.numel() * 4);
    tf.tensors.emplace(std::move(name), std::move(t));
  }
  return tf;
}

bool KeyValueConfig::has(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return true;
  }
  return false;
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return v;
  }
  return fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  return std::stod(get(key));
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  return std::stoi(get(key));
}

std::vector<std::string> KeyValueConfig::get_all(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries) {
    if (k == key) out.push_back(v);
  }
  return out;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

KeyValueConfig read_config(const std::string& path) {
  auto f = open_in(path, std::ios::in);
  KeyValueConfig cfg;
  std::string line;
  while (std::getline(f, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    std::string rest;
    std::getline(ss, rest);
    // optional '=' separator
    size_t i = rest.find_first_not_of(" \t");
    if (i != std::string::npos && rest[i] == '=') i = rest.find_first_not_of(" \t", i + 1);
    std::string value = i == std::string::npos ? "" : rest.substr(i);
    while (!value.empty() && (value.back() == ' ' || value.back() == '\t' || value.back() == '\r')) {
      value.pop_back();
    }
    cfg.entries.emplace_back(key, value);
  }
  return cfg;
}

void atomic_write_text(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    auto f = open_out(tmp.string(), std::ios::binary);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  fs::rename(tmp, target);
}

}  // namespace xmreg
