#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xmreg/geometry.hpp"

namespace xmreg {

// KITTI-velodyne-compatible binary cloud: little-endian float32 quadruplets
// (x, y, z, intensity). Intensity is min-max normalized to [0, 1] on load.
PointCloud4D read_cloud_bin(const std::string& path);
void write_cloud_bin(const std::string& path, const PointCloud4D& cloud);

// Portable float map, grayscale ("Pf"), little-endian, bottom-up row order.
void write_pfm(const std::string& path, const Grid& g);
Grid read_pfm(const std::string& path);

// 8-bit preview; values clamped to [lo, hi] and scaled to 0..255.
void write_pgm(const std::string& path, const Grid& g, double lo = 0.0, double hi = 1.0);

// Plain-text pose: one 3×4 row-major matrix, 12 whitespace-separated reals.
void write_pose_txt(const std::string& path, const RigidTransform& T);
RigidTransform read_pose_txt(const std::string& path);

// Named-tensor container backing the weight file format:
// magic "XMRW", version u32, tensor count u32; per tensor: name length u16,
// name bytes, rank u8, dims u32×rank, float32 payload; CRC32 trailer.
struct Tensor {
  std::vector<uint32_t> dims;
  std::vector<float> data;

  size_t numel() const {
    size_t n = 1;
    for (uint32_t d : dims) n *= d;
    return n;
  }
};

struct TensorFile {
  std::map<std::string, Tensor> tensors;

  bool has(const std::string& name) const { return tensors.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
};

void write_tensor_file(const std::string& path, const TensorFile& tf);
TensorFile read_tensor_file(const std::string& path);

// Plain-text key-value config ("key = value" or "key value"; '#' comments).
// Repeated keys accumulate in order (used for primitive lists).
struct KeyValueConfig {
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback = "") const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::vector<std::string> get_all(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
};

KeyValueConfig read_config(const std::string& path);

// Writes `content` to a temporary file in the target directory and renames it
// into place.
void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace xmreg
