#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "priorsplat/common.hpp"
#include "priorsplat/priors.hpp"

namespace priorsplat {

inline constexpr int kSplatParams = 13;

// Raw parameter layout shared by gradients and optimizer state.
enum ParamIndex : int {
  kCenter = 0,       // 3
  kRot = 3,          // 4, quaternion (w, x, y, z)
  kLogScale = 7,     // 2
  kOpacityLogit = 9, // 1
  kColorLogit = 10,  // 3
};

using SplatGrad = std::array<double, kSplatParams>;

// A 2D Gaussian disk. The rotation's columns are (t_u, t_v, n).
struct Splat {
  Vec3 center = Vec3::Zero();
  Vec4 rot = Vec4(1, 0, 0, 0);
  Vec2 log_scale = Vec2::Zero();
  double opacity_logit = 0;
  Vec3 color_logit = Vec3::Zero();

  double opacity() const { return sigmoid(opacity_logit); }
  Vec3 color() const {
    return Vec3(sigmoid(color_logit.x()), sigmoid(color_logit.y()), sigmoid(color_logit.z()));
  }
  Vec2 scale() const { return Vec2(std::exp(log_scale.x()), std::exp(log_scale.y())); }
  Mat3 rotation() const;

  SplatGrad pack() const;
  static Splat unpack(const SplatGrad& p);
};

struct SplatFrame {
  Vec3 t_u, t_v, n;
};

SplatFrame splat_frame(const Splat& s);

// Rotation matrix of the normalized quaternion (w, x, y, z).
Mat3 quaternion_to_matrix(const Vec4& q);
// Unit quaternion whose rotation maps +z onto n.
Vec4 quaternion_from_normal(const Vec3& n);

struct SplatSet {
  std::vector<Splat> splats;
  std::vector<SplatGrad> grads;
  // Densification statistics: summed screen-space gradient norms and the
  // number of views in which each splat was rendered.
  std::vector<double> screen_grad_sum;
  std::vector<int> screen_grad_count;

  size_t size() const { return splats.size(); }
  bool empty() const { return splats.empty(); }

  // Resizes every side buffer to match splats and zeroes them.
  void reset_buffers();
  void zero_grads();
  void reset_stats();
};

// One splat per cloud point; scales from the mean distance to the 3 nearest
// neighbors clamped to [1e-4, 0.1] * scene_extent.
SplatSet init_splats(const InitPointCloud& cloud, double scene_extent);

// Binary little-endian PLY holding the raw parameters as float64 plus a
// "comment iteration <n>" line.
void save_checkpoint(const std::filesystem::path& path, const SplatSet& set, int iteration);
SplatSet load_checkpoint(const std::filesystem::path& path, int* iteration = nullptr);

}  // namespace priorsplat
