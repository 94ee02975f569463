#pragma once

#include <optional>
#include <vector>

#include "priorsplat/camera.hpp"
#include "priorsplat/image.hpp"
#include "priorsplat/splats.hpp"

namespace priorsplat {

inline constexpr double kAlphaCutoff = 1.0 / 255.0;
inline constexpr double kTransmittanceFloor = 1e-4;
inline constexpr double kMinFootprintPx = 0.7;
// Splats whose center is closer to the image plane than this are skipped.
inline constexpr double kSplatNearPlane = 1e-3;

struct SplatHit {
  double u = 0;
  double v = 0;
  double t = 0;  // distance along the ray
};

// Intersects the ray with the splat plane and returns local coordinates in
// units of the splat's (unclamped) scales.
std::optional<SplatHit> ray_splat_intersect(const Ray& ray, const Splat& s);

inline double gaussian_weight(double u, double v) { return std::exp(-0.5 * (u * u + v * v)); }

// One ray/splat contribution.
struct Fragment {
  int splat = -1;
  int pixel = -1;
  double z = 0;      // camera depth of the intersection
  double u = 0, v = 0;
  double g = 0;      // Gaussian weight
  double alpha = 0;  // opacity * g
  double T = 0;      // transmittance in front of this fragment
  double omega = 0;  // alpha * T, zero when not composited
  bool composited = false;
};

struct RenderOutput {
  int width = 0;
  int height = 0;
  ColorMap color;
  ScalarMap alpha;
  ScalarMap mean_depth;
  ScalarMap median_depth;
  ColorMap normal;      // normalized where alpha > 1e-3, zero elsewhere
  ColorMap normal_sum;  // sum of omega * n (world, flipped toward the camera)
  ScalarMap depth_sum;  // sum of omega * z

  // Training data. Fragments are grouped by splat (splat_offsets) in
  // generation order; pixel_fragments lists composited fragments per pixel in
  // compositing order (pixel_offsets).
  bool has_fragments = false;
  std::vector<Fragment> fragments;
  std::vector<size_t> splat_offsets;
  std::vector<size_t> pixel_offsets;
  std::vector<size_t> pixel_fragments;

  size_t fragment_count(size_t pixel) const { return pixel_offsets[pixel + 1] - pixel_offsets[pixel]; }
};

struct RenderOptions {
  bool with_fragments = false;
  int threads = 1;
};

RenderOutput render(const SplatSet& set, const CameraView& view, const RenderOptions& opts = {});

// Adjoints of the loss with respect to the rendered maps. Empty maps are
// treated as zero. frag_omega / frag_z are indexed like RenderOutput
// fragments and hold direct per-fragment terms (e.g. depth distortion).
struct MapAdjoints {
  ColorMap color;
  ScalarMap alpha;
  ScalarMap mean_depth;
  ColorMap normal_sum;
  std::vector<double> frag_omega;
  std::vector<double> frag_z;

  static MapAdjoints zeros(int width, int height, size_t fragments);
};

// Accumulates dL/dparams into grads (resized to the splat count when
// smaller). When screen_grad is given, it receives per-splat gradients with
// respect to the projected center in normalized device coordinates.
void backward(const SplatSet& set, const CameraView& view, const RenderOutput& out,
              const MapAdjoints& adj, std::vector<SplatGrad>& grads,
              std::vector<Vec2>* screen_grad = nullptr, int threads = 1);

}  // namespace priorsplat
