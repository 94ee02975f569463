#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "priorsplat/camera.hpp"
#include "priorsplat/image.hpp"
#include "priorsplat/priors.hpp"
#include "priorsplat/renderer.hpp"

namespace priorsplat {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Normalized 1-D Gaussian taps of length params.window.
std::vector<double> gaussian_window(const SsimParams& params = {});

struct PhotometricResult {
  double loss = 0;
  double l1 = 0;
  double ssim = 0;
  ColorMap grad;  // dL/d(rendered)
};

// 0.8 * L1 + 0.2 * (1 - SSIM) over the valid pixels. SSIM is computed per
// channel on the masked images with border-renormalized Gaussian windows.
PhotometricResult photometric_loss(const ColorMap& rendered, const ColorMap& target, const MaskMap& valid,
                                   const SsimParams& params = {});

// Sum over pairs of w_i w_j |z_i - z_j| for one ray; O(n log n) for unsorted
// input, O(n) when already sorted by z.
double distortion_single_ray(std::vector<std::pair<double, double>> z_w);

struct FragmentLossResult {
  double loss = 0;
  size_t rays = 0;
  std::vector<double> grad_omega;  // indexed like RenderOutput::fragments
  std::vector<double> grad_z;
};

// Depth distortion averaged over region rays with at least one fragment.
FragmentLossResult depth_distortion_loss(const RenderOutput& out, const MaskMap& region);

struct MapLossResult {
  double loss = 0;
  size_t pixels = 0;
  bool empty = false;
  ScalarMap grad_alpha;
  ScalarMap grad_depth;
  ColorMap grad_normal;
};

// Camera-frame normals of the back-projected depth map via central
// differences (one-sided at borders); valid where the stencil depths are
// positive and inside the region.
ColorMap depth_normals(const ScalarMap& depth, const CameraView& view, const MaskMap& region,
                       MaskMap* valid = nullptr);

// Mean over valid region rays of sum_i w_i (1 - n_i . N(x)) where N is the
// depth-gradient normal taken to world space.
MapLossResult normal_consistency_loss(const RenderOutput& out, const CameraView& view, const MaskMap& region);

// Scale-aligned L1 between rendered mean depth and the prior depth on the
// prior mask. The median-ratio scale is treated as a constant; fixed_scale
// replaces it when given.
MapLossResult prior_depth_loss(const ScalarMap& rendered_depth, const PriorBundle& prior,
                               std::optional<double> fixed_scale = std::nullopt, double* scale_out = nullptr);

// Mean of 1 - <N_hat, N> on the prior mask. rendered_normal may be
// unnormalized; unrendered masked pixels contribute 1.
MapLossResult prior_normal_loss(const ColorMap& rendered_normal, const PriorBundle& prior);

struct LossWeights {
  double lambda_d = 0;
  double lambda_n = 0;
  double lambda_db = 0;
  double lambda_nb = 0;
};

struct LossComponents {
  double l_c = 0;
  double l_d = 0;
  double l_n = 0;
  double l_db = 0;
  double l_nb = 0;
};

// Throws ValidationError naming the first non-finite component.
double total_loss(const LossComponents& c, const LossWeights& w);

struct WeightRamp {
  double start = 0;
  double end = 0;
  int activation_iter = 0;  // zero before this iteration
  int decay_from = -1;      // linear start -> end from here to total; -1 keeps start
};

struct Schedule {
  int total_iters = 2000;
  int phase1_end = 1000;
  WeightRamp lambda_d;
  WeightRamp lambda_n;
  WeightRamp lambda_db;
  WeightRamp lambda_nb;

  // Two-phase defaults for the given run length.
  static Schedule defaults(int total_iters);
  void validate() const;
};

LossWeights weights_at(const Schedule& schedule, int iter);

}  // namespace priorsplat
