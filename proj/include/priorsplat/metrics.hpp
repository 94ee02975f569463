#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "priorsplat/geometry.hpp"
#include "priorsplat/image.hpp"

namespace priorsplat {

inline constexpr double kPsnrCap = 99.0;

double psnr(const ColorMap& a, const ColorMap& b);

// 0.299 R + 0.587 G + 0.114 B
ScalarMap to_gray(const ColorMap& image);

// Mean local SSIM over fully contained 11x11 Gaussian windows (sigma 1.5) of
// the grayscale images.
double ssim(const ColorMap& a, const ColorMap& b);
double ssim_gray(const ScalarMap& a, const ScalarMap& b);

// Euclidean nearest-neighbor distance from every query to the target cloud.
std::vector<double> nn_distances(const std::vector<Vec3>& queries, const std::vector<Vec3>& target,
                                 int threads = 1);

double chamfer(const PointCloud& a, const PointCloud& b, int threads = 1);

struct M3c2Params {
  double normal_scale = 0.25;
  double projection_scale = 0.25;
  double max_depth = 1.25;
  size_t core_count = 5000;
  uint64_t seed = 0;
  int min_points = 5;
};

struct M3c2Result {
  double mean_abs = 0;
  double mean_signed = 0;
  double valid_fraction = 0;
  size_t valid_cores = 0;
};

M3c2Result m3c2(const PointCloud& reference, const PointCloud& compared, const M3c2Params& params, int threads = 1);

// Fraction of reference points whose nearest recon point is closer than t.
std::vector<double> completeness(const PointCloud& reference, const PointCloud& recon,
                                 const std::vector<double>& thresholds, int threads = 1);

// Occupied-voxel recall on a grid anchored at the reference bounding-box min.
double voc(const PointCloud& reference, const PointCloud& recon, double voxel_size, int min_points = 1);

struct MetricReport {
  std::optional<double> psnr;
  std::optional<double> ssim;
  double cd = 0;
  double m3c2_mean_abs = 0;
  double m3c2_mean_signed = 0;
  double m3c2_valid_fraction = 0;
  std::map<double, double> completeness_at;
  double voc = 0;
  size_t recon_points = 0;
  size_t reference_points = 0;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
  static std::string csv_header();
  std::string csv_row(const std::string& label) const;
};

struct EvalParams {
  std::vector<double> thresholds{0.05, 0.1, 0.2};
  double voc_voxel = 0.05;
  int voc_min_points = 1;
  M3c2Params m3c2;
  size_t mesh_samples = 50000;
  uint64_t seed = 0;
  int threads = 1;
};

// Mesh inputs are sampled to clouds with sample_surface first.
PointCloud cloud_from_mesh(const TriangleMesh& mesh, size_t samples, uint64_t seed);

// Image pairs are optional; PSNR and SSIM are averaged over them.
MetricReport evaluate(const PointCloud& recon, const PointCloud& reference,
                      const std::vector<std::pair<ColorMap, ColorMap>>& images, const EvalParams& params);

}  // namespace priorsplat
