#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "priorsplat/camera.hpp"
#include "priorsplat/geometry.hpp"
#include "priorsplat/image.hpp"

namespace priorsplat {

enum class Preset { Open, Occluded, Sparse };

Preset parse_preset(const std::string& s);
const char* to_string(Preset p);

inline constexpr double kAmbient = 0.3;
inline constexpr int kSparseMaxViews = 11;

// Unit vector toward the light.
Vec3 light_direction();

struct SyntheticScene {
  Preset preset = Preset::Open;
  uint64_t seed = 0;
  TriangleMesh gt_mesh;    // detailed house with per-face albedo
  TriangleMesh lod2_mesh;  // planar envelope
  std::vector<TriangleMesh> occluders;
  std::vector<CameraView> views;
  std::vector<ColorMap> gt_images;
  std::vector<ScalarMap> gt_depths;
  PointCloud gt_cloud;
  PointCloud sfm_cloud;  // noisy visible-surface samples, occluders included
};

struct SynthParams {
  Preset preset = Preset::Open;
  int n_views = 16;
  int width = 128;
  int height = 96;
  uint64_t seed = 0;
  size_t gt_cloud_points = 50000;
  size_t sfm_points = 6000;
  int threads = 1;
};

// Detailed house: 2 x 2 footprint, walls 1.5 high, gable roof rising 1.0,
// door and windows recessed 0.05. z is up.
TriangleMesh make_house(uint64_t seed);
TriangleMesh make_lod2_house();
std::vector<TriangleMesh> make_occluders(Preset preset, uint64_t seed);
std::vector<CameraView> make_camera_ring(int n_views, int width, int height);

struct GtRender {
  ColorMap color;
  ScalarMap depth;  // camera z, 0 for background
};

// Closest hit; color = albedo * (max(0, n.l) + ambient) clamped, black
// background.
GtRender render_gt(const BvhIndex& scene, const CameraView& view, int threads = 1);
GtRender render_gt(const std::vector<TriangleMesh>& meshes, const CameraView& view, int threads = 1);

// Fraction of house-hit pixels whose first hit is an occluder.
double occlusion_fraction(const SyntheticScene& scene, const CameraView& view);

SyntheticScene generate_scene(const SynthParams& params);

void write_scene(const std::filesystem::path& dir, const SyntheticScene& scene);

// Scene directory contents as consumed by the pipeline commands.
struct SceneFiles {
  std::vector<CameraView> views;
  std::vector<ColorMap> images;
  TriangleMesh lod2_mesh;
  PointCloud gt_cloud;
  std::filesystem::path sfm_path;
};

SceneFiles read_scene(const std::filesystem::path& dir);

}  // namespace priorsplat
