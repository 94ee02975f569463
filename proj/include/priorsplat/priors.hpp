#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "priorsplat/camera.hpp"
#include "priorsplat/geometry.hpp"
#include "priorsplat/image.hpp"

namespace priorsplat {

// Per-view geometric priors raycast from the building mesh. Depth is
// camera-frame z; normals are unit world-space front-facing face normals.
// mask = 1 exactly where depth > 0 and the normal is unit length.
struct PriorBundle {
  std::string view_id;
  ScalarMap depth;
  ColorMap normal;
  MaskMap mask;

  size_t masked_count() const;
};

PriorBundle raycast_priors(const BvhIndex& index, const CameraView& view, int threads = 1);
// Empty meshes produce an all-invalid bundle.
PriorBundle raycast_priors(const TriangleMesh& mesh, const CameraView& view, int threads = 1);

// Euclidean distance from the camera center.
double expected_depth(const Vec3& p, const CameraView& view);

// True iff p projects into the image and the first mesh hit along the ray
// from the camera center toward p lies within eps of p's expected depth.
bool is_visible(const Vec3& p, const CameraView& view, const BvhIndex& index, double eps);

struct Observation {
  int view = 0;  // index into the view list
  double u = 0;
  double v = 0;
};

struct InitPointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<Vec3> colors;
  std::vector<std::vector<Observation>> observations;

  size_t size() const { return points.size(); }
};

struct InitCloudParams {
  size_t n_samples = 20000;
  double eps = 0.05;
  int k = 2;
  uint64_t seed = 0;
  int threads = 1;
};

// Samples the mesh surface and keeps points visible in at least k views.
// Throws EmptyResultError when nothing survives.
InitPointCloud build_init_cloud(const TriangleMesh& mesh, const std::vector<CameraView>& views,
                                const InitCloudParams& params);

// Wraps a plain point cloud (e.g. an SfM reconstruction) as an init cloud.
// Missing normals are estimated by PCA over the nearest neighbors; missing
// colors default to mid-gray.
InitPointCloud init_cloud_from_points(const PointCloud& cloud, int neighbors = 8);

// Writes depth_<id>.pfm, normal_<id>.pfm and mask_<id>.png into dir.
void write_prior_bundle(const std::filesystem::path& dir, const PriorBundle& bundle);
PriorBundle read_prior_bundle(const std::filesystem::path& dir, const std::string& view_id);

// PLY (x,y,z,nx,ny,nz,red,green,blue) plus JSON-lines observations
// {point_index, view_id, u, v}.
void write_init_cloud(const std::filesystem::path& ply_path, const std::filesystem::path& obs_path,
                      const InitPointCloud& cloud, const std::vector<CameraView>& views);
InitPointCloud read_init_cloud(const std::filesystem::path& ply_path,
                               const std::filesystem::path& obs_path,
                               const std::vector<CameraView>& views);

}  // namespace priorsplat
