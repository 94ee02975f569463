#pragma once

#include <array>
#include <optional>
#include <vector>

#include "priorsplat/camera.hpp"
#include "priorsplat/geometry.hpp"
#include "priorsplat/image.hpp"
#include "priorsplat/splats.hpp"

namespace priorsplat {

struct TsdfVolume {
  Vec3 origin = Vec3::Zero();  // center of voxel (0, 0, 0)
  double voxel_size = 0;
  double truncation = 0;
  std::array<int, 3> dims{0, 0, 0};
  std::vector<float> tsdf;    // initialized to +1
  std::vector<float> weight;  // initialized to 0
  std::vector<Vec3> color;

  TsdfVolume() = default;
  // Truncation defaults to 4 voxels.
  TsdfVolume(const Vec3& origin, double voxel_size, std::array<int, 3> dims, double truncation = 0);
  // Grid covering the box with `pad` extra voxels on every side.
  static TsdfVolume covering(const Aabb& box, double voxel_size, int pad = 2);

  size_t size() const { return tsdf.size(); }
  size_t index(int i, int j, int k) const { return (size_t(k) * dims[1] + j) * dims[0] + i; }
  Vec3 voxel_center(int i, int j, int k) const { return origin + voxel_size * Vec3(i, j, k); }
};

// Fuses one depth map. Pixels count when alpha >= 0.5 and depth > 0.
void integrate(TsdfVolume& volume, const ScalarMap& depth, const ColorMap& color, const ScalarMap& alpha,
               const CameraView& view, int threads = 1);

// Iso-level 0 surface with triangles facing increasing tsdf. Only cubes whose
// eight corners carry weight emit geometry.
TriangleMesh marching_cubes(const TsdfVolume& volume);

// Edges used by exactly one face.
size_t boundary_edge_count(const TriangleMesh& mesh);

struct ExtractParams {
  double voxel_size = 0;  // 0: scene_extent / 256
  double scene_extent = 1.0;
  std::optional<Aabb> bounds;  // default: centers of splats with opacity >= 0.05
  size_t max_voxels = size_t(1) << 24;
  int threads = 1;
};

struct ExtractResult {
  TriangleMesh mesh;
  double voxel_size = 0;
  size_t boundary_edges = 0;
};

// Renders median depth for every view, fuses them in input order and runs
// marching cubes.
ExtractResult extract_mesh(const SplatSet& splats, const std::vector<CameraView>& views,
                           const ExtractParams& params);

}  // namespace priorsplat
