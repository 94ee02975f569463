#include "priorsplat/extract.hpp"

#include <spdlog/spdlog.h>

#include <map>

#include "priorsplat/renderer.hpp"

namespace priorsplat {

TsdfVolume::TsdfVolume(const Vec3& origin_, double voxel_size_, std::array<int, 3> dims_, double truncation_)
    : origin(origin_), voxel_size(voxel_size_), truncation(truncation_ > 0 ? truncation_ : 4 * voxel_size_),
      dims(dims_) {
  if (!(voxel_size > 0)) throw ValidationError("voxel_size must be > 0");
  for (int d : dims) {
    if (d < 1) throw ValidationError("volume dims must be >= 1");
  }
  const size_t n = size_t(dims[0]) * dims[1] * dims[2];
  tsdf.assign(n, 1.0f);
  weight.assign(n, 0.0f);
  color.assign(n, Vec3::Zero());
}

TsdfVolume TsdfVolume::covering(const Aabb& box, double voxel_size, int pad) {
  if (!box.valid()) throw ValidationError("volume bounds are empty");
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    dims[a] = static_cast<int>(std::ceil(box.extent()[a] / voxel_size)) + 1 + 2 * pad;
  }
  return TsdfVolume(box.lo - Vec3::Constant(pad * voxel_size), voxel_size, dims);
}

void integrate(TsdfVolume& vol, const ScalarMap& depth, const ColorMap& color, const ScalarMap& alpha,
               const CameraView& view, int threads) {
  if (!depth.same_shape(view.width, view.height) || !color.same_shape(view.width, view.height) ||
      !alpha.same_shape(view.width, view.height)) {
    throw ValidationError("integrate: maps must match the view size");
  }
  const double tau = vol.truncation;
  const Mat3 r = view.rotation();
  const Vec3 t = view.translation();
  const size_t slab = size_t(vol.dims[0]) * vol.dims[1];
  parallel_for(vol.dims[2], resolve_threads(threads), [&](size_t kb, size_t ke) {
    for (size_t k = kb; k < ke; ++k) {
      for (int j = 0; j < vol.dims[1]; ++j) {
        for (int i = 0; i < vol.dims[0]; ++i) {
          const Vec3 pc = r * vol.voxel_center(i, j, int(k)) + t;
          if (pc.z() <= 1e-6) continue;
          const double u = view.fx * pc.x() / pc.z() + view.cx;
          const double v = view.fy * pc.y() / pc.z() + view.cy;
          if (!(u >= 0 && v >= 0 && u < view.width && v < view.height)) continue;
          const size_t p = depth.index(int(u), int(v));
          if (alpha[p] < 0.5 || !(depth[p] > 0)) continue;
          const double sdf = depth[p] - pc.z();
          if (sdf < -tau) continue;
          const double s = std::clamp(sdf / tau, -1.0, 1.0);
          const size_t idx = k * slab + size_t(j) * vol.dims[0] + i;
          const double w = vol.weight[idx];
          vol.tsdf[idx] = static_cast<float>((w * vol.tsdf[idx] + s) / (w + 1));
          vol.color[idx] = (w * vol.color[idx] + color[p]) / (w + 1);
          vol.weight[idx] = static_cast<float>(w + 1);
        }
      }
    }
  });
}

size_t boundary_edge_count(const TriangleMesh& mesh) {
  std::map<std::pair<int, int>, int> uses;
  for (const auto& f : mesh.faces) {
    for (int e = 0; e < 3; ++e) {
      const int a = f[e], b = f[(e + 1) % 3];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  size_t n = 0;
  for (const auto& [edge, count] : uses) n += count == 1;
  return n;
}

ExtractResult extract_mesh(const SplatSet& splats, const std::vector<CameraView>& views, const ExtractParams& params) {
  ExtractResult res;
  res.voxel_size = params.voxel_size > 0 ? params.voxel_size : params.scene_extent / 256.0;
  if (!(res.voxel_size > 0)) throw ValidationError("voxel size must be > 0");
  if (splats.size() == 0) return res;

  Aabb box;
  if (params.bounds) {
    box = *params.bounds;
  } else {
    for (const auto& s : splats.splats) {
      if (s.opacity() >= 0.05) box.grow(s.center);
    }
  }
  if (!box.valid()) return res;

  double voxel = res.voxel_size;
  auto count_for = [&](double vs) {
    const Vec3 e = box.extent() / vs;
    return (e.x() + 5) * (e.y() + 5) * (e.z() + 5);
  };
  while (count_for(voxel) > double(params.max_voxels)) voxel *= 1.25;
  if (voxel != res.voxel_size) {
    spdlog::warn("volume exceeds {} voxels; voxel size raised from {:.5f} to {:.5f}", params.max_voxels,
                 res.voxel_size, voxel);
    res.voxel_size = voxel;
  }
  TsdfVolume vol = TsdfVolume::covering(box, voxel);
  RenderOptions ropts;
  ropts.threads = params.threads;
  for (const auto& view : views) {
    const RenderOutput out = render(splats, view, ropts);
    integrate(vol, out.median_depth, out.color, out.alpha, view, params.threads);
  }
  res.mesh = marching_cubes(vol);
  res.boundary_edges = boundary_edge_count(res.mesh);
  return res;
}

}  // namespace priorsplat
