#include <gtest/gtest.h>

#include "priorsplat/extract.hpp"
#include "priorsplat/priors.hpp"
#include "support.hpp"

using namespace priorsplat;
namespace pt = priorsplat::testing;

namespace {

template <typename Sdf>
TsdfVolume analytic_volume(const Vec3& lo, const Vec3& hi, double voxel, Sdf sdf) {
  const Vec3 ext = (hi - lo) / voxel;
  TsdfVolume vol(lo, voxel, {int(ext.x()) + 1, int(ext.y()) + 1, int(ext.z()) + 1});
  for (int k = 0; k < vol.dims[2]; ++k) {
    for (int j = 0; j < vol.dims[1]; ++j) {
      for (int i = 0; i < vol.dims[0]; ++i) {
        const size_t idx = vol.index(i, j, k);
        vol.tsdf[idx] = static_cast<float>(std::clamp(sdf(vol.voxel_center(i, j, k)) / vol.truncation, -1.0, 1.0));
        vol.weight[idx] = 1;
      }
    }
  }
  return vol;
}

void expect_clean(const TriangleMesh& m) {
  for (const auto& v : m.vertices) ASSERT_TRUE(v.allFinite());
  for (size_t f = 0; f < m.faces.size(); ++f) ASSERT_GT(m.face_area(f), 1e-14);
}

CameraView front_view(int w, int h, double f) {
  CameraView v = pt::identity_view(w, h, f);
  v.id = "front";
  return v;
}

}  // namespace

TEST(MarchingCubes, SphereOracle) {
  const double r = 0.4, voxel = 0.02;
  const auto vol = analytic_volume(Vec3::Constant(-0.5), Vec3::Constant(0.5), voxel,
                                   [&](const Vec3& p) { return p.norm() - r; });
  const auto mesh = marching_cubes(vol);
  ASSERT_GT(mesh.faces.size(), 1000u);
  expect_clean(mesh);
  for (const auto& v : mesh.vertices) {
    EXPECT_GE(v.norm(), r - voxel);
    EXPECT_LE(v.norm(), r + voxel);
  }
  EXPECT_NEAR(mesh.surface_area(), 4 * M_PI * r * r, 0.05 * 4 * M_PI * r * r);
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const Vec3 c = (mesh.vertices[mesh.faces[f][0]] + mesh.vertices[mesh.faces[f][1]] + mesh.vertices[mesh.faces[f][2]]) / 3;
    EXPECT_GT(mesh.face_normal(f).dot(c.normalized()), 0.5) << f;
  }
  EXPECT_EQ(boundary_edge_count(mesh), 0u);
}

TEST(MarchingCubes, AllPositiveIsEmpty) {
  const auto vol = analytic_volume(Vec3::Zero(), Vec3::Constant(0.2), 0.02, [](const Vec3&) { return 1.0; });
  EXPECT_TRUE(marching_cubes(vol).faces.empty());
}

TEST(MarchingCubes, PlaneNormalsAxisAligned) {
  const auto vol = analytic_volume(Vec3::Zero(), Vec3::Constant(0.3), 0.02,
                                   [](const Vec3& p) { return p.z() - 0.1537; });
  const auto mesh = marching_cubes(vol);
  ASSERT_FALSE(mesh.faces.empty());
  expect_clean(mesh);
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    EXPECT_NEAR(mesh.face_normal(f).z(), 1.0, 1e-3);
  }
  for (const auto& v : mesh.vertices) EXPECT_NEAR(v.z(), 0.1537, 1e-6);
}

TEST(MarchingCubes, UnweightedCubesSkipped) {
  auto vol = analytic_volume(Vec3::Zero(), Vec3::Constant(0.3), 0.02, [](const Vec3& p) { return p.z() - 0.15; });
  std::fill(vol.weight.begin(), vol.weight.end(), 0.0f);
  EXPECT_TRUE(marching_cubes(vol).faces.empty());
}

TEST(Integrate, FrontoParallelPlane) {
  const auto view = front_view(32, 32, 32);
  const double voxel = 0.02;
  TsdfVolume vol = TsdfVolume::covering(Aabb{Vec3(-0.2, -0.2, 1.7), Vec3(0.2, 0.2, 2.3)}, voxel);
  integrate(vol, ScalarMap(32, 32, 2.0), ColorMap(32, 32, Vec3(0.1, 0.2, 0.3)), ScalarMap(32, 32, 1.0), view);
  // Walk the voxel column nearest the optical axis.
  int ci = 0, cj = 0;
  double best = 1e9;
  for (int i = 0; i < vol.dims[0]; ++i) {
    const double d = std::abs(vol.voxel_center(i, 0, 0).x());
    if (d < best) best = d, ci = i;
  }
  best = 1e9;
  for (int j = 0; j < vol.dims[1]; ++j) {
    const double d = std::abs(vol.voxel_center(0, j, 0).y());
    if (d < best) best = d, cj = j;
  }
  bool found = false;
  for (int k = 0; k + 1 < vol.dims[2]; ++k) {
    const size_t a = vol.index(ci, cj, k), b = vol.index(ci, cj, k + 1);
    if (vol.weight[a] > 0 && vol.weight[b] > 0 && vol.tsdf[a] > 0 && vol.tsdf[b] <= 0) {
      const double za = vol.voxel_center(ci, cj, k).z(), zb = vol.voxel_center(ci, cj, k + 1).z();
      const double z0 = za + (zb - za) * vol.tsdf[a] / (vol.tsdf[a] - vol.tsdf[b]);
      EXPECT_NEAR(z0, 2.0, voxel);
      found = true;
    }
  }
  EXPECT_TRUE(found);
  const auto mesh = marching_cubes(vol);
  ASSERT_FALSE(mesh.faces.empty());
  for (const auto& v : mesh.vertices) EXPECT_NEAR(v.z(), 2.0, voxel);
  // Outward is toward the camera, where the tsdf is positive.
  for (size_t f = 0; f < mesh.faces.size(); ++f) EXPECT_LT(mesh.face_normal(f).z(), 0);
}

TEST(Integrate, ZeroAlphaLeavesVolume) {
  const auto view = front_view(16, 16, 16);
  TsdfVolume vol = TsdfVolume::covering(Aabb{Vec3(-0.2, -0.2, 1.8), Vec3(0.2, 0.2, 2.2)}, 0.02);
  const auto before = vol.tsdf;
  integrate(vol, ScalarMap(16, 16, 2.0), ColorMap(16, 16, Vec3::Zero()), ScalarMap(16, 16, 0.0), view);
  EXPECT_EQ(vol.tsdf, before);
  for (float w : vol.weight) EXPECT_EQ(w, 0.0f);
}

TEST(Integrate, SameViewTwiceIdempotent) {
  const auto view = front_view(16, 16, 16);
  Rng rng(1);
  ScalarMap depth(16, 16);
  for (auto& d : depth.data) d = rng.uniform(1.9, 2.1);
  const ColorMap color(16, 16, Vec3::Constant(0.5));
  const ScalarMap alpha(16, 16, 0.9);
  TsdfVolume once = TsdfVolume::covering(Aabb{Vec3(-0.2, -0.2, 1.8), Vec3(0.2, 0.2, 2.2)}, 0.02);
  TsdfVolume twice = once;
  integrate(once, depth, color, alpha, view);
  integrate(twice, depth, color, alpha, view);
  integrate(twice, depth, color, alpha, view, 3);
  EXPECT_EQ(once.tsdf, twice.tsdf);
}

TEST(Integrate, MismatchedMapsRejected) {
  const auto view = front_view(16, 16, 16);
  TsdfVolume vol = TsdfVolume::covering(Aabb{Vec3(-0.2, -0.2, 1.8), Vec3(0.2, 0.2, 2.2)}, 0.02);
  EXPECT_THROW(integrate(vol, ScalarMap(8, 16, 2.0), ColorMap(16, 16), ScalarMap(16, 16, 1.0), view), ValidationError);
}

TEST(ExtractMesh, EmptySetGivesEmptyMesh) {
  ExtractParams p;
  p.scene_extent = 4;
  const auto r = extract_mesh(SplatSet{}, {front_view(8, 8, 8)}, p);
  EXPECT_TRUE(r.mesh.faces.empty());
  EXPECT_TRUE(r.mesh.vertices.empty());
}

TEST(ExtractMesh, InitSplatsOfPlaneReproducePlane) {
  TriangleMesh plane;
  plane.vertices = {{-0.6, -0.6, 0}, {0.6, -0.6, 0}, {0.6, 0.6, 0}, {-0.6, 0.6, 0}};
  plane.faces = {{0, 1, 2}, {0, 2, 3}};
  std::vector<CameraView> views;
  for (int i = 0; i < 5; ++i) {
    CameraView v = pt::identity_view(64, 64, 64);
    v.id = "v" + std::to_string(i);
    const double a = 2 * M_PI * i / 5;
    v.w2c = look_at(Vec3(0.8 * std::cos(a), 0.8 * std::sin(a), 2.5), Vec3::Zero(), Vec3(0, 1, 0.01));
    views.push_back(v);
  }
  InitCloudParams ip;
  ip.seed = 2;
  const auto cloud = build_init_cloud(plane, views, ip);
  const double extent = scene_extent(views);
  const auto splats = init_splats(cloud, extent);
  ExtractParams p;
  p.scene_extent = extent;
  const auto r = extract_mesh(splats, views, p);
  ASSERT_FALSE(r.mesh.faces.empty());
  expect_clean(r.mesh);
  for (const auto& v : r.mesh.vertices) EXPECT_LE(std::abs(v.z()), 2 * r.voxel_size);
  EXPECT_NEAR(r.voxel_size, extent / 256, 1e-15);
}

TEST(ExtractMesh, Deterministic) {
  const auto sc = pt::make_fd_scene(4, 5, 16);
  ExtractParams p;
  p.scene_extent = 4;
  p.voxel_size = 0.05;
  const auto a = extract_mesh(sc.splats, {sc.view}, p);
  p.threads = 3;
  const auto b = extract_mesh(sc.splats, {sc.view}, p);
  EXPECT_EQ(a.mesh.vertices, b.mesh.vertices);
  EXPECT_EQ(a.mesh.faces, b.mesh.faces);
}
