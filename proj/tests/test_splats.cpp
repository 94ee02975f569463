#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "priorsplat/splats.hpp"
#include "support.hpp"

using namespace priorsplat;
namespace pt = priorsplat::testing;

namespace {

Splat random_splat(Rng& rng) {
  SplatGrad p;
  for (auto& v : p) v = rng.uniform(-3, 3);
  return Splat::unpack(p);
}

InitPointCloud grid_cloud(int n, double h) {
  InitPointCloud c;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      c.points.push_back(Vec3(i * h, j * h, 0));
      c.normals.push_back(Vec3(0, 0, 1));
      c.colors.push_back(Vec3(0.2, 0.5, 0.8));
    }
  }
  return c;
}

}  // namespace

TEST(Splats, FrameExamples) {
  Splat s;
  auto f = splat_frame(s);
  EXPECT_EQ(f.t_u, Vec3(1, 0, 0));
  EXPECT_EQ(f.t_v, Vec3(0, 1, 0));
  EXPECT_EQ(f.n, Vec3(0, 0, 1));
  s.rot = Vec4(std::cos(M_PI / 4), std::sin(M_PI / 4), 0, 0);
  f = splat_frame(s);
  EXPECT_NEAR((f.n - Vec3(0, -1, 0)).norm(), 0, 1e-12);
}

TEST(Splats, RandomFramesOrthonormal) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_splat(rng);
    const auto f = splat_frame(s);
    Mat3 m;
    m << f.t_u, f.t_v, f.n;
    EXPECT_NEAR((m.transpose() * m - Mat3::Identity()).norm(), 0, 1e-9);
    EXPECT_NEAR((f.t_u.cross(f.t_v) - f.n).norm(), 0, 1e-9);
  }
}

TEST(Splats, QuaternionFromNormal) {
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const Vec3 n = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized();
    EXPECT_NEAR((quaternion_to_matrix(quaternion_from_normal(n)).col(2) - n).norm(), 0, 1e-12);
  }
  EXPECT_NEAR((quaternion_to_matrix(quaternion_from_normal(Vec3(0, 0, -1))).col(2) - Vec3(0, 0, -1)).norm(), 0, 1e-12);
}

TEST(Splats, PackHasThirteenParameters) {
  Rng rng(3);
  const auto s = random_splat(rng);
  const auto p = s.pack();
  EXPECT_EQ(p.size(), 13u);
  EXPECT_EQ(Splat::unpack(p).pack(), p);
}

TEST(Splats, InitAlignsNormalsAndOpacity) {
  InitPointCloud c = grid_cloud(2, 1.0);
  const auto set = init_splats(c, 10.0);
  ASSERT_EQ(set.size(), 4u);
  for (const auto& s : set.splats) {
    EXPECT_NEAR((splat_frame(s).n - Vec3(0, 0, 1)).norm(), 0, 1e-6);
    EXPECT_NEAR(s.opacity(), 0.1, 1e-12);
    EXPECT_NEAR((s.color() - Vec3(0.2, 0.5, 0.8)).norm(), 0, 1e-9);
  }
  EXPECT_EQ(set.grads.size(), 4u);
}

TEST(Splats, InitScaleFollowsGridSpacing) {
  const double h = 0.05;
  const auto set = init_splats(grid_cloud(12, h), 10.0);
  for (const auto& s : set.splats) {
    EXPECT_NEAR(s.scale().x(), h, 0.2 * h * 1.25);
    EXPECT_EQ(s.scale().x(), s.scale().y());
  }
  // Interior points have four neighbors at distance h.
  EXPECT_NEAR(set.splats[5 * 12 + 5].scale().x(), h, 1e-9);
}

TEST(Splats, InitScaleClamped) {
  InitPointCloud c = grid_cloud(2, 100.0);
  const auto set = init_splats(c, 1.0);
  for (const auto& s : set.splats) EXPECT_NEAR(s.scale().x(), 0.1, 1e-12);
}

TEST(Splats, CheckpointRoundTripBitExact) {
  Rng rng(4);
  std::vector<Splat> splats;
  for (int i = 0; i < 1000; ++i) splats.push_back(random_splat(rng));
  const auto set = pt::make_set(splats);
  const auto dir = pt::temp_dir("splats_io");
  save_checkpoint(dir / "c.ply", set, 123);
  int iter = 0;
  const auto back = load_checkpoint(dir / "c.ply", &iter);
  EXPECT_EQ(iter, 123);
  ASSERT_EQ(back.size(), set.size());
  for (size_t i = 0; i < set.size(); ++i) {
    const auto a = set.splats[i].pack(), b = back.splats[i].pack();
    EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(a)), 0) << i;
  }
}

TEST(Splats, EmptyCheckpoint) {
  const auto dir = pt::temp_dir("splats_empty");
  save_checkpoint(dir / "e.ply", SplatSet{}, 0);
  EXPECT_TRUE(load_checkpoint(dir / "e.ply").empty());
}

TEST(Splats, TruncatedCheckpointThrows) {
  Rng rng(5);
  std::vector<Splat> splats;
  for (int i = 0; i < 10; ++i) splats.push_back(random_splat(rng));
  const auto dir = pt::temp_dir("splats_trunc");
  save_checkpoint(dir / "c.ply", pt::make_set(splats), 1);
  const auto size = std::filesystem::file_size(dir / "c.ply");
  std::filesystem::resize_file(dir / "c.ply", size - 20);
  EXPECT_THROW(load_checkpoint(dir / "c.ply"), Error);
}
