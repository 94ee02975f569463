#include <gtest/gtest.h>

#include "priorsplat/metrics.hpp"
#include "priorsplat/priors.hpp"
#include "priorsplat/synth.hpp"
#include "support.hpp"

using namespace priorsplat;
namespace pt = priorsplat::testing;

namespace {

SynthParams small(Preset preset, uint64_t seed = 7) {
  SynthParams p;
  p.preset = preset;
  p.width = 48;
  p.height = 36;
  p.seed = seed;
  p.gt_cloud_points = 4000;
  p.sfm_points = 500;
  return p;
}

}  // namespace

TEST(Synth, DeterministicPerSeed) {
  const auto a = generate_scene(small(Preset::Occluded));
  const auto b = generate_scene(small(Preset::Occluded));
  ASSERT_EQ(a.gt_images.size(), b.gt_images.size());
  for (size_t i = 0; i < a.gt_images.size(); ++i) EXPECT_EQ(a.gt_images[i].data, b.gt_images[i].data);
  EXPECT_EQ(a.gt_mesh.vertices, b.gt_mesh.vertices);
  EXPECT_EQ(a.gt_mesh.faces, b.gt_mesh.faces);
  ASSERT_EQ(a.occluders.size(), b.occluders.size());
  for (size_t i = 0; i < a.occluders.size(); ++i) EXPECT_EQ(a.occluders[i].vertices, b.occluders[i].vertices);
  EXPECT_EQ(a.gt_cloud.points, b.gt_cloud.points);
  EXPECT_EQ(a.sfm_cloud.points, b.sfm_cloud.points);
}

TEST(Synth, OpenPresetHasNoOccluders) {
  const auto s = generate_scene(small(Preset::Open));
  EXPECT_TRUE(s.occluders.empty());
  EXPECT_EQ(s.views.size(), 16u);
  EXPECT_EQ(s.gt_cloud.size(), 4000u);
}

TEST(Synth, OccludedPresetBlocksFacadeRays) {
  const auto s = generate_scene(small(Preset::Occluded));
  ASSERT_FALSE(s.occluders.empty());
  int heavy = 0;
  for (const auto& v : s.views) {
    size_t facade = 0, blocked = 0;
    for (int y = 0; y < v.height; ++y) {
      for (int x = 0; x < v.width; ++x) {
        const Ray ray = pixel_ray(v, x, y);
        const auto h = brute_force_closest_hit(s.gt_mesh, ray, std::numeric_limits<double>::infinity());
        if (!h) continue;
        ++facade;
        for (const auto& occ : s.occluders) {
          if (brute_force_closest_hit(occ, ray, h->t).has_value()) {
            ++blocked;
            break;
          }
        }
      }
    }
    const double frac = facade ? double(blocked) / facade : 0.0;
    EXPECT_NEAR(frac, occlusion_fraction(s, v), 1e-12);
    if (frac >= 0.25) ++heavy;
  }
  EXPECT_GE(heavy, 3);
}

TEST(Synth, SparsePresetCapsViews) {
  auto p = small(Preset::Sparse);
  p.n_views = 16;
  const auto s = generate_scene(p);
  EXPECT_LE(s.views.size(), size_t(kSparseMaxViews));
  EXPECT_GE(s.views.size(), 4u);
}

TEST(Synth, RejectsBadParameters) {
  auto p = small(Preset::Open);
  p.n_views = 3;
  EXPECT_THROW(generate_scene(p), ValidationError);
  EXPECT_THROW(parse_preset("forest"), ValidationError);
  EXPECT_EQ(parse_preset("occluded"), Preset::Occluded);
}

TEST(RenderGt, UnlitFaceIsAmbientOnly) {
  TriangleMesh quad;
  quad.vertices = {{-5, -5, 3}, {5, -5, 3}, {5, 5, 3}, {-5, 5, 3}};
  quad.faces = {{0, 2, 1}, {0, 3, 2}};
  const Vec3 albedo(0.8, 0.5, 0.2);
  quad.face_albedo = {albedo, albedo};
  EXPECT_LE(quad.face_normal(0).dot(light_direction()), 0);
  const auto v = pt::identity_view(8, 8, 8);
  const auto g = render_gt(std::vector<TriangleMesh>{quad}, v);
  for (const auto& c : g.color.data) EXPECT_NEAR((c - kAmbient * albedo).norm(), 0, 1e-12);
}

TEST(RenderGt, EmptySceneIsBlack) {
  const auto g = render_gt(std::vector<TriangleMesh>{}, pt::identity_view(6, 4, 6));
  for (const auto& c : g.color.data) EXPECT_EQ(c, Vec3::Zero());
  for (double d : g.depth.data) EXPECT_EQ(d, 0);
}

TEST(RenderGt, DepthMatchesPriorRaycast) {
  const auto house = make_house(5);
  for (const auto& v : make_camera_ring(6, 40, 30)) {
    const auto g = render_gt(std::vector<TriangleMesh>{house}, v);
    const auto b = raycast_priors(house, v);
    for (size_t i = 0; i < g.depth.size(); ++i) {
      EXPECT_EQ(g.depth[i] > 0, bool(b.mask[i]));
      if (b.mask[i]) EXPECT_NEAR(g.depth[i], b.depth[i], 1e-9);
    }
  }
}

TEST(Lod2, CloseToDetailedEnvelope) {
  const auto gt = make_house(7);
  const auto lod2 = make_lod2_house();
  for (size_t f = 0; f < lod2.faces.size(); ++f) EXPECT_GT(lod2.face_area(f), 0);
  const auto a = cloud_from_mesh(gt, 20000, 1);
  const auto b = cloud_from_mesh(lod2, 20000, 2);
  const auto ab = nn_distances(a.points, b.points);
  const auto ba = nn_distances(b.points, a.points);
  const double h = std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba.begin(), ba.end()));
  EXPECT_LT(h, 0.15);
}

TEST(Lod2, PriorMaskInsideHouseBand) {
  const auto s = generate_scene(small(Preset::Open));
  const BvhIndex gt(s.gt_mesh);
  for (size_t k = 0; k < s.views.size(); k += 3) {
    const auto& v = s.views[k];
    const auto b = raycast_priors(s.lod2_mesh, v);
    for (int y = 0; y < v.height; ++y) {
      for (int x = 0; x < v.width; ++x) {
        if (!b.mask.at(x, y) || s.gt_depths[k].at(x, y) > 0) continue;
        // A prior hit the house misses must lie within the envelope band.
        const Vec3 p = camera_center(v) + v.rotation().transpose() * (b.depth.at(x, y) * pixel_direction_camera(v, x, y));
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : s.gt_cloud.points) best = std::min(best, (q - p).norm());
        EXPECT_LT(best, 0.15);
      }
    }
  }
}

TEST(SceneIo, RoundTrip) {
  const auto s = generate_scene(small(Preset::Occluded));
  const auto dir = pt::temp_dir("synth_io");
  write_scene(dir, s);
  EXPECT_TRUE(std::filesystem::exists(dir / "gt.ply"));
  EXPECT_TRUE(std::filesystem::exists(dir / "lod2.ply"));
  EXPECT_TRUE(std::filesystem::exists(dir / "occluder_0.ply"));
  EXPECT_TRUE(std::filesystem::exists(dir / "gt_cloud.ply"));
  const auto f = read_scene(dir);
  ASSERT_EQ(f.views.size(), s.views.size());
  ASSERT_EQ(f.images.size(), s.gt_images.size());
  for (size_t i = 0; i < f.images.size(); ++i) {
    EXPECT_EQ(f.views[i].id, s.views[i].id);
    // Images are stored as 8-bit sRGB.
    double worst = 0;
    for (size_t j = 0; j < f.images[i].size(); ++j) {
      for (int c = 0; c < 3; ++c) {
        const double q = std::round(linear_to_srgb(s.gt_images[i][j][c]) * 255.0) / 255.0;
        worst = std::max(worst, std::abs(f.images[i][j][c] - srgb_to_linear(q)));
      }
    }
    EXPECT_LE(worst, 1e-12);
  }
  EXPECT_EQ(f.lod2_mesh.faces, s.lod2_mesh.faces);
  EXPECT_EQ(f.gt_cloud.size(), s.gt_cloud.size());
}
