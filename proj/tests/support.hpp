#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "priorsplat/camera.hpp"
#include "priorsplat/losses.hpp"
#include "priorsplat/renderer.hpp"
#include "priorsplat/splats.hpp"
#include "priorsplat/trainer.hpp"

namespace priorsplat::testing {

inline CameraView identity_view(int w, int h, double f) {
  CameraView v;
  v.id = "cam";
  v.width = w;
  v.height = h;
  v.fx = v.fy = f;
  v.cx = 0.5 * w;
  v.cy = 0.5 * h;
  return v;
}

inline double logit(double p) { return std::log(p / (1 - p)); }

inline Splat facing_splat(const Vec3& center, double scale, double opacity, const Vec3& color,
                          const Vec3& normal = Vec3(0, 0, -1)) {
  Splat s;
  s.center = center;
  s.rot = quaternion_from_normal(normal.normalized());
  s.log_scale = Vec2::Constant(std::log(scale));
  s.opacity_logit = logit(opacity);
  s.color_logit = Vec3(logit(color.x()), logit(color.y()), logit(color.z()));
  return s;
}

inline SplatSet make_set(std::vector<Splat> splats) {
  SplatSet set;
  set.splats = std::move(splats);
  set.reset_buffers();
  return set;
}

// Brute-force compositor written from the definitions: every splat is tested
// against every pixel ray in world space and fragments are sorted by depth.
struct ReferenceMaps {
  ColorMap color;
  ScalarMap alpha;
  ScalarMap mean_depth;
  ScalarMap median_depth;
  ColorMap normal_sum;
};

inline ReferenceMaps reference_render(const SplatSet& set, const CameraView& view) {
  const int w = view.width, h = view.height;
  ReferenceMaps m{ColorMap(w, h, Vec3::Zero()), ScalarMap(w, h, 0.0), ScalarMap(w, h, 0.0),
                  ScalarMap(w, h, 0.0), ColorMap(w, h, Vec3::Zero())};
  const Vec3 eye = camera_center(view);
  const Mat3 r = view.rotation();
  struct Hit {
    double z;
    Vec3 center;
    int index;
    double alpha;
    Vec3 color;
    Vec3 normal;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3 dcam((x + 0.5 - view.cx) / view.fx, (y + 0.5 - view.cy) / view.fy, 1.0);
      const Vec3 dir = (r.transpose() * dcam).normalized();
      std::vector<Hit> hits;
      for (size_t i = 0; i < set.size(); ++i) {
        const Splat& s = set.splats[i];
        const double zc = view.to_camera(s.center).z();
        if (zc <= kSplatNearPlane || s.opacity() < kAlphaCutoff) continue;
        const Mat3 rot = quaternion_to_matrix(s.rot.normalized());
        const Vec3 n = rot.col(2);
        const double nd = n.dot(dir);
        if (std::abs(nd) < 1e-9) continue;
        const double t = n.dot(s.center - eye) / nd;
        if (t <= 1e-6) continue;
        const Vec3 p = eye + t * dir;
        const double smin = kMinFootprintPx * zc / std::min(view.fx, view.fy);
        const double su = std::hypot(s.scale().x(), smin), sv = std::hypot(s.scale().y(), smin);
        const double u = rot.col(0).dot(p - s.center) / su;
        const double v = rot.col(1).dot(p - s.center) / sv;
        const double alpha = s.opacity() * std::exp(-0.5 * (u * u + v * v));
        if (alpha < kAlphaCutoff) continue;
        const Vec3 nw = n.dot(eye - s.center) >= 0 ? n : Vec3(-n);
        hits.push_back({view.to_camera(p).z(), s.center, int(i), alpha, s.color(), nw});
      }
      std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.z != b.z) return a.z < b.z;
        if (a.center != b.center) {
          return std::lexicographical_compare(a.center.data(), a.center.data() + 3, b.center.data(),
                                              b.center.data() + 3);
        }
        return a.index < b.index;
      });
      double T = 1, acc = 0, dsum = 0;
      bool med = false;
      for (const auto& hit : hits) {
        if (T < kTransmittanceFloor) break;
        const double wgt = hit.alpha * T;
        m.color.at(x, y) += wgt * hit.color;
        m.normal_sum.at(x, y) += wgt * hit.normal;
        dsum += wgt * hit.z;
        acc += wgt;
        T *= 1 - hit.alpha;
        if (!med && 1 - T >= 0.5) {
          m.median_depth.at(x, y) = hit.z;
          med = true;
        }
      }
      m.alpha.at(x, y) = acc;
      m.mean_depth.at(x, y) = acc > 0 ? dsum / acc : 0.0;
    }
  }
  return m;
}

// A small scene for finite-difference checks. Every splat covers the whole
// image well above the alpha cutoff, layers never swap order under small
// perturbations, opacities keep transmittance above the stopping floor, and
// the prior depth and target images sit away from the kinks of the L1 terms.
struct FdScene {
  SplatSet splats;
  CameraView view;
  ColorMap target;
  PriorBundle prior;
  MaskMap region;
  double depth_scale = 1;
  LossWeights weights;
};

inline FdScene make_fd_scene(uint64_t seed, int n_splats = 5, int size = 8) {
  Rng rng(seed * 977 + 13);
  FdScene sc;
  sc.view = identity_view(size, size, size);
  std::vector<Splat> splats;
  for (int i = 0; i < n_splats; ++i) {
    const double z = 2.0 * std::pow(1.35, i) * rng.uniform(0.98, 1.02);
    const Vec3 center(rng.uniform(-0.1, 0.1) * z, rng.uniform(-0.1, 0.1) * z, z);
    const double tilt = rng.uniform(0.02, 8.0) * M_PI / 180.0;
    const double az = rng.uniform(0, 2 * M_PI);
    const Vec3 n(std::sin(tilt) * std::cos(az), std::sin(tilt) * std::sin(az), -std::cos(tilt));
    Splat s = facing_splat(center, 1.0, rng.uniform(0.3, 0.7),
                           Vec3(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)), n);
    // In-plane spin and anisotropy so every quaternion component matters.
    const double spin = rng.uniform(0, 2 * M_PI);
    const Vec4 qs(std::cos(spin / 2), 0, 0, std::sin(spin / 2));
    const Vec4& q = s.rot;
    s.rot = Vec4(q[0] * qs[0] - q[3] * qs[3], q[1] * qs[0] + q[2] * qs[3], q[2] * qs[0] - q[1] * qs[3],
                 q[3] * qs[0] + q[0] * qs[3]) *
            rng.uniform(0.8, 1.2);
    s.log_scale = Vec2(std::log(rng.uniform(0.6, 0.8) * z), std::log(rng.uniform(0.6, 0.8) * z));
    splats.push_back(s);
  }
  sc.splats = make_set(std::move(splats));

  const RenderOutput out = render(sc.splats, sc.view);
  sc.target = ColorMap(size, size);
  for (size_t i = 0; i < sc.target.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double base = out.color[i][c];
      const double off = rng.uniform(0.05, 0.3);
      sc.target[i][c] = base + off <= 1.0 ? base + off : base - off;
    }
  }

  PriorBundle& pb = sc.prior;
  pb.view_id = sc.view.id;
  pb.depth = ScalarMap(size, size, 0.0);
  pb.normal = ColorMap(size, size, Vec3::Zero());
  pb.mask = MaskMap(size, size, 0);
  std::vector<size_t> masked;
  for (size_t i = 0; i < pb.mask.size(); ++i) {
    if (rng.uniform() < 0.7) masked.push_back(i);
  }
  if (masked.size() % 2) masked.pop_back();
  // Distinct relative offsets, spaced by at least 0.01.
  std::vector<double> deltas;
  for (size_t k = 0; k < masked.size(); ++k) deltas.push_back(-0.25 + 0.5 * double(k) / masked.size());
  rng.shuffle(deltas);
  for (size_t k = 0; k < masked.size(); ++k) {
    const size_t i = masked[k];
    pb.mask[i] = 1;
    pb.depth[i] = out.mean_depth[i] * (1.0 + deltas[k]);
    Vec3 n(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), -1.0);
    pb.normal[i] = n.normalized();
  }

  sc.region = MaskMap(size, size, 1);
  double scale = 1;
  prior_depth_loss(out.mean_depth, pb, std::nullopt, &scale);
  sc.depth_scale = scale;
  sc.weights = LossWeights{100.0, 0.05, 1.0, 0.05};
  return sc;
}

inline ViewLossOptions fd_options(const FdScene& sc) {
  ViewLossOptions o;
  o.mode = TrainMode::BuildingEnhanced;
  o.weights = sc.weights;
  o.region_override = &sc.region;
  o.depth_scale = sc.depth_scale;
  return o;
}

inline double fd_loss(const FdScene& sc, const SplatSet& set) {
  RenderOptions ro;
  ro.with_fragments = true;
  const RenderOutput out = render(set, sc.view, ro);
  return evaluate_view_loss(out, sc.view, sc.target, &sc.prior, fd_options(sc)).total;
}

inline std::vector<SplatGrad> fd_analytic(const FdScene& sc, int threads = 1) {
  RenderOptions ro;
  ro.with_fragments = true;
  ro.threads = threads;
  const RenderOutput out = render(sc.splats, sc.view, ro);
  const ViewLoss loss = evaluate_view_loss(out, sc.view, sc.target, &sc.prior, fd_options(sc));
  std::vector<SplatGrad> grads(sc.splats.size(), SplatGrad{});
  backward(sc.splats, sc.view, out, loss.adjoints, grads, nullptr, threads);
  return grads;
}

inline double fd_numeric(const FdScene& sc, size_t splat, int param, double h = 1e-4) {
  SplatSet plus = sc.splats, minus = sc.splats;
  SplatGrad p = plus.splats[splat].pack();
  p[param] += h;
  plus.splats[splat] = Splat::unpack(p);
  p[param] -= 2 * h;
  minus.splats[splat] = Splat::unpack(p);
  return (fd_loss(sc, plus) - fd_loss(sc, minus)) / (2 * h);
}

// Relative error below rel, or absolute error below abs_small where the
// gradient magnitude is under small.
inline bool gradient_close(double analytic, double numeric, double rel = 1e-3, double abs_small = 1e-6,
                           double small = 1e-4) {
  const double mag = std::max(std::abs(analytic), std::abs(numeric));
  const double err = std::abs(analytic - numeric);
  if (mag < small) return err < abs_small;
  return err / mag < rel;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("priorsplat_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace priorsplat::testing
