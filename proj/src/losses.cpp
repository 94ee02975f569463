#include "priorsplat/losses.hpp"

#include <cmath>

namespace priorsplat {

std::vector<double> gaussian_window(const SsimParams& params) {
  if (params.window < 1 || params.window % 2 == 0) throw ValidationError("SSIM window must be odd and positive");
  std::vector<double> w(params.window);
  const int r = params.window / 2;
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    w[i + r] = std::exp(-0.5 * i * i / (params.sigma * params.sigma));
    sum += w[i + r];
  }
  for (double& v : w) v /= sum;
  return w;
}

namespace {

// Separable zero-padded "same" correlation with a symmetric kernel.
ScalarMap blur_raw(const ScalarMap& in, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size()) / 2;
  const int w = in.width, h = in.height;
  ScalarMap tmp(w, h, 0.0), out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) s += k[i + r] * in.at(xx, y);
      }
      tmp.at(x, y) = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) s += k[i + r] * tmp.at(x, yy);
      }
      out.at(x, y) = s;
    }
  }
  return out;
}

ScalarMap multiply(const ScalarMap& a, const ScalarMap& b) {
  ScalarMap out(a.width, a.height, 0.0);
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

ScalarMap divide(const ScalarMap& a, const ScalarMap& b) {
  ScalarMap out(a.width, a.height, 0.0);
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] / b[i];
  return out;
}

size_t count_set(const MaskMap& m) {
  size_t n = 0;
  for (uint8_t v : m.data) n += v ? 1 : 0;
  return n;
}

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

PhotometricResult photometric_loss(const ColorMap& rendered, const ColorMap& target, const MaskMap& valid,
                                   const SsimParams& params) {
  const int w = rendered.width, h = rendered.height;
  if (!target.same_shape(w, h) || !valid.same_shape(w, h)) {
    throw ValidationError("photometric_loss: image sizes differ");
  }
  const size_t nvalid = count_set(valid);
  if (nvalid == 0) throw ValidationError("photometric_loss: empty valid mask");
  const double inv = 1.0 / (3.0 * static_cast<double>(nvalid));

  PhotometricResult res;
  res.grad = ColorMap(w, h, Vec3::Zero());
  double l1 = 0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    if (!valid[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = rendered[i][c] - target[i][c];
      l1 += std::abs(d);
      res.grad[i][c] += 0.8 * sign(d) * inv;
    }
  }
  res.l1 = l1 * inv;

  const auto k = gaussian_window(params);
  const double c1 = params.k1 * params.k1;
  const double c2 = params.k2 * params.k2;
  ScalarMap ones(w, h, 1.0);
  const ScalarMap wsum = blur_raw(ones, k);
  auto blur = [&](const ScalarMap& m) { return divide(blur_raw(m, k), wsum); };

  double ssim_sum = 0;
  for (int c = 0; c < 3; ++c) {
    ScalarMap x(w, h, 0.0), y(w, h, 0.0);
    for (size_t i = 0; i < x.size(); ++i) {
      if (!valid[i]) continue;
      x[i] = rendered[i][c];
      y[i] = target[i][c];
    }
    const ScalarMap mx = blur(x), my = blur(y);
    const ScalarMap ex2 = blur(multiply(x, x)), ey2 = blur(multiply(y, y)), exy = blur(multiply(x, y));
    ScalarMap ga(w, h, 0.0), gb(w, h, 0.0), gc(w, h, 0.0);
    const double gs = -0.2 * inv;
    for (size_t i = 0; i < x.size(); ++i) {
      const double sx = ex2[i] - mx[i] * mx[i];
      const double sy = ey2[i] - my[i] * my[i];
      const double sxy = exy[i] - mx[i] * my[i];
      const double a1 = 2 * mx[i] * my[i] + c1;
      const double a2 = 2 * sxy + c2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + c1;
      const double b2 = sx + sy + c2;
      const double s = a1 * a2 / (b1 * b2);
      if (!valid[i]) continue;
      ssim_sum += s;
      const double d_mu = (2 * my[i] * a2 - 2 * my[i] * a1) / (b1 * b2) - s * 2 * mx[i] / b1 + s * 2 * mx[i] / b2;
      ga[i] = gs * d_mu;
      gb[i] = gs * (-s / b2);
      gc[i] = gs * (2 * a1 / (b1 * b2));
    }
    const ScalarMap ta = blur_raw(divide(ga, wsum), k);
    const ScalarMap tb = blur_raw(divide(gb, wsum), k);
    const ScalarMap tc = blur_raw(divide(gc, wsum), k);
    for (size_t i = 0; i < x.size(); ++i) {
      if (!valid[i]) continue;
      res.grad[i][c] += ta[i] + 2 * x[i] * tb[i] + y[i] * tc[i];
    }
  }
  res.ssim = ssim_sum * inv;
  res.loss = 0.8 * res.l1 + 0.2 * (1.0 - res.ssim);
  return res;
}

double distortion_single_ray(std::vector<std::pair<double, double>> z_w) {
  std::sort(z_w.begin(), z_w.end());
  double w_before = 0, wz_before = 0, total = 0;
  for (const auto& [z, w] : z_w) {
    total += w * (z * w_before - wz_before);
    w_before += w;
    wz_before += w * z;
  }
  return total;
}

FragmentLossResult depth_distortion_loss(const RenderOutput& out, const MaskMap& region) {
  if (!out.has_fragments) throw Error("depth_distortion_loss: render output has no fragments");
  FragmentLossResult res;
  res.grad_omega.assign(out.fragments.size(), 0.0);
  res.grad_z.assign(out.fragments.size(), 0.0);
  const size_t npix = size_t(out.width) * out.height;
  for (size_t pix = 0; pix < npix; ++pix) {
    if (region.size() && !region[pix]) continue;
    if (out.fragment_count(pix) > 0) ++res.rays;
  }
  if (res.rays == 0) return res;
  const double inv = 1.0 / static_cast<double>(res.rays);
  double total = 0;
  for (size_t pix = 0; pix < npix; ++pix) {
    if (region.size() && !region[pix]) continue;
    const size_t b = out.pixel_offsets[pix], e = out.pixel_offsets[pix + 1];
    if (b == e) continue;
    double w_all = 0, wz_all = 0;
    for (size_t k = b; k < e; ++k) {
      const Fragment& f = out.fragments[out.pixel_fragments[k]];
      w_all += f.omega;
      wz_all += f.omega * f.z;
    }
    double w_before = 0, wz_before = 0, ray = 0;
    for (size_t k = b; k < e; ++k) {
      const size_t fi = out.pixel_fragments[k];
      const Fragment& f = out.fragments[fi];
      const double w_after = w_all - w_before - f.omega;
      const double wz_after = wz_all - wz_before - f.omega * f.z;
      ray += f.omega * (f.z * w_before - wz_before);
      res.grad_omega[fi] = inv * (f.z * w_before - wz_before + wz_after - f.z * w_after);
      res.grad_z[fi] = inv * f.omega * (w_before - w_after);
      w_before += f.omega;
      wz_before += f.omega * f.z;
    }
    total += ray;
  }
  res.loss = total * inv;
  return res;
}

namespace {

struct Stencil {
  int xa = 0, xb = 0, ya = 0, yb = 0;
};

bool stencil_at(const ScalarMap& depth, const MaskMap& region, int x, int y, Stencil& s) {
  const int w = depth.width, h = depth.height;
  if (w < 2 || h < 2) return false;
  auto ok = [&](int xx, int yy) {
    const size_t i = depth.index(xx, yy);
    return depth[i] > 0 && (region.size() == 0 || region[i]);
  };
  if (!ok(x, y)) return false;
  s.xa = x > 0 ? x - 1 : x;
  s.xb = x < w - 1 ? x + 1 : x;
  s.ya = y > 0 ? y - 1 : y;
  s.yb = y < h - 1 ? y + 1 : y;
  return ok(s.xa, y) && ok(s.xb, y) && ok(x, s.ya) && ok(x, s.yb);
}

Vec3 back_project(const ScalarMap& depth, const CameraView& view, int x, int y) {
  return depth.at(x, y) * pixel_direction_camera(view, x, y);
}

}  // namespace

ColorMap depth_normals(const ScalarMap& depth, const CameraView& view, const MaskMap& region, MaskMap* valid) {
  ColorMap out(depth.width, depth.height, Vec3::Zero());
  if (valid) *valid = MaskMap(depth.width, depth.height, 0);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      Stencil s;
      if (!stencil_at(depth, region, x, y, s)) continue;
      const Vec3 dpx = back_project(depth, view, s.xb, y) - back_project(depth, view, s.xa, y);
      const Vec3 dpy = back_project(depth, view, x, s.yb) - back_project(depth, view, x, s.ya);
      const Vec3 m = dpy.cross(dpx);
      const double len = m.norm();
      if (!(len > 1e-12)) continue;
      out.at(x, y) = m / len;
      if (valid) valid->at(x, y) = 1;
    }
  }
  return out;
}

MapLossResult normal_consistency_loss(const RenderOutput& out, const CameraView& view, const MaskMap& region) {
  const int w = out.width, h = out.height;
  MapLossResult res;
  res.grad_alpha = ScalarMap(w, h, 0.0);
  res.grad_depth = ScalarMap(w, h, 0.0);
  res.grad_normal = ColorMap(w, h, Vec3::Zero());
  MaskMap valid;
  const ColorMap nc = depth_normals(out.mean_depth, view, region, &valid);
  res.pixels = count_set(valid);
  if (res.pixels == 0) {
    res.empty = true;
    return res;
  }
  const double inv = 1.0 / static_cast<double>(res.pixels);
  const Mat3 r = view.rotation();
  double total = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t i = out.alpha.index(x, y);
      if (!valid[i]) continue;
      const Vec3 nw = r.transpose() * nc[i];
      total += out.alpha[i] - out.normal_sum[i].dot(nw);
      res.grad_alpha[i] += inv;
      res.grad_normal[i] += -inv * nw;

      Stencil s;
      stencil_at(out.mean_depth, region, x, y, s);
      const Vec3 dpx = back_project(out.mean_depth, view, s.xb, y) - back_project(out.mean_depth, view, s.xa, y);
      const Vec3 dpy = back_project(out.mean_depth, view, x, s.yb) - back_project(out.mean_depth, view, x, s.ya);
      const Vec3 m = dpy.cross(dpx);
      const double len = m.norm();
      const Vec3 g_nc = -inv * (r * out.normal_sum[i]);
      const Vec3 g_m = (g_nc - nc[i] * nc[i].dot(g_nc)) / len;
      const Vec3 g_dpy = dpx.cross(g_m);
      const Vec3 g_dpx = g_m.cross(dpy);
      auto add = [&](int xx, int yy, const Vec3& gp) {
        res.grad_depth.at(xx, yy) += gp.dot(pixel_direction_camera(view, xx, yy));
      };
      add(s.xb, y, g_dpx);
      add(s.xa, y, -g_dpx);
      add(x, s.yb, g_dpy);
      add(x, s.ya, -g_dpy);
    }
  }
  res.loss = total * inv;
  return res;
}

MapLossResult prior_depth_loss(const ScalarMap& rendered, const PriorBundle& prior,
                               std::optional<double> fixed_scale, double* scale_out) {
  const int w = rendered.width, h = rendered.height;
  if (!prior.depth.same_shape(w, h) || !prior.mask.same_shape(w, h)) {
    throw ValidationError("prior_depth_loss: map sizes differ");
  }
  MapLossResult res;
  res.grad_depth = ScalarMap(w, h, 0.0);
  res.pixels = count_set(prior.mask);
  if (scale_out) *scale_out = 1.0;
  if (res.pixels == 0) {
    res.empty = true;
    return res;
  }
  std::vector<double> ratios;
  for (size_t i = 0; i < rendered.size(); ++i) {
    if (prior.mask[i] && rendered[i] > 1e-6) ratios.push_back(prior.depth[i] / rendered[i]);
  }
  double scale = 1.0;
  if (!ratios.empty()) {
    const size_t mid = ratios.size() / 2;
    std::nth_element(ratios.begin(), ratios.begin() + mid, ratios.end());
    scale = ratios[mid];
    if (ratios.size() % 2 == 0) {
      const double lower = *std::max_element(ratios.begin(), ratios.begin() + mid);
      scale = 0.5 * (scale + lower);
    }
  }
  if (fixed_scale) scale = *fixed_scale;
  if (scale_out) *scale_out = scale;
  const double inv = 1.0 / static_cast<double>(res.pixels);
  double total = 0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    if (!prior.mask[i]) continue;
    if (rendered[i] > 1e-6) {
      const double d = scale * rendered[i] - prior.depth[i];
      total += std::abs(d);
      res.grad_depth[i] = inv * scale * sign(d);
    } else {
      total += std::abs(prior.depth[i]);
    }
  }
  res.loss = total * inv;
  return res;
}

MapLossResult prior_normal_loss(const ColorMap& rendered, const PriorBundle& prior) {
  const int w = rendered.width, h = rendered.height;
  if (!prior.normal.same_shape(w, h) || !prior.mask.same_shape(w, h)) {
    throw ValidationError("prior_normal_loss: map sizes differ");
  }
  MapLossResult res;
  res.grad_normal = ColorMap(w, h, Vec3::Zero());
  res.pixels = count_set(prior.mask);
  if (res.pixels == 0) {
    res.empty = true;
    return res;
  }
  const double inv = 1.0 / static_cast<double>(res.pixels);
  double total = 0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    if (!prior.mask[i]) continue;
    const double len = rendered[i].norm();
    if (len > 1e-6) {
      const Vec3 nh = rendered[i] / len;
      const Vec3& n = prior.normal[i];
      total += 1.0 - nh.dot(n);
      res.grad_normal[i] = -inv * (n - nh * nh.dot(n)) / len;
    } else {
      total += 1.0;
    }
  }
  res.loss = total * inv;
  return res;
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  const std::pair<const char*, double> parts[] = {
      {"L_c", c.l_c}, {"L_d", c.l_d}, {"L_n", c.l_n}, {"L_db", c.l_db}, {"L_nb", c.l_nb}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) throw ValidationError(std::string("non-finite loss component ") + name);
  }
  return c.l_c + w.lambda_d * c.l_d + w.lambda_n * c.l_n + w.lambda_db * c.l_db + w.lambda_nb * c.l_nb;
}

Schedule Schedule::defaults(int total_iters) {
  Schedule s;
  s.total_iters = total_iters;
  s.phase1_end = std::max(1, total_iters / 2);
  s.lambda_d = WeightRamp{100.0, 100.0, s.phase1_end, -1};
  s.lambda_n = WeightRamp{0.05, 0.05, s.phase1_end, -1};
  s.lambda_db = WeightRamp{1.0, 0.1, 0, s.phase1_end};
  s.lambda_nb = WeightRamp{0.05, 0.005, 0, s.phase1_end};
  return s;
}

void Schedule::validate() const {
  if (total_iters < 1) throw ValidationError("schedule: total_iters must be >= 1");
  if (phase1_end <= 0 || phase1_end > total_iters) {
    throw ValidationError("schedule: phase1_end must be in (0, total_iters]");
  }
  const std::pair<const char*, const WeightRamp*> ramps[] = {
      {"lambda_d", &lambda_d}, {"lambda_n", &lambda_n}, {"lambda_db", &lambda_db}, {"lambda_nb", &lambda_nb}};
  for (const auto& [name, r] : ramps) {
    if (!(r->start >= 0) || !(r->end >= 0)) throw ValidationError(std::string("schedule: ") + name + " must be >= 0");
  }
}

namespace {

double ramp_at(const WeightRamp& r, int iter, int total) {
  if (iter < r.activation_iter) return 0.0;
  if (r.decay_from < 0 || iter < r.decay_from) return r.start;
  const double frac = total > r.decay_from ? double(iter - r.decay_from) / double(total - r.decay_from) : 1.0;
  return r.start + (r.end - r.start) * std::min(1.0, frac);
}

}  // namespace

LossWeights weights_at(const Schedule& s, int iter) {
  if (iter < 0 || iter > s.total_iters) {
    throw ValidationError("weights_at: iteration " + std::to_string(iter) + " outside [0, " +
                          std::to_string(s.total_iters) + "]");
  }
  return LossWeights{ramp_at(s.lambda_d, iter, s.total_iters), ramp_at(s.lambda_n, iter, s.total_iters),
                     ramp_at(s.lambda_db, iter, s.total_iters), ramp_at(s.lambda_nb, iter, s.total_iters)};
}

}  // namespace priorsplat
