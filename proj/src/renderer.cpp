#include "priorsplat/renderer.hpp"

#include <numeric>

namespace priorsplat {

std::optional<SplatHit> ray_splat_intersect(const Ray& ray, const Splat& s) {
  const Mat3 r = s.rotation();
  const Vec3 n = r.col(2);
  const double nd = n.dot(ray.direction);
  if (std::abs(nd) < 1e-9) return std::nullopt;
  const double t = n.dot(s.center - ray.origin) / nd;
  if (t <= 1e-6) return std::nullopt;
  const Vec3 delta = ray.origin + t * ray.direction - s.center;
  const Vec2 sc = s.scale();
  return SplatHit{r.col(0).dot(delta) / sc.x(), r.col(1).dot(delta) / sc.y(), t};
}

MapAdjoints MapAdjoints::zeros(int width, int height, size_t fragments) {
  MapAdjoints a;
  a.color = ColorMap(width, height, Vec3::Zero());
  a.alpha = ScalarMap(width, height, 0.0);
  a.mean_depth = ScalarMap(width, height, 0.0);
  a.normal_sum = ColorMap(width, height, Vec3::Zero());
  a.frag_omega.assign(fragments, 0.0);
  a.frag_z.assign(fragments, 0.0);
  return a;
}

namespace {

constexpr int kGenerateChunks = 64;

// Per-view quantities of one splat.
struct Prepared {
  bool active = false;
  Vec3 c;        // center in camera frame
  Mat3 rc;       // camera-frame columns (t_u, t_v, n)
  Mat3 rw;       // world-frame columns
  Vec4 q;        // normalized quaternion
  double qnorm = 1;
  double su = 0, sv = 0;
  double smin = 0;
  double sig_u = 0, sig_v = 0;
  double o = 0;
  double flip = 1;  // +1 when n faces the camera
  Vec3 color;
  Vec3 normal_world;  // flipped
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

struct Intrinsics {
  double fx, fy, cx, cy;
  int width, height;
  double kappa;  // footprint clamp per unit depth
  Mat3 r;

  Vec3 direction(int x, int y) const { return Vec3((x + 0.5 - cx) / fx, (y + 0.5 - cy) / fy, 1.0); }
};

Intrinsics intrinsics_of(const CameraView& view) {
  return Intrinsics{view.fx, view.fy, view.cx, view.cy, view.width, view.height,
                    kMinFootprintPx / std::min(view.fx, view.fy), view.rotation()};
}

Prepared prepare(const Splat& s, const CameraView& view, const Intrinsics& in) {
  Prepared p;
  p.c = view.to_camera(s.center);
  if (!(p.c.z() > kSplatNearPlane)) return p;
  p.o = s.opacity();
  if (!(p.o >= kAlphaCutoff)) return p;
  p.qnorm = s.rot.norm();
  p.q = s.rot / p.qnorm;
  p.rw = quaternion_to_matrix(p.q);
  p.rc = in.r * p.rw;
  const Vec2 sc = s.scale();
  p.su = sc.x();
  p.sv = sc.y();
  p.smin = in.kappa * p.c.z();
  p.sig_u = std::sqrt(p.su * p.su + p.smin * p.smin);
  p.sig_v = std::sqrt(p.sv * p.sv + p.smin * p.smin);
  p.flip = p.rc.col(2).dot(p.c) > 0 ? -1.0 : 1.0;
  p.color = s.color();
  p.normal_world = p.flip * p.rw.col(2);

  const double radius = std::sqrt(2.0 * std::log(p.o / kAlphaCutoff));
  const Vec3 ext = p.rc.col(0).cwiseAbs() * (radius * p.sig_u) + p.rc.col(1).cwiseAbs() * (radius * p.sig_v);
  const Vec3 lo = p.c - ext;
  const Vec3 hi = p.c + ext;
  if (lo.z() <= 1e-6) {
    p.x0 = 0;
    p.x1 = in.width - 1;
    p.y0 = 0;
    p.y1 = in.height - 1;
  } else {
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (int k = 0; k < 8; ++k) {
      const Vec3 q((k & 1) ? hi.x() : lo.x(), (k & 2) ? hi.y() : lo.y(), (k & 4) ? hi.z() : lo.z());
      const double u = in.fx * q.x() / q.z() + in.cx;
      const double v = in.fy * q.y() / q.z() + in.cy;
      umin = std::min(umin, u);
      umax = std::max(umax, u);
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
    const double big = 1e9;
    p.x0 = static_cast<int>(std::max(0.0, std::ceil(std::max(umin, -big) - 0.5)));
    p.x1 = static_cast<int>(std::min(in.width - 1.0, std::floor(std::min(umax, big) - 0.5)));
    p.y0 = static_cast<int>(std::max(0.0, std::ceil(std::max(vmin, -big) - 0.5)));
    p.y1 = static_cast<int>(std::min(in.height - 1.0, std::floor(std::min(vmax, big) - 0.5)));
  }
  p.active = p.x0 <= p.x1 && p.y0 <= p.y1;
  return p;
}

std::vector<Prepared> prepare_all(const SplatSet& set, const CameraView& view, const Intrinsics& in,
                                  int threads) {
  std::vector<Prepared> out(set.size());
  parallel_for(set.size(), threads, [&](size_t b, size_t e) {
    for (size_t i = b; i < e; ++i) out[i] = prepare(set.splats[i], view, in);
  });
  return out;
}

// Evaluates the splat along the ray through pixel (x, y).
bool evaluate(const Prepared& p, const Intrinsics& in, int x, int y, Fragment& f) {
  const Vec3 d = in.direction(x, y);
  const Vec3 n = p.rc.col(2);
  const double nd = n.dot(d);
  const double dlen = d.norm();
  if (std::abs(nd) < 1e-9 * dlen) return false;
  const double t = n.dot(p.c) / nd;
  if (t * dlen <= 1e-6) return false;
  const Vec3 delta = t * d - p.c;
  const double u = p.rc.col(0).dot(delta) / p.sig_u;
  const double v = p.rc.col(1).dot(delta) / p.sig_v;
  const double g = gaussian_weight(u, v);
  const double alpha = p.o * g;
  if (!(alpha >= kAlphaCutoff)) return false;
  f.z = t;
  f.u = u;
  f.v = v;
  f.g = g;
  f.alpha = alpha;
  return true;
}

bool fragment_before(const Fragment& a, const Fragment& b, const SplatSet& set) {
  if (a.z != b.z) return a.z < b.z;
  const Vec3& ca = set.splats[a.splat].center;
  const Vec3& cb = set.splats[b.splat].center;
  for (int k = 0; k < 3; ++k) {
    if (ca[k] != cb[k]) return ca[k] < cb[k];
  }
  return a.splat < b.splat;
}

}  // namespace

RenderOutput render(const SplatSet& set, const CameraView& view, const RenderOptions& opts) {
  const Intrinsics in = intrinsics_of(view);
  const int w = view.width, h = view.height;
  const size_t npix = size_t(w) * h;
  RenderOutput out;
  out.width = w;
  out.height = h;
  out.color = ColorMap(w, h, Vec3::Zero());
  out.alpha = ScalarMap(w, h, 0.0);
  out.mean_depth = ScalarMap(w, h, 0.0);
  out.median_depth = ScalarMap(w, h, 0.0);
  out.normal = ColorMap(w, h, Vec3::Zero());
  out.normal_sum = ColorMap(w, h, Vec3::Zero());
  out.depth_sum = ScalarMap(w, h, 0.0);

  const auto prepared = prepare_all(set, view, in, opts.threads);

  // Scatter: every splat emits fragments over its conservative screen box.
  std::vector<std::vector<Fragment>> chunk_frags(kGenerateChunks);
  parallel_chunks(set.size(), kGenerateChunks, opts.threads, [&](int chunk, size_t b, size_t e) {
    auto& local = chunk_frags[chunk];
    for (size_t i = b; i < e; ++i) {
      const Prepared& p = prepared[i];
      if (!p.active) continue;
      for (int y = p.y0; y <= p.y1; ++y) {
        for (int x = p.x0; x <= p.x1; ++x) {
          Fragment f;
          if (!evaluate(p, in, x, y, f)) continue;
          f.splat = static_cast<int>(i);
          f.pixel = y * w + x;
          local.push_back(f);
        }
      }
    }
  });
  std::vector<Fragment>& frags = out.fragments;
  size_t total = 0;
  for (const auto& c : chunk_frags) total += c.size();
  frags.reserve(total);
  for (auto& c : chunk_frags) {
    frags.insert(frags.end(), c.begin(), c.end());
    std::vector<Fragment>().swap(c);
  }

  out.splat_offsets.assign(set.size() + 1, 0);
  for (const auto& f : frags) ++out.splat_offsets[f.splat + 1];
  for (size_t i = 0; i < set.size(); ++i) out.splat_offsets[i + 1] += out.splat_offsets[i];

  // Group by pixel, then order each pixel's list front to back.
  std::vector<size_t> offsets(npix + 1, 0);
  for (const auto& f : frags) ++offsets[f.pixel + 1];
  for (size_t i = 0; i < npix; ++i) offsets[i + 1] += offsets[i];
  std::vector<size_t> order(frags.size());
  {
    std::vector<size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (size_t k = 0; k < frags.size(); ++k) order[cursor[frags[k].pixel]++] = k;
  }

  std::vector<size_t> composited(npix, 0);
  parallel_for(static_cast<size_t>(h), opts.threads, [&](size_t y0, size_t y1) {
    for (size_t pix = y0 * w; pix < y1 * w; ++pix) {
      const auto first = order.begin() + offsets[pix];
      const auto last = order.begin() + offsets[pix + 1];
      std::sort(first, last, [&](size_t a, size_t b) { return fragment_before(frags[a], frags[b], set); });
      double T = 1.0;
      double acc = 0.0;
      Vec3 color = Vec3::Zero();
      Vec3 nsum = Vec3::Zero();
      double dsum = 0.0;
      double median = 0.0;
      bool median_set = false;
      size_t n = 0;
      for (auto it = first; it != last; ++it) {
        if (T < kTransmittanceFloor) break;
        Fragment& f = frags[*it];
        const Prepared& p = prepared[f.splat];
        f.T = T;
        f.omega = f.alpha * T;
        f.composited = true;
        color += f.omega * p.color;
        nsum += f.omega * p.normal_world;
        dsum += f.omega * f.z;
        acc += f.omega;
        T *= 1.0 - f.alpha;
        if (!median_set && 1.0 - T >= 0.5) {
          median = f.z;
          median_set = true;
        }
        ++n;
      }
      composited[pix] = n;
      out.color[pix] = color;
      out.alpha[pix] = acc;
      out.normal_sum[pix] = nsum;
      out.depth_sum[pix] = dsum;
      out.mean_depth[pix] = acc > 0 ? dsum / acc : 0.0;
      out.median_depth[pix] = median;
      const double len = nsum.norm();
      if (acc > 1e-3 && len > 0) out.normal[pix] = nsum / len;
    }
  });

  if (opts.with_fragments) {
    out.has_fragments = true;
    out.pixel_offsets.assign(npix + 1, 0);
    for (size_t i = 0; i < npix; ++i) out.pixel_offsets[i + 1] = out.pixel_offsets[i] + composited[i];
    out.pixel_fragments.resize(out.pixel_offsets[npix]);
    for (size_t i = 0; i < npix; ++i) {
      std::copy(order.begin() + offsets[i], order.begin() + offsets[i] + composited[i],
                out.pixel_fragments.begin() + out.pixel_offsets[i]);
    }
  } else {
    std::vector<Fragment>().swap(out.fragments);
    std::vector<size_t>().swap(out.splat_offsets);
  }
  return out;
}

namespace {

// d(R(q)) / dq contracted with the gradient matrix g (columns t_u, t_v, n).
Vec4 rotation_grad_to_quaternion(const Vec4& q, const Mat3& g) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 dw, dx, dy, dz;
  dw << 0, -z, y, z, 0, -x, -y, x, 0;
  dx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  dy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  dz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
  return 2.0 * Vec4(g.cwiseProduct(dw).sum(), g.cwiseProduct(dx).sum(), g.cwiseProduct(dy).sum(),
                    g.cwiseProduct(dz).sum());
}

}  // namespace

void backward(const SplatSet& set, const CameraView& view, const RenderOutput& out,
              const MapAdjoints& adj, std::vector<SplatGrad>& grads, std::vector<Vec2>* screen_grad,
              int threads) {
  if (!out.has_fragments) throw Error("backward: render output has no fragments");
  if (out.splat_offsets.size() != set.size() + 1) throw Error("backward: splat set changed since render");
  const Intrinsics in = intrinsics_of(view);
  const int w = out.width, h = out.height;
  const auto prepared = prepare_all(set, view, in, threads);
  const auto& frags = out.fragments;

  auto map_or_zero = [](const auto& m, size_t i, auto zero) { return m.size() ? m[i] : zero; };
  const bool has_fo = !adj.frag_omega.empty();
  const bool has_fz = !adj.frag_z.empty();

  // Per-pixel pass: adjoints of each fragment's alpha and depth.
  std::vector<double> d_alpha(frags.size(), 0.0);
  std::vector<double> d_z(frags.size(), 0.0);
  parallel_for(static_cast<size_t>(h), threads, [&](size_t y0, size_t y1) {
    std::vector<double> g;
    for (size_t pix = y0 * w; pix < y1 * w; ++pix) {
      const size_t b = out.pixel_offsets[pix], e = out.pixel_offsets[pix + 1];
      if (b == e) continue;
      const Vec3 gc = map_or_zero(adj.color, pix, Vec3::Zero().eval());
      const double ga = map_or_zero(adj.alpha, pix, 0.0);
      const double gd = map_or_zero(adj.mean_depth, pix, 0.0);
      const Vec3 gn = map_or_zero(adj.normal_sum, pix, Vec3::Zero().eval());
      const double acc = out.alpha[pix];
      const double dmean = out.mean_depth[pix];
      g.assign(e - b, 0.0);
      for (size_t k = b; k < e; ++k) {
        const size_t fi = out.pixel_fragments[k];
        const Fragment& f = frags[fi];
        const Prepared& p = prepared[f.splat];
        double gk = gc.dot(p.color) + ga + gn.dot(p.normal_world);
        if (acc > 0) gk += gd * (f.z - dmean) / acc;
        if (has_fo) gk += adj.frag_omega[fi];
        g[k - b] = gk;
        double gz = acc > 0 ? gd * f.omega / acc : 0.0;
        if (has_fz) gz += adj.frag_z[fi];
        d_z[fi] = gz;
      }
      double rest = 0.0;
      for (size_t k = e; k-- > b;) {
        const size_t fi = out.pixel_fragments[k];
        const Fragment& f = frags[fi];
        const double gk = g[k - b];
        d_alpha[fi] = f.T * (gk - rest);
        rest = f.alpha * gk + (1.0 - f.alpha) * rest;
      }
    }
  });

  if (grads.size() < set.size()) grads.resize(set.size(), SplatGrad{});
  if (screen_grad) screen_grad->assign(set.size(), Vec2::Zero());

  // Per-splat pass: chain through the ray/splat intersection.
  parallel_for(set.size(), threads, [&](size_t sb, size_t se) {
    for (size_t i = sb; i < se; ++i) {
      const Prepared& p = prepared[i];
      if (!p.active) continue;
      const Vec3 tu = p.rc.col(0), tv = p.rc.col(1), n = p.rc.col(2);
      Vec3 g_c = Vec3::Zero(), g_tu = Vec3::Zero(), g_tv = Vec3::Zero(), g_n = Vec3::Zero();
      Vec3 g_col = Vec3::Zero(), g_nw = Vec3::Zero();
      double g_o = 0, g_sig_u = 0, g_sig_v = 0;
      bool any = false;
      for (size_t fi = out.splat_offsets[i]; fi < out.splat_offsets[i + 1]; ++fi) {
        const Fragment& f = frags[fi];
        if (!f.composited) continue;
        any = true;
        const int x = f.pixel % w, y = f.pixel / w;
        const Vec3 d = in.direction(x, y);
        const double nd = n.dot(d);
        const Vec3 delta = f.z * d - p.c;
        const double ga = d_alpha[fi];
        g_o += ga * f.g;
        const double gg = ga * p.o;
        const double gu = -gg * f.u * f.g;
        const double gv = -gg * f.v * f.g;
        const double gda = gu / p.sig_u;
        const double gdb = gv / p.sig_v;
        g_sig_u -= gu * f.u / p.sig_u;
        g_sig_v -= gv * f.v / p.sig_v;
        const Vec3 g_delta = gda * tu + gdb * tv;
        g_tu += gda * delta;
        g_tv += gdb * delta;
        const double gt = d_z[fi] + g_delta.dot(d);
        g_c += -g_delta + (gt / nd) * n;
        g_n += (-gt / nd) * delta;
        if (adj.color.size()) g_col += f.omega * adj.color[f.pixel];
        if (adj.normal_sum.size()) g_nw += (p.flip * f.omega) * adj.normal_sum[f.pixel];
      }
      if (!any) continue;
      g_c.z() += (g_sig_u * p.smin / p.sig_u + g_sig_v * p.smin / p.sig_v) * in.kappa;
      SplatGrad& out_g = grads[i];
      const Vec3 g_p = in.r.transpose() * g_c;
      for (int k = 0; k < 3; ++k) out_g[kCenter + k] += g_p[k];
      Mat3 g_rw;
      g_rw.col(0) = in.r.transpose() * g_tu;
      g_rw.col(1) = in.r.transpose() * g_tv;
      g_rw.col(2) = in.r.transpose() * g_n + g_nw;
      const Vec4 g_qhat = rotation_grad_to_quaternion(p.q, g_rw);
      const Vec4 g_q = (g_qhat - p.q * p.q.dot(g_qhat)) / p.qnorm;
      for (int k = 0; k < 4; ++k) out_g[kRot + k] += g_q[k];
      out_g[kLogScale + 0] += g_sig_u * p.su * p.su / p.sig_u;
      out_g[kLogScale + 1] += g_sig_v * p.sv * p.sv / p.sig_v;
      out_g[kOpacityLogit] += g_o * p.o * (1.0 - p.o);
      for (int k = 0; k < 3; ++k) out_g[kColorLogit + k] += g_col[k] * p.color[k] * (1.0 - p.color[k]);
      if (screen_grad) {
        (*screen_grad)[i] = Vec2(g_c.x() * p.c.z() / in.fx * 0.5 * w, g_c.y() * p.c.z() / in.fy * 0.5 * h);
      }
    }
  });
}

}  // namespace priorsplat
