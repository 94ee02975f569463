// Acceptance run: one PASS/FAIL line per criterion. End-to-end criteria drive
// the same entry point as the priorsplat executable and share their runs.

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "priorsplat/cli.hpp"
#include "priorsplat/extract.hpp"
#include "priorsplat/losses.hpp"
#include "priorsplat/metrics.hpp"
#include "priorsplat/priors.hpp"
#include "priorsplat/synth.hpp"
#include "support.hpp"

using namespace priorsplat;
namespace fs = std::filesystem;
namespace pt = priorsplat::testing;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  fs::path work = "acceptance_work";
  bool reuse = false;
  int threads = 0;
  int iters = 2000;
};

std::string format(const char* f, auto... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  return json::parse(in);
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ------------------------------------------------------------------ oracles

Outcome gradient_check() {
  size_t checked = 0, bad = 0;
  double worst = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const auto sc = pt::make_fd_scene(seed);
    const auto grads = pt::fd_analytic(sc);
    for (size_t i = 0; i < sc.splats.size(); ++i) {
      for (int k = 0; k < kSplatParams; ++k) {
        const double num = pt::fd_numeric(sc, i, k);
        ++checked;
        const double mag = std::max(std::abs(grads[i][k]), std::abs(num));
        if (mag >= 1e-4) worst = std::max(worst, std::abs(grads[i][k] - num) / mag);
        bad += !pt::gradient_close(grads[i][k], num);
      }
    }
  }
  return {bad == 0, format("%zu/%zu gradients within tolerance, worst relative error %.2e", checked - bad, checked, worst)};
}

TriangleMesh random_soup(size_t n, uint64_t seed) {
  Rng rng(seed);
  TriangleMesh m;
  for (size_t f = 0; f < n; ++f) {
    const Vec3 c(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    for (int k = 0; k < 3; ++k) m.vertices.push_back(c + 0.3 * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
    const int b = static_cast<int>(3 * f);
    m.faces.push_back({b, b + 1, b + 2});
  }
  return m;
}

Outcome raycast_oracle() {
  const std::vector<TriangleMesh> meshes{make_house(7), make_lod2_house(), random_soup(400, 5)};
  size_t hits = 0, mismatches = 0;
  for (size_t m = 0; m < meshes.size(); ++m) {
    const BvhIndex bvh(meshes[m]);
    const Aabb box = bounds_of(meshes[m].vertices);
    const Vec3 center = 0.5 * (box.lo + box.hi);
    const double r = (box.hi - box.lo).norm();
    Rng rng(100 + m);
    for (int k = 0; k < 1000; ++k) {
      const Vec3 o = center + r * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      const Vec3 t(rng.uniform(box.lo.x(), box.hi.x()), rng.uniform(box.lo.y(), box.hi.y()),
                   rng.uniform(box.lo.z(), box.hi.z()));
      const Ray ray{o, (t - o).normalized()};
      const auto a = bvh.closest_hit(ray);
      const auto b = brute_force_closest_hit(meshes[m], ray, std::numeric_limits<double>::infinity());
      if (a.has_value() != b.has_value()) {
        ++mismatches;
        continue;
      }
      if (!a) continue;
      ++hits;
      if (a->face != b->face || std::abs(a->t - b->t) > 1e-9) ++mismatches;
    }
  }
  return {mismatches == 0, format("3000 rays, %zu hits, %zu mismatches", hits, mismatches)};
}

double brute_distortion(const std::vector<std::pair<double, double>>& zw) {
  double s = 0;
  for (size_t i = 0; i < zw.size(); ++i) {
    for (size_t j = i + 1; j < zw.size(); ++j) s += zw[i].second * zw[j].second * std::abs(zw[i].first - zw[j].first);
  }
  return s;
}

Outcome loss_oracles() {
  Rng rng(1);
  ColorMap img(16, 12);
  for (auto& c : img.data) c = Vec3(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));
  const double lc = photometric_loss(img, img, MaskMap(16, 12, 1)).loss;

  double dist_err = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<double, double>> zw;
    for (int k = 0; k < 12; ++k) zw.emplace_back(rng.uniform(0.5, 8), rng.uniform(0, 0.3));
    dist_err = std::max(dist_err, std::abs(distortion_single_ray(zw) - brute_distortion(zw)));
  }

  const Vec3 n(0, 0, -1);
  PriorBundle prior;
  prior.view_id = "cam";
  prior.depth = ScalarMap(10, 10, 0.0);
  prior.normal = ColorMap(10, 10, n);
  prior.mask = MaskMap(10, 10, 1);
  ScalarMap rendered(10, 10);
  for (size_t i = 0; i < rendered.size(); ++i) {
    prior.depth[i] = rng.uniform(1, 5);
    rendered[i] = 2.5 * prior.depth[i];
  }
  const double ldb = prior_depth_loss(rendered, prior).loss;

  const Vec3 tilted = Eigen::AngleAxisd(M_PI / 3, Vec3::UnitY()) * n;
  const double nb0 = prior_normal_loss(ColorMap(10, 10, 0.3 * n), prior).loss;
  const double nb05 = prior_normal_loss(ColorMap(10, 10, tilted), prior).loss;
  const double nb2 = prior_normal_loss(ColorMap(10, 10, -n), prior).loss;

  const bool pass = std::abs(lc) < 1e-12 && dist_err < 1e-12 && std::abs(ldb) < 1e-12 && std::abs(nb0) < 1e-12 &&
                    std::abs(nb05 - 0.5) < 1e-12 && std::abs(nb2 - 2) < 1e-12;
  return {pass, format("L_c %.1e, distortion O(n) vs O(n^2) %.1e, scaled L_db %.1e, L_nb {%.3g, %.3g, %.3g}", lc, dist_err,
                    ldb, nb0, nb05, nb2)};
}

double brute_nn(const Vec3& q, const std::vector<Vec3>& target) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : target) best = std::min(best, (q - t).norm());
  return best;
}

double reference_ssim(const ScalarMap& a, const ScalarMap& b) {
  const auto taps = gaussian_window();
  const int k = static_cast<int>(taps.size());
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  int windows = 0;
  for (int y0 = 0; y0 + k <= a.height; ++y0) {
    for (int x0 = 0; x0 + k <= a.width; ++x0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          const double w = taps[dy] * taps[dx];
          const double va = a.at(x0 + dx, y0 + dy), vb = b.at(x0 + dx, y0 + dy);
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  }
  return total / windows;
}

Outcome metric_oracles() {
  Rng rng(3);
  auto random_cloud = [&](size_t n) {
    PointCloud c;
    for (size_t i = 0; i < n; ++i) c.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    return c;
  };
  const auto a = random_cloud(500), b = random_cloud(500);
  double da = 0, db = 0;
  for (const auto& p : a.points) da += brute_nn(p, b.points);
  for (const auto& p : b.points) db += brute_nn(p, a.points);
  const bool cd_ok = chamfer(a, b) == 0.5 * (da / 500 + db / 500);

  bool comp_ok = true;
  const std::vector<double> ts{0.05, 0.1, 0.2};
  const auto got = completeness(a, b, ts);
  for (size_t k = 0; k < ts.size(); ++k) {
    size_t hit = 0;
    for (const auto& p : a.points) hit += brute_nn(p, b.points) < ts[k];
    comp_ok = comp_ok && got[k] == double(hit) / 500;
  }

  PointCloud plane;
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      plane.points.emplace_back(-1 + 0.02 * i + rng.uniform(-0.004, 0.004), -1 + 0.02 * j + rng.uniform(-0.004, 0.004), 0);
    }
  }
  PointCloud shifted = plane;
  for (auto& p : shifted.points) p.z() += 0.1;
  const auto m = m3c2(plane, shifted, M3c2Params{});
  const bool m3c2_ok = std::abs(m.mean_abs - 0.1) <= 0.002;

  double ssim_err = 0;
  for (int trial = 0; trial < 3; ++trial) {
    ColorMap x(23, 17), y(23, 17);
    for (auto& c : x.data) c = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
    for (size_t i = 0; i < y.size(); ++i) y[i] = 0.6 * x[i] + 0.4 * Vec3(rng.uniform(), rng.uniform(), rng.uniform());
    ssim_err = std::max(ssim_err, std::abs(ssim(x, y) - reference_ssim(to_gray(x), to_gray(y))));
  }

  const double v = 0.1;
  PointCloud ref;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) ref.points.emplace_back((i + 0.5) * v, (j + 0.5) * v, (k + 0.5) * v);
    }
  }
  PointCloud part;
  part.points.assign(ref.points.begin(), ref.points.begin() + 6);
  const double voc_case = voc(ref, part, v);

  const bool pass = cd_ok && comp_ok && m3c2_ok && ssim_err < 1e-9 && voc_case == 0.75;
  return {pass, format("chamfer %s, completeness %s, M3C2 offset %.5f, SSIM error %.1e, VOC %.4g", cd_ok ? "exact" : "differs",
                    comp_ok ? "exact" : "differs", m.mean_abs, ssim_err, voc_case)};
}

Outcome sphere_oracle() {
  const double r = 0.4, voxel = 0.02;
  auto check = [&](const TriangleMesh& mesh, double& worst, double& area_err) {
    worst = 0;
    for (const auto& p : mesh.vertices) worst = std::max(worst, std::abs(p.norm() - r));
    const double area = 4 * M_PI * r * r;
    area_err = std::abs(mesh.surface_area() - area) / area;
    return !mesh.empty() && worst <= voxel && area_err <= 0.05;
  };

  TsdfVolume vol(Vec3::Constant(-0.5), voxel, {51, 51, 51});
  for (int k = 0; k < 51; ++k) {
    for (int j = 0; j < 51; ++j) {
      for (int i = 0; i < 51; ++i) {
        const size_t idx = vol.index(i, j, k);
        vol.tsdf[idx] = float(std::clamp((vol.voxel_center(i, j, k).norm() - r) / vol.truncation, -1.0, 1.0));
        vol.weight[idx] = 1;
      }
    }
  }
  double w1, a1;
  const bool direct = check(marching_cubes(vol), w1, a1);

  // The same sphere fused from analytic depth maps of a camera shell.
  TsdfVolume fused(Vec3::Constant(-0.5), voxel, {51, 51, 51});
  int views = 0;
  for (int s = -1; s <= 1; ++s) {
    for (int t = 0; t < 8; ++t) {
      const double el = 0.6 * s, az = M_PI / 4 * t + 0.3 * s;
      const Vec3 eye = 2.0 * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      CameraView view = pt::identity_view(96, 96, 110);
      view.w2c = look_at(eye, Vec3::Zero(), std::abs(std::sin(el)) > 0.99 ? Vec3::UnitX() : Vec3::UnitZ());
      ScalarMap depth(96, 96, 0.0), alpha(96, 96, 0.0);
      for (int y = 0; y < 96; ++y) {
        for (int x = 0; x < 96; ++x) {
          const Ray ray = pixel_ray(view, x, y);
          const double bq = ray.origin.dot(ray.direction);
          const double disc = bq * bq - (ray.origin.squaredNorm() - r * r);
          if (disc < 0) continue;
          const double hit = -bq - std::sqrt(disc);
          depth.at(x, y) = view.to_camera(ray.origin + hit * ray.direction).z();
          alpha.at(x, y) = 1;
        }
      }
      integrate(fused, depth, ColorMap(96, 96, Vec3::Constant(0.5)), alpha, view);
      ++views;
    }
  }
  double w2, a2;
  const bool from_depth = check(marching_cubes(fused), w2, a2);
  return {direct && from_depth,
          format("analytic field: radius error %.4f, area error %.2f%%; fused from %d depth maps: radius error %.4f, area "
              "error %.2f%% (voxel %.2f)",
              w1, 100 * a1, views, w2, 100 * a2, voxel)};
}

// --------------------------------------------------------------- pipelines

class Pipeline {
 public:
  explicit Pipeline(Options o) : opt_(std::move(o)) {}

  int cli(std::vector<std::string> args) {
    args.insert(args.begin(), {"priorsplat", "--quiet", "--force", "--threads", std::to_string(opt_.threads)});
    return run_cli(args);
  }

  void require(int code, const std::string& what) {
    if (code != 0) throw Error(what + " exited with code " + std::to_string(code));
  }

  fs::path scene(const std::string& preset) {
    const fs::path dir = opt_.work / ("scene_" + preset);
    if (!(opt_.reuse && fs::exists(dir / "gt_cloud.ply"))) {
      require(cli({"--seed", "7", "synth", "--preset", preset, "--views", "16", "--res", "128x96", "--out", dir.string()}),
              "synth " + preset);
    }
    const fs::path priors = opt_.work / ("priors_" + preset);
    if (!(opt_.reuse && fs::exists(priors / "summary.json"))) {
      require(cli({"--seed", "7", "priors", "--scene", dir.string(), "--out", priors.string()}), "priors " + preset);
    }
    return dir;
  }

  // Trains, extracts and evaluates; returns the run directory.
  fs::path run(const std::string& name, const std::string& preset, std::vector<std::string> flags, bool evaluate = true,
               int iters = -1) {
    const fs::path sdir = scene(preset);
    const fs::path dir = opt_.work / name;
    const int n = iters > 0 ? iters : opt_.iters;
    const auto t0 = Clock::now();
    if (!(opt_.reuse && fs::exists(dir / "train_summary.json"))) {
      std::vector<std::string> args{"--seed", "7",  "train", "--scene", sdir.string(), "--priors",
                                    (opt_.work / ("priors_" + preset)).string(), "--iters", std::to_string(n),
                                    "--out", dir.string()};
      args.insert(args.end(), flags.begin(), flags.end());
      require(cli(args), "train " + name);
    }
    if (evaluate && !(opt_.reuse && fs::exists(dir / "report.json"))) {
      const json s = read_json_file(dir / "train_summary.json");
      const fs::path ckpt = dir / s.at("checkpoints").back().get<std::string>();
      require(cli({"extract", "--checkpoint", ckpt.string(), "--scene", sdir.string(), "--out", (dir / "mesh.ply").string()}),
              "extract " + name);
      require(cli({"--seed", "7", "eval", "--recon", (dir / "mesh.ply").string(), "--reference",
                   (sdir / "gt_cloud.ply").string(), "--scene", sdir.string(), "--renders", (dir / "renders").string(),
                   "--out", (dir / "report.json").string()}),
              "eval " + name);
    }
    elapsed_[name] += seconds_since(t0);
    return dir;
  }

  double elapsed(const std::string& name) const {
    auto it = elapsed_.find(name);
    return it == elapsed_.end() ? 0.0 : it->second;
  }

  const Options& options() const { return opt_; }

 private:
  Options opt_;
  std::map<std::string, double> elapsed_;
};

std::vector<double> total_losses(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c <= 6 && std::getline(ss, cell, ','); ++c) {
      if (c == 6) out.push_back(std::stod(cell));
    }
  }
  return out;
}

double completeness_at(const json& report, double t) {
  for (const auto& [k, v] : report.at("completeness_at").items()) {
    if (std::abs(std::stod(k) - t) < 1e-9) return v.get<double>();
  }
  throw Error("report has no completeness at " + std::to_string(t));
}

Outcome occlusion_benefit(Pipeline& p) {
  const auto t0 = Clock::now();
  const auto full = read_json_file(p.run("occluded_full", "occluded", {}) / "report.json");
  const auto base = read_json_file(
      p.run("occluded_baseline", "occluded",
            {"--init", "external:" + (p.options().work / "scene_occluded" / "sfm.ply").string(), "--no-depth-prior",
             "--no-normal-prior"}) /
      "report.json");
  const double secs = seconds_since(t0);
  const double cf = completeness_at(full, 0.1), cb = completeness_at(base, 0.1);
  const double vf = full.at("voc").get<double>(), vb = base.at("voc").get<double>();
  const bool pass = cf >= cb + 0.10 && vf > vb && secs < 20 * 60;
  return {pass, format("completeness@0.1 full %.4f vs baseline %.4f (+%.1f pp, need +10), VOC %.4f vs %.4f, %.0f s of 1200",
                    cf, cb, 100 * (cf - cb), vf, vb, secs)};
}

Outcome accuracy_analog(Pipeline& p) {
  const auto t0 = Clock::now();
  const auto full = read_json_file(p.run("open_full", "open", {}) / "report.json");
  const auto nodepth = read_json_file(p.run("open_no_depth", "open", {"--no-depth-prior"}) / "report.json");
  const double secs = seconds_since(t0);
  const auto views = read_cameras(p.options().work / "scene_open" / "cameras.jsonl");
  const double voxel = scene_extent(views) / 256;
  const double cf = full.at("cd").get<double>(), cn = nodepth.at("cd").get<double>();
  const bool pass = cf <= 2 * voxel && cf <= cn && secs < 20 * 60;
  return {pass, format("CD full %.5f (limit %.5f = 2 voxels), no depth prior %.5f, %.0f s of 1200", cf, 2 * voxel, cn, secs)};
}

Outcome primitive_count(Pipeline& p) {
  p.run("occluded_full", "occluded", {});
  p.run("occluded_building_only", "occluded", {"--mode", "building_only"}, false);
  const auto enhanced = read_json_file(p.options().work / "occluded_full" / "train_summary.json");
  const auto only = read_json_file(p.options().work / "occluded_building_only" / "train_summary.json");
  const double ne = enhanced.at("final_splats").get<double>(), no = only.at("final_splats").get<double>();
  return {no <= 0.5 * ne, format("building_only %.0f splats vs building_enhanced %.0f (ratio %.3f, need <= 0.5)", no, ne, no / ne)};
}

Outcome determinism(Pipeline& p) {
  // Short repeated run with densification active.
  const std::vector<std::string> flags{"--config", (p.options().work / "short.json").string()};
  {
    std::ofstream(p.options().work / "short.json") << json{{"densify_start_iter", 100}, {"densify_interval", 100}}.dump();
  }
  const fs::path a = p.run("repeat_a", "occluded", flags, true, 300);
  const fs::path b = p.run("repeat_b", "occluded", flags, true, 300);
  size_t files = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("checkpoint_", 0) != 0 && name != "report.json" && name != "losses.csv" && name != "mesh.ply") continue;
    ++files;
    differ += file_bytes(e.path()) != file_bytes(b / name);
  }

  // Threads 1 vs 4 on the trained splats.
  const json s = read_json_file(a / "train_summary.json");
  const SplatSet splats = load_checkpoint(a / s.at("checkpoints").back().get<std::string>());
  const auto scene = read_scene(p.options().work / "scene_occluded");
  bool render_same = true;
  double grad_diff = 0;
  for (size_t v = 0; v < scene.views.size(); v += 5) {
    RenderOptions ro;
    ro.with_fragments = true;
    ro.threads = 1;
    const RenderOutput r1 = render(splats, scene.views[v], ro);
    ro.threads = 4;
    const RenderOutput r4 = render(splats, scene.views[v], ro);
    render_same = render_same && r1.color.data == r4.color.data && r1.alpha.data == r4.alpha.data &&
                  r1.mean_depth.data == r4.mean_depth.data && r1.median_depth.data == r4.median_depth.data &&
                  r1.normal.data == r4.normal.data;
    const auto prior = read_prior_bundle(p.options().work / "priors_occluded", scene.views[v].id);
    const ViewLoss loss = evaluate_view_loss(r1, scene.views[v], scene.images[v], &prior, ViewLossOptions{});
    std::vector<SplatGrad> g1(splats.size(), SplatGrad{}), g4(splats.size(), SplatGrad{});
    backward(splats, scene.views[v], r1, loss.adjoints, g1, nullptr, 1);
    backward(splats, scene.views[v], r1, loss.adjoints, g4, nullptr, 4);
    for (size_t i = 0; i < splats.size(); ++i) {
      for (int k = 0; k < kSplatParams; ++k) grad_diff = std::max(grad_diff, std::abs(g1[i][k] - g4[i][k]));
    }
  }
  const bool pass = files >= 4 && differ == 0 && render_same && grad_diff <= 1e-12;
  return {pass, format("%zu/%zu output files bit-identical across reruns, renders %s across threads, max gradient difference "
                    "%.1e",
                    files - differ, files, render_same ? "identical" : "differ", grad_diff)};
}

Outcome convergence(Pipeline& p) {
  const auto totals = total_losses(p.run("open_full", "open", {}) / "losses.csv");
  if (totals.size() < 2000) return {false, format("only %zu loss rows", totals.size())};
  auto window = [&](size_t end) {
    double s = 0;
    for (size_t i = end - 200; i < end; ++i) s += totals[i];
    return s / 200;
  };
  const double early = window(200), late = window(2000);
  return {late < early, format("200-iteration moving average %.5f at iter 200, %.5f at iter 2000", early, late)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"priorsplat acceptance run"};
  Options opt;
  std::vector<int> only;
  bool strict = false;
  app.add_option("--work", opt.work, "working directory for pipeline runs");
  app.add_flag("--reuse", opt.reuse, "keep finished runs from an earlier invocation");
  app.add_option("--threads", opt.threads, "worker threads (0 = all cores)");
  app.add_option("--only", only, "criteria to run");
  app.add_flag("--strict", strict, "exit 1 when any criterion fails");
  CLI11_PARSE(app, argc, argv);
  if (!opt.reuse) fs::remove_all(opt.work);
  fs::create_directories(opt.work);
  spdlog::set_level(spdlog::level::warn);

  Pipeline pipeline(opt);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_check},
      {"raycast oracle", raycast_oracle},
      {"loss oracles", loss_oracles},
      {"metric oracles", metric_oracles},
      {"occlusion benefit", [&] { return occlusion_benefit(pipeline); }},
      {"accuracy analog", [&] { return accuracy_analog(pipeline); }},
      {"primitive count", [&] { return primitive_count(pipeline); }},
      {"sphere reconstruction", sphere_oracle},
      {"determinism", [&] { return determinism(pipeline); }},
      {"convergence", [&] { return convergence(pipeline); }},
  };
  const double limits[] = {60, 10, 5, 30, 0, 0, 0, 10, 0, 0};

  std::ofstream report(opt.work / "acceptance.txt");
  int failed = 0, ran = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (limits[i] > 0 && secs >= limits[i]) {
      o.pass = false;
      o.detail += format("; over the %.0f s limit", limits[i]);
    }
    failed += !o.pass;
    ++ran;
    const std::string line = format("%s %2d %-22s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id,
                                    criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fputs(line.c_str(), stdout);
    std::fflush(stdout);
    report << line << std::flush;
  }
  const std::string summary = format("%d of %d criteria passed\n", ran - failed, ran);
  std::fputs(summary.c_str(), stdout);
  report << summary;
  return strict && failed ? 1 : 0;
}
