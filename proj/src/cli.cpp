#include "priorsplat/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>

#include "CLI11.hpp"
#include "json.hpp"
#include "priorsplat/extract.hpp"
#include "priorsplat/mesh_io.hpp"
#include "priorsplat/metrics.hpp"
#include "priorsplat/ply.hpp"
#include "priorsplat/priors.hpp"
#include "priorsplat/renderer.hpp"
#include "priorsplat/synth.hpp"
#include "priorsplat/trainer.hpp"

namespace priorsplat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormats = R"(File formats (version 1):
  cameras.jsonl     one JSON object per line: id, width, height, fx, fy, cx, cy, w2c (16 row-major)
  images/<id>.png   8-bit sRGB targets
  *.ply meshes      binary little-endian; vertex x,y,z [red,green,blue]; face vertex_indices [red,green,blue]
  *.ply clouds      binary little-endian; vertex x,y,z [nx,ny,nz] [red,green,blue]
  depth_<id>.pfm    prior depth (camera z, 0 = invalid), PFM little-endian
  normal_<id>.pfm   prior world normals, PFM little-endian
  mask_<id>.png     prior mask, 8-bit 0/255
  init_cloud.ply    retained prior samples; x,y,z, nx,ny,nz, red,green,blue
  init_obs.jsonl    one {point_index, view_id, u, v} object per observation
  summary.json      retained count and per-view masked pixel counts
  checkpoint_<iter>.ply   splats: x,y,z, rot_0..3 (w,x,y,z), log_scale_0..1, opacity_logit, color_logit_0..2
  checkpoint_<iter>.ply.optim   exact optimizer state for --resume
  losses.csv        iter,L_c,L_d,L_n,L_db,L_nb,total,lambda_d,lambda_n,lambda_db,lambda_nb,view,splats
  report.json       psnr, ssim, cd, m3c2_*, completeness_at{threshold: fraction}, voc)";

struct Globals {
  int threads = 1;
  uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
  bool quiet = false;
};

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ValidationError("output path " + dir.string() + " is not a directory");
    if (!fs::is_empty(dir) && !force) {
      throw ValidationError("output directory " + dir.string() + " is not empty (use --force)");
    }
  }
  fs::create_directories(dir);
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ValidationError(what + " " + p.string() + " does not exist");
}

std::pair<int, int> parse_resolution(const std::string& s) {
  static const std::regex re(R"((\d+)[xX](\d+))");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw ValidationError("--res: expected WIDTHxHEIGHT, got '" + s + "'");
  const int w = std::stoi(m[1]), h = std::stoi(m[2]);
  if (w < 8 || h < 8 || w > 8192 || h > 8192) throw ValidationError("--res: dimensions must be in [8, 8192]");
  return {w, h};
}

std::vector<double> parse_thresholds(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size() || !(v > 0)) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError("--thresholds: '" + item + "' is not a positive number");
    }
  }
  if (out.empty()) throw ValidationError("--thresholds: empty list");
  std::sort(out.begin(), out.end());
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

bool ply_has_faces(const fs::path& path) {
  const auto file = ply::read(path);
  const auto* faces = file.find("face");
  return faces && faces->count > 0;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string preset = "open";
  int views = 16;
  std::string res = "128x96";
  fs::path out;
};

int cmd_synth(const SynthArgs& a, const Globals& g) {
  SynthParams p;
  p.preset = parse_preset(a.preset);
  if (a.views < 4) throw ValidationError("--views must be >= 4");
  p.n_views = a.views;
  std::tie(p.width, p.height) = parse_resolution(a.res);
  p.seed = g.seed;
  p.threads = g.threads;
  prepare_output_dir(a.out, g.force);
  const auto scene = generate_scene(p);
  write_scene(a.out, scene);
  spdlog::info("wrote {} views to {}", scene.views.size(), a.out.string());
  return kExitOk;
}

// ---------------------------------------------------------------- priors

struct PriorsArgs {
  fs::path scene;
  double eps = 0.05;
  int k = 2;
  size_t samples = 20000;
  fs::path out;
};

int cmd_priors(const PriorsArgs& a, const Globals& g) {
  if (!(a.eps > 0)) throw ValidationError("--eps must be > 0");
  if (a.k < 1) throw ValidationError("--k must be >= 1");
  if (a.samples < 1) throw ValidationError("--samples must be >= 1");
  require_file(a.scene / "cameras.jsonl", "cameras file");
  require_file(a.scene / "lod2.ply", "building mesh");
  const auto views = read_cameras(a.scene / "cameras.jsonl");
  const auto mesh = read_mesh(a.scene / "lod2.ply");
  if (a.k > static_cast<int>(views.size())) {
    throw EmptyResultError("--k " + std::to_string(a.k) + " exceeds the " + std::to_string(views.size()) +
                           " available views; no point can be retained");
  }
  prepare_output_dir(a.out, g.force);

  InitCloudParams ip;
  ip.eps = a.eps;
  ip.k = a.k;
  ip.n_samples = a.samples;
  ip.seed = g.seed;
  ip.threads = g.threads;
  const auto cloud = build_init_cloud(mesh, views, ip);

  const BvhIndex bvh(mesh);
  json summary;
  summary["retained"] = cloud.size();
  summary["samples"] = a.samples;
  summary["eps"] = a.eps;
  summary["k"] = a.k;
  json masked = json::object();
  for (const auto& v : views) {
    const auto bundle = raycast_priors(bvh, v, g.threads);
    write_prior_bundle(a.out, bundle);
    masked[v.id] = bundle.masked_count();
  }
  summary["masked_pixels"] = masked;
  write_init_cloud(a.out / "init_cloud.ply", a.out / "init_obs.jsonl", cloud, views);
  write_json(a.out / "summary.json", summary);
  spdlog::info("retained {} of {} samples", cloud.size(), a.samples);
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  fs::path scene;
  fs::path priors;
  fs::path config;
  std::string mode;
  int iters = 0;
  bool no_depth_prior = false;
  bool no_normal_prior = false;
  std::string init;
  fs::path resume;
  fs::path out;
};

void write_renders(const fs::path& dir, const SplatSet& splats, const std::vector<CameraView>& views,
                   const std::vector<ColorMap>& targets, int threads) {
  fs::create_directories(dir / "renders");
  RenderOptions ro;
  ro.threads = threads;
  const size_t shown = std::min<size_t>(4, views.size());
  const int w = views.front().width, h = views.front().height;
  ColorMap grid(int(shown) * w, 2 * h, Vec3::Zero());
  for (size_t j = 0; j < views.size(); ++j) {
    const auto out = render(splats, views[j], ro);
    write_png_srgb(dir / "renders" / (views[j].id + ".png"), out.color);
    if (j >= shown || !out.color.same_shape(w, h)) continue;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        grid.at(int(j) * w + x, y) = targets[j].at(x, y);
        grid.at(int(j) * w + x, h + y) = out.color.at(x, y).cwiseMin(1.0).cwiseMax(0.0);
      }
    }
  }
  write_png_srgb(dir / "render_grid.png", grid);
}

struct PreparedTraining {
  TrainInputs inputs;
  TrainConfig config;
};

// Loads everything a training run needs, failing before any compute.
PreparedTraining prepare_training(const fs::path& scene_dir, const fs::path& priors_dir, TrainConfig config) {
  config.validate();
  const auto scene = read_scene(scene_dir);
  PreparedTraining pt;
  pt.inputs.views = scene.views;
  pt.inputs.targets = scene.images;
  pt.inputs.scene_extent = scene_extent(scene.views);

  const bool need_priors = config.mode == TrainMode::BuildingOnly || config.use_depth_prior ||
                           config.use_normal_prior || config.init_source == InitSource::PriorCloud;
  if (need_priors) {
    if (priors_dir.empty()) throw ValidationError("--priors is required for this configuration");
    if (!fs::is_directory(priors_dir)) throw ValidationError("priors directory " + priors_dir.string() + " does not exist");
    for (const auto& v : scene.views) {
      for (const std::string& f : {"depth_" + v.id + ".pfm", "normal_" + v.id + ".pfm", "mask_" + v.id + ".png"}) {
        require_file(priors_dir / f, "prior");
      }
    }
    for (const auto& v : scene.views) pt.inputs.priors.push_back(read_prior_bundle(priors_dir, v.id));
  }
  if (config.init_source == InitSource::PriorCloud) {
    require_file(priors_dir / "init_cloud.ply", "init cloud");
    require_file(priors_dir / "init_obs.jsonl", "init observations");
    pt.inputs.init_cloud = read_init_cloud(priors_dir / "init_cloud.ply", priors_dir / "init_obs.jsonl", scene.views);
  } else {
    fs::path cloud = config.external_cloud;
    if (cloud.is_relative() && !fs::exists(cloud)) cloud = scene_dir / cloud;
    require_file(cloud, "external cloud");
    pt.inputs.init_cloud = init_cloud_from_points(read_ply_cloud(cloud));
  }
  if (pt.inputs.init_cloud.size() < 4) throw EmptyResultError("init cloud has fewer than 4 points");
  pt.config = std::move(config);
  return pt;
}

void apply_init_flag(TrainConfig& c, const std::string& init) {
  if (init.empty()) return;
  if (init == "prior") {
    c.init_source = InitSource::PriorCloud;
  } else if (init.rfind("external:", 0) == 0 && init.size() > 9) {
    c.init_source = InitSource::ExternalCloud;
    c.external_cloud = init.substr(9);
  } else {
    throw ValidationError("--init: expected 'prior' or 'external:<cloud.ply>', got '" + init + "'");
  }
}

json run_and_write(const PreparedTraining& pt, const fs::path& out, std::optional<TrainState> resume, int threads) {
  write_json(out / "config.json", pt.config.to_json());
  const auto res = run_training(pt.inputs, pt.config, out, std::move(resume));
  write_renders(out, res.state.splats, pt.inputs.views, pt.inputs.targets, threads);
  json summary;
  summary["mode"] = to_string(pt.config.mode);
  summary["iters"] = res.state.iter;
  summary["final_splats"] = res.state.splats.size();
  summary["init_points"] = pt.inputs.init_cloud.size();
  std::vector<std::string> ckpts;
  for (const auto& c : res.checkpoints) ckpts.push_back(c.filename().string());
  summary["checkpoints"] = ckpts;
  write_json(out / "train_summary.json", summary);
  spdlog::info("final splat count {}", res.state.splats.size());
  return summary;
}

int cmd_train(const TrainArgs& a, const Globals& g) {
  TrainConfig c = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
  if (!a.mode.empty()) c.mode = parse_train_mode(a.mode);
  if (a.iters > 0) c.total_iters = a.iters;
  if (a.no_depth_prior) c.use_depth_prior = false;
  if (a.no_normal_prior) c.use_normal_prior = false;
  apply_init_flag(c, a.init);
  if (g.seed_set) c.seed = g.seed;
  c.threads = g.threads;
  auto pt = prepare_training(a.scene, a.priors, c);
  std::optional<TrainState> resume;
  if (!a.resume.empty()) {
    require_file(a.resume, "checkpoint");
    resume = load_train_state(a.resume);
    if (resume->splats.size() == 0) throw ValidationError("resume checkpoint has no splats");
    if (!fs::exists(a.out)) fs::create_directories(a.out);
  } else {
    prepare_output_dir(a.out, g.force);
  }
  run_and_write(pt, a.out, std::move(resume), g.threads);
  return kExitOk;
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
  fs::path checkpoint;
  fs::path scene;
  double voxel = 0;
  fs::path out;
};

ExtractResult extract_from_checkpoint(const fs::path& checkpoint, const fs::path& scene_dir, double voxel,
                                      int threads) {
  require_file(checkpoint, "checkpoint");
  require_file(scene_dir / "cameras.jsonl", "cameras file");
  const auto views = read_cameras(scene_dir / "cameras.jsonl");
  const SplatSet splats = load_checkpoint(checkpoint);
  ExtractParams ep;
  ep.voxel_size = voxel;
  ep.scene_extent = scene_extent(views);
  ep.threads = threads;
  auto res = extract_mesh(splats, views, ep);
  if (res.mesh.empty()) spdlog::warn("extracted mesh is empty ({} splats in checkpoint)", splats.size());
  return res;
}

int cmd_extract(const ExtractArgs& a, const Globals& g) {
  if (a.voxel < 0) throw ValidationError("--voxel must be > 0");
  if (fs::exists(a.out) && !g.force) throw ValidationError("output " + a.out.string() + " exists (use --force)");
  const auto res = extract_from_checkpoint(a.checkpoint, a.scene, a.voxel, g.threads);
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  write_ply_mesh(a.out, res.mesh);
  spdlog::info("mesh: {} vertices, {} faces, {} boundary edges, voxel {:.5f}", res.mesh.vertices.size(),
               res.mesh.faces.size(), res.boundary_edges, res.voxel_size);
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  fs::path recon;
  fs::path reference;
  fs::path scene;
  fs::path renders;
  std::string thresholds = "0.05,0.1,0.2";
  double voc_voxel = 0.05;
  int voc_min_points = 1;
  size_t samples = 50000;
  fs::path out;
  fs::path csv;
  std::string label = "run";
};

PointCloud load_as_cloud(const fs::path& path, size_t samples, uint64_t seed) {
  require_file(path, "input");
  const std::string ext = path.extension().string();
  if (ext == ".obj" || (ext == ".ply" && ply_has_faces(path))) {
    return cloud_from_mesh(read_mesh(path), samples, seed);
  }
  return read_ply_cloud(path);
}

MetricReport evaluate_files(const EvalArgs& a, const Globals& g) {
  EvalParams ep;
  ep.thresholds = parse_thresholds(a.thresholds);
  if (!(a.voc_voxel > 0)) throw ValidationError("--voc-voxel must be > 0");
  ep.voc_voxel = a.voc_voxel;
  ep.voc_min_points = a.voc_min_points;
  ep.mesh_samples = a.samples;
  ep.seed = g.seed;
  ep.m3c2.seed = g.seed;
  ep.threads = g.threads;
  require_file(a.recon, "reconstruction");
  require_file(a.reference, "reference");
  std::vector<std::pair<ColorMap, ColorMap>> images;
  if (!a.renders.empty()) {
    if (a.scene.empty()) throw ValidationError("--renders requires --scene");
    const auto views = read_cameras(a.scene / "cameras.jsonl");
    for (const auto& v : views) {
      require_file(a.renders / (v.id + ".png"), "render");
      require_file(a.scene / "images" / (v.id + ".png"), "image");
    }
    for (const auto& v : views) {
      images.emplace_back(read_png_srgb(a.renders / (v.id + ".png")),
                          read_png_srgb(a.scene / "images" / (v.id + ".png")));
    }
  }
  const auto recon = load_as_cloud(a.recon, a.samples, g.seed);
  const auto reference = load_as_cloud(a.reference, a.samples, g.seed + 1);
  return evaluate(recon, reference, images, ep);
}

void append_csv(const fs::path& path, const std::string& header, const std::string& row) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot write " + path.string());
  if (fresh) out << header << "\n";
  out << row << "\n";
}

int cmd_eval(const EvalArgs& a, const Globals& g) {
  const auto report = evaluate_files(a, g);
  const json j = report.to_json();
  if (!a.out.empty()) {
    if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
    write_json(a.out, j);
  }
  if (!a.csv.empty()) append_csv(a.csv, MetricReport::csv_header(), report.csv_row(a.label));
  if (a.out.empty()) std::cout << j.dump(2) << std::endl;
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

struct SweepRow {
  std::string name;
  json overrides = json::object();
};

SweepRow named_row(const std::string& name) {
  SweepRow r{name};
  if (name == "full") return r;
  if (name == "sfm_init") {
    r.overrides = {{"init_source", "external_cloud"}, {"external_cloud", "sfm.ply"}};
  } else if (name == "no_depth_prior") {
    r.overrides = {{"use_depth_prior", false}};
  } else if (name == "no_normal_prior") {
    r.overrides = {{"use_normal_prior", false}};
  } else if (name == "baseline") {
    r.overrides = {{"init_source", "external_cloud"},
                   {"external_cloud", "sfm.ply"},
                   {"use_depth_prior", false},
                   {"use_normal_prior", false}};
  } else {
    throw ValidationError("unknown sweep row '" + name +
                          "' (expected sfm_init, no_depth_prior, no_normal_prior, full, baseline or an object)");
  }
  return r;
}

int cmd_sweep(const fs::path& matrix_path, const fs::path& out_override, const Globals& g) {
  const json m = read_json(matrix_path);
  if (!m.is_object()) throw ValidationError("sweep matrix must be a JSON object");
  const fs::path base = matrix_path.parent_path();
  auto path_key = [&](const char* key) -> fs::path {
    if (!m.contains(key)) return {};
    fs::path p = m.at(key).get<std::string>();
    return p.is_relative() ? base / p : p;
  };
  const fs::path scene_dir = path_key("scene_dir");
  fs::path priors_dir = path_key("priors_dir");
  const fs::path out = out_override.empty() ? path_key("out_dir") : out_override;
  if (scene_dir.empty()) throw ValidationError("sweep matrix needs scene_dir");
  if (out.empty()) throw ValidationError("sweep matrix needs out_dir (or --out)");
  if (!m.contains("rows") || !m.at("rows").is_array() || m.at("rows").empty()) {
    throw ValidationError("sweep matrix has no rows");
  }
  const std::set<std::string> known = {"scene_dir", "priors_dir", "out_dir", "rows", "config",
                                       "thresholds", "voc_voxel", "samples"};
  for (const auto& [k, v] : m.items()) {
    if (!known.count(k)) throw ValidationError("unknown sweep key '" + k + "'");
  }
  std::vector<SweepRow> rows;
  for (const auto& r : m.at("rows")) {
    if (r.is_string()) {
      rows.push_back(named_row(r.get<std::string>()));
    } else if (r.is_object() && r.contains("name")) {
      SweepRow row = r.contains("base") ? named_row(r.at("base").get<std::string>()) : SweepRow{};
      row.name = r.at("name").get<std::string>();
      for (const auto& [k, v] : r.items()) {
        if (k != "name" && k != "base") row.overrides[k] = v;
      }
      rows.push_back(row);
    } else {
      throw ValidationError("sweep rows must be names or objects with a name");
    }
  }
  json base_config = m.value("config", json::object());
  if (g.seed_set) base_config["seed"] = g.seed;
  base_config["threads"] = g.threads;

  // Validate every row configuration before training anything.
  std::vector<TrainConfig> configs;
  for (const auto& r : rows) {
    json cj = base_config;
    for (const auto& [k, v] : r.overrides.items()) cj[k] = v;
    TrainConfig c = TrainConfig::from_json(cj);
    if (c.init_source == InitSource::ExternalCloud && fs::path(c.external_cloud).is_relative()) {
      c.external_cloud = (scene_dir / c.external_cloud).string();
    }
    c.validate();
    configs.push_back(c);
  }
  read_scene(scene_dir);
  fs::create_directories(out);

  if (priors_dir.empty()) {
    priors_dir = out / "priors";
    if (!fs::exists(priors_dir / "summary.json")) {
      PriorsArgs pa;
      pa.scene = scene_dir;
      pa.out = priors_dir;
      Globals pg = g;
      pg.force = true;
      cmd_priors(pa, pg);
    }
  }

  EvalArgs ea;
  ea.reference = scene_dir / "gt_cloud.ply";
  if (m.contains("thresholds")) {
    std::string t;
    for (const auto& v : m.at("thresholds")) t += (t.empty() ? "" : ",") + std::to_string(v.get<double>());
    ea.thresholds = t;
  }
  ea.voc_voxel = m.value("voc_voxel", ea.voc_voxel);
  ea.samples = m.value("samples", ea.samples);

  int failed = 0;
  const fs::path table = out / "ablation.csv";
  std::ofstream csv(table);
  csv << "row," << MetricReport::csv_header().substr(6) << ",splats,status\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const fs::path dir = out / rows[i].name;
    const fs::path report_path = dir / "report.json";
    std::string status = "ok";
    MetricReport report;
    size_t splats = 0;
    try {
      if (fs::exists(report_path) && fs::exists(dir / "train_summary.json")) {
        spdlog::info("row {}: already complete, skipping", rows[i].name);
        report = MetricReport::from_json(read_json(report_path));
        splats = read_json(dir / "train_summary.json").at("final_splats").get<size_t>();
        status = "cached";
      } else {
        spdlog::info("row {}: training", rows[i].name);
        prepare_output_dir(dir, true);
        const auto pt = prepare_training(scene_dir, priors_dir, configs[i]);
        const json summary = run_and_write(pt, dir, std::nullopt, g.threads);
        splats = summary.at("final_splats").get<size_t>();
        const fs::path last = dir / summary.at("checkpoints").back().get<std::string>();
        const auto ex = extract_from_checkpoint(last, scene_dir, 0, g.threads);
        write_ply_mesh(dir / "mesh.ply", ex.mesh);
        ea.recon = dir / "mesh.ply";
        ea.scene = scene_dir;
        ea.renders = dir / "renders";
        report = ex.mesh.empty() ? MetricReport{} : evaluate_files(ea, g);
        if (ex.mesh.empty()) throw EmptyResultError("extracted mesh is empty");
        write_json(report_path, report.to_json());
      }
    } catch (const std::exception& e) {
      spdlog::error("row {} failed: {}", rows[i].name, e.what());
      status = "failed";
      ++failed;
    }
    std::string row = report.csv_row(rows[i].name);
    csv << row << ',' << splats << ',' << status << "\n";
    csv.flush();
  }
  spdlog::info("wrote {}", table.string());
  return failed ? kExitPartial : kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  static const auto logger = [] {
    auto l = spdlog::stderr_color_mt("priorsplat");
    spdlog::set_default_logger(l);
    return l;
  }();
  spdlog::set_level(spdlog::level::info);
  CLI::App app{"priorsplat: building-prior surface splatting pipeline"};
  app.footer(kFormats);
  app.require_subcommand(1);
  Globals g;
  std::string seed_str;
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  auto* seed_opt = app.add_option("--seed", g.seed, "seed for every random choice");
  app.add_flag("--force", g.force, "overwrite existing outputs");
  app.add_flag("--quiet", g.quiet, "only log warnings and errors");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene directory");
  synth->add_option("--preset", sa.preset, "open | occluded | sparse");
  synth->add_option("--views", sa.views, "number of cameras");
  synth->add_option("--res", sa.res, "WIDTHxHEIGHT");
  synth->add_option("--out", sa.out, "scene directory")->required();

  PriorsArgs pa;
  auto* priors = app.add_subcommand("priors", "raycast prior maps and build the init cloud");
  priors->add_option("--scene", pa.scene, "scene directory")->required();
  priors->add_option("--eps", pa.eps, "visibility depth tolerance");
  priors->add_option("--k", pa.k, "minimum number of views");
  priors->add_option("--samples", pa.samples, "surface samples");
  priors->add_option("--out", pa.out, "priors directory")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "optimize splats");
  train->add_option("--scene", ta.scene, "scene directory")->required();
  train->add_option("--priors", ta.priors, "priors directory");
  train->add_option("--config", ta.config, "JSON config with flat TrainConfig keys");
  train->add_option("--mode", ta.mode, "building_only | building_enhanced");
  train->add_option("--iters", ta.iters, "total iterations");
  train->add_flag("--no-depth-prior", ta.no_depth_prior, "disable the prior depth loss");
  train->add_flag("--no-normal-prior", ta.no_normal_prior, "disable the prior normal loss");
  train->add_option("--init", ta.init, "prior | external:<cloud.ply>");
  train->add_option("--resume", ta.resume, "checkpoint to continue from");
  train->add_option("--out", ta.out, "output directory")->required();

  ExtractArgs xa;
  auto* extract = app.add_subcommand("extract", "fuse median depth into a mesh");
  extract->add_option("--checkpoint", xa.checkpoint, "checkpoint PLY")->required();
  extract->add_option("--scene", xa.scene, "scene directory")->required();
  extract->add_option("--voxel", xa.voxel, "voxel size (default scene extent / 256)");
  extract->add_option("--out", xa.out, "output mesh PLY")->required();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "compute the metric report");
  eval->add_option("--recon", ea.recon, "reconstructed mesh or cloud")->required();
  eval->add_option("--reference", ea.reference, "reference cloud or mesh")->required();
  eval->add_option("--scene", ea.scene, "scene directory (for image metrics)");
  eval->add_option("--renders", ea.renders, "directory of <id>.png renders");
  eval->add_option("--thresholds", ea.thresholds, "completeness thresholds, comma separated");
  eval->add_option("--voc-voxel", ea.voc_voxel, "VOC voxel size");
  eval->add_option("--voc-min-points", ea.voc_min_points, "VOC occupancy threshold");
  eval->add_option("--samples", ea.samples, "mesh surface samples");
  eval->add_option("--out", ea.out, "report JSON (stdout when omitted)");
  eval->add_option("--csv", ea.csv, "CSV file to append a row to");
  eval->add_option("--label", ea.label, "CSV row label");

  fs::path matrix, sweep_out;
  auto* sweep = app.add_subcommand("sweep", "run the ablation matrix");
  sweep->add_option("--matrix", matrix, "sweep JSON")->required();
  sweep->add_option("--out", sweep_out, "output directory (overrides out_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }
  g.seed_set = seed_opt->count() > 0;
  g.threads = resolve_threads(g.threads);
  if (g.quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (*synth) return cmd_synth(sa, g);
    if (*priors) return cmd_priors(pa, g);
    if (*train) return cmd_train(ta, g);
    if (*extract) return cmd_extract(xa, g);
    if (*eval) return cmd_eval(ea, g);
    if (*sweep) return cmd_sweep(matrix, sweep_out, g);
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const ParseError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const EmptyResultError& e) {
    spdlog::error("{}", e.what());
    return kExitEmpty;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitPartial;
  }
  return kExitValidation;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  std::vector<std::string> copy = args;
  for (auto& s : copy) argv.push_back(s.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace priorsplat
