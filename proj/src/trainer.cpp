#include "priorsplat/trainer.hpp"

#include <spdlog/spdlog.h>

#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>

#include "priorsplat/mesh_io.hpp"

namespace priorsplat {

const char* to_string(TrainMode m) {
  return m == TrainMode::BuildingOnly ? "building_only" : "building_enhanced";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "building_only") return TrainMode::BuildingOnly;
  if (s == "building_enhanced") return TrainMode::BuildingEnhanced;
  throw ValidationError("unknown mode '" + s + "' (expected building_only or building_enhanced)");
}

Schedule TrainConfig::schedule() const {
  Schedule s;
  s.total_iters = total_iters;
  s.phase1_end = std::clamp(static_cast<int>(std::lround(phase1_frac * total_iters)), 1, std::max(1, total_iters));
  s.lambda_d = WeightRamp{lambda_d, lambda_d, s.phase1_end, -1};
  s.lambda_n = WeightRamp{lambda_n, lambda_n, s.phase1_end, -1};
  s.lambda_db = WeightRamp{lambda_db_start, lambda_db_end, 0, s.phase1_end};
  s.lambda_nb = WeightRamp{lambda_nb_start, lambda_nb_end, 0, s.phase1_end};
  return s;
}

int TrainConfig::densify_end() const {
  return densify.end_iter >= 0 ? densify.end_iter : static_cast<int>(0.75 * total_iters);
}

void TrainConfig::validate() const {
  if (total_iters < 1) throw ValidationError("total_iters must be >= 1");
  if (!(phase1_frac > 0 && phase1_frac <= 1)) throw ValidationError("phase1_frac must be in (0, 1]");
  schedule().validate();
  const std::pair<const char*, double> rates[] = {{"lr_center", lr.center}, {"lr_rot", lr.rot},
                                                  {"lr_scale", lr.scale}, {"lr_opacity", lr.opacity},
                                                  {"lr_color", lr.color}};
  for (const auto& [name, v] : rates) {
    if (!(v >= 0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " must be finite and >= 0");
  }
  if (!(lr.center_final_factor > 0)) throw ValidationError("lr_center_final_factor must be > 0");
  if (densify.interval < 1) throw ValidationError("densify_interval must be >= 1");
  if (densify.start_iter < 0) throw ValidationError("densify_start_iter must be >= 0");
  if (densify.end_iter >= 0 && (densify.start_iter > densify.end_iter || densify.end_iter > total_iters)) {
    throw ValidationError("densify window must satisfy 0 <= start <= end <= total_iters");
  }
  if (init_source == InitSource::ExternalCloud && external_cloud.empty()) {
    throw ValidationError("external_cloud init requires a point cloud path");
  }
  if (threads < 0) throw ValidationError("threads must be >= 0");
}

namespace {

using nlohmann::json;

template <typename T>
void read_key(const json& j, const char* key, T& out, std::set<std::string>& seen) {
  if (!j.contains(key)) return;
  seen.insert(key);
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  TrainConfig c;
  std::set<std::string> seen;
  std::string mode = to_string(c.mode);
  std::string init = "prior_cloud";
  read_key(j, "mode", mode, seen);
  read_key(j, "total_iters", c.total_iters, seen);
  read_key(j, "phase1_frac", c.phase1_frac, seen);
  read_key(j, "lambda_d", c.lambda_d, seen);
  read_key(j, "lambda_n", c.lambda_n, seen);
  read_key(j, "lambda_db_start", c.lambda_db_start, seen);
  read_key(j, "lambda_db_end", c.lambda_db_end, seen);
  read_key(j, "lambda_nb_start", c.lambda_nb_start, seen);
  read_key(j, "lambda_nb_end", c.lambda_nb_end, seen);
  read_key(j, "lr_center", c.lr.center, seen);
  read_key(j, "lr_center_final_factor", c.lr.center_final_factor, seen);
  read_key(j, "lr_rot", c.lr.rot, seen);
  read_key(j, "lr_scale", c.lr.scale, seen);
  read_key(j, "lr_opacity", c.lr.opacity, seen);
  read_key(j, "lr_color", c.lr.color, seen);
  read_key(j, "densify_interval", c.densify.interval, seen);
  read_key(j, "densify_grad_threshold", c.densify.grad_threshold, seen);
  read_key(j, "densify_opacity_prune", c.densify.opacity_prune, seen);
  read_key(j, "densify_start_iter", c.densify.start_iter, seen);
  read_key(j, "densify_end_iter", c.densify.end_iter, seen);
  read_key(j, "densify_split_scale_frac", c.densify.split_scale_frac, seen);
  read_key(j, "densify_max_splats", c.densify.max_splats, seen);
  read_key(j, "seed", c.seed, seen);
  read_key(j, "use_depth_prior", c.use_depth_prior, seen);
  read_key(j, "use_normal_prior", c.use_normal_prior, seen);
  read_key(j, "init_source", init, seen);
  read_key(j, "external_cloud", c.external_cloud, seen);
  read_key(j, "threads", c.threads, seen);
  for (const auto& [key, value] : j.items()) {
    if (!seen.count(key)) throw ValidationError("unknown config key '" + key + "'");
  }
  c.mode = parse_train_mode(mode);
  if (init == "prior_cloud") {
    c.init_source = InitSource::PriorCloud;
  } else if (init == "external_cloud") {
    c.init_source = InitSource::ExternalCloud;
  } else {
    throw ValidationError("init_source must be prior_cloud or external_cloud");
  }
  return c;
}

json TrainConfig::to_json() const {
  json j;
  j["mode"] = to_string(mode);
  j["total_iters"] = total_iters;
  j["phase1_frac"] = phase1_frac;
  j["lambda_d"] = lambda_d;
  j["lambda_n"] = lambda_n;
  j["lambda_db_start"] = lambda_db_start;
  j["lambda_db_end"] = lambda_db_end;
  j["lambda_nb_start"] = lambda_nb_start;
  j["lambda_nb_end"] = lambda_nb_end;
  j["lr_center"] = lr.center;
  j["lr_center_final_factor"] = lr.center_final_factor;
  j["lr_rot"] = lr.rot;
  j["lr_scale"] = lr.scale;
  j["lr_opacity"] = lr.opacity;
  j["lr_color"] = lr.color;
  j["densify_interval"] = densify.interval;
  j["densify_grad_threshold"] = densify.grad_threshold;
  j["densify_opacity_prune"] = densify.opacity_prune;
  j["densify_start_iter"] = densify.start_iter;
  j["densify_end_iter"] = densify.end_iter;
  j["densify_split_scale_frac"] = densify.split_scale_frac;
  j["densify_max_splats"] = densify.max_splats;
  j["seed"] = seed;
  j["use_depth_prior"] = use_depth_prior;
  j["use_normal_prior"] = use_normal_prior;
  j["init_source"] = init_source == InitSource::PriorCloud ? "prior_cloud" : "external_cloud";
  j["external_cloud"] = external_cloud;
  j["threads"] = threads;
  return j;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return TrainConfig::from_json(j);
}

MaskMap loss_region(const RenderOutput& out, const PriorBundle* prior, TrainMode mode) {
  MaskMap region(out.width, out.height, 1);
  if (mode != TrainMode::BuildingOnly) return region;
  for (size_t i = 0; i < region.size(); ++i) region[i] = prior && prior->mask[i] ? 1 : 0;
  return region;
}

ViewLoss evaluate_view_loss(const RenderOutput& out, const CameraView& view, const ColorMap& target,
                            const PriorBundle* prior, const ViewLossOptions& opts) {
  ViewLoss res;
  res.region = opts.region_override ? *opts.region_override : loss_region(out, prior, opts.mode);
  res.weights = opts.weights;
  if (!prior || !opts.use_depth_prior) res.weights.lambda_db = 0;
  if (!prior || !opts.use_normal_prior) res.weights.lambda_nb = 0;
  const LossWeights& w = res.weights;
  MapAdjoints& adj = res.adjoints;
  adj = MapAdjoints::zeros(out.width, out.height, out.fragments.size());

  auto add_map = [](auto& dst, const auto& src, double scale) {
    if (!src.size()) return;
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  };

  bool any = false;
  for (uint8_t v : res.region.data) any = any || v;
  if (any) {
    auto pc = photometric_loss(out.color, target, res.region);
    res.components.l_c = pc.loss;
    adj.color = std::move(pc.grad);
  }

  const auto dist = depth_distortion_loss(out, res.region);
  res.components.l_d = dist.loss;
  if (w.lambda_d > 0) {
    for (size_t k = 0; k < dist.grad_omega.size(); ++k) {
      adj.frag_omega[k] += w.lambda_d * dist.grad_omega[k];
      adj.frag_z[k] += w.lambda_d * dist.grad_z[k];
    }
  }

  const auto nc = normal_consistency_loss(out, view, res.region);
  res.components.l_n = nc.loss;
  if (w.lambda_n > 0) {
    add_map(adj.alpha, nc.grad_alpha, w.lambda_n);
    add_map(adj.mean_depth, nc.grad_depth, w.lambda_n);
    add_map(adj.normal_sum, nc.grad_normal, w.lambda_n);
  }

  if (prior) {
    const auto db = prior_depth_loss(out.mean_depth, *prior, opts.depth_scale, &res.depth_scale);
    res.components.l_db = db.loss;
    if (w.lambda_db > 0) add_map(adj.mean_depth, db.grad_depth, w.lambda_db);
    const auto nb = prior_normal_loss(out.normal_sum, *prior);
    res.components.l_nb = nb.loss;
    if (w.lambda_nb > 0) add_map(adj.normal_sum, nb.grad_normal, w.lambda_nb);
  }
  res.total = total_loss(res.components, w);
  return res;
}

TrainState init_train_state(const TrainInputs& inputs, const TrainConfig& config) {
  TrainState st;
  InitPointCloud cloud = inputs.init_cloud;
  if (cloud.observations.size() == cloud.size() && !inputs.targets.empty()) {
    for (size_t i = 0; i < cloud.size(); ++i) {
      Vec3 sum = Vec3::Zero();
      int n = 0;
      for (const auto& o : cloud.observations[i]) {
        if (o.view < 0 || size_t(o.view) >= inputs.targets.size()) continue;
        const ColorMap& img = inputs.targets[o.view];
        const int x = std::clamp(static_cast<int>(o.u), 0, img.width - 1);
        const int y = std::clamp(static_cast<int>(o.v), 0, img.height - 1);
        sum += img.at(x, y);
        ++n;
      }
      if (n > 0) cloud.colors[i] = sum / n;
    }
  }
  st.splats = init_splats(cloud, inputs.scene_extent);
  st.adam_m.assign(st.splats.size(), SplatGrad{});
  st.adam_v.assign(st.splats.size(), SplatGrad{});
  st.rng = Rng(config.seed);
  st.iter = 0;
  return st;
}

namespace {

std::vector<int> eligible_views(const TrainInputs& inputs, const TrainConfig& config) {
  std::vector<int> out;
  for (size_t j = 0; j < inputs.views.size(); ++j) {
    if (config.mode == TrainMode::BuildingOnly) {
      if (inputs.priors.empty() || inputs.priors[j].masked_count() == 0) continue;
    }
    out.push_back(static_cast<int>(j));
  }
  if (out.empty()) throw ValidationError("no training views are eligible (building_only needs prior masks)");
  return out;
}

double center_lr(const TrainConfig& config, double extent, int iter) {
  const double frac = std::clamp(double(iter) / std::max(1, config.total_iters), 0.0, 1.0);
  return config.lr.center * extent * std::exp(std::log(config.lr.center_final_factor) * frac);
}

}  // namespace

void apply_adam(TrainState& st, const TrainConfig& config, double extent) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-15;
  const int t = st.iter + 1;
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  std::array<double, kSplatParams> lr{};
  const double lc = center_lr(config, extent, st.iter);
  for (int k = 0; k < 3; ++k) lr[kCenter + k] = lc;
  for (int k = 0; k < 4; ++k) lr[kRot + k] = config.lr.rot;
  for (int k = 0; k < 2; ++k) lr[kLogScale + k] = config.lr.scale;
  lr[kOpacityLogit] = config.lr.opacity;
  for (int k = 0; k < 3; ++k) lr[kColorLogit + k] = config.lr.color;
  const double max_log_scale = std::log(extent);

  auto& splats = st.splats.splats;
  for (size_t i = 0; i < splats.size(); ++i) {
    const SplatGrad& g = st.splats.grads[i];
    SplatGrad p = splats[i].pack();
    SplatGrad& m = st.adam_m[i];
    SplatGrad& v = st.adam_v[i];
    for (int k = 0; k < kSplatParams; ++k) {
      m[k] = b1 * m[k] + (1 - b1) * g[k];
      v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k];
      const double step = (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
      if (lr[k] != 0 && step != 0) p[k] -= lr[k] * step;
    }
    Splat s = Splat::unpack(p);
    const double qn = s.rot.norm();
    if (qn > 0 && std::abs(qn - 1.0) > 1e-12) s.rot /= qn;
    if (!(qn > 0)) s.rot = Vec4(1, 0, 0, 0);
    for (int k = 0; k < 2; ++k) s.log_scale[k] = std::min(s.log_scale[k], max_log_scale);
    s.opacity_logit = std::clamp(s.opacity_logit, -30.0, 30.0);
    splats[i] = s;
  }
}

void train_step(TrainState& st, const TrainInputs& inputs, const TrainConfig& config) {
  if (st.iter >= config.total_iters) throw Error("train_step: already at total_iters");
  if (st.view_queue.empty()) {
    auto order = eligible_views(inputs, config);
    st.rng.shuffle(order);
    st.view_queue.assign(order.begin(), order.end());
  }
  const int vi = st.view_queue.front();
  st.view_queue.pop_front();
  const CameraView& view = inputs.views[vi];
  const PriorBundle* prior = inputs.priors.empty() ? nullptr : &inputs.priors[vi];

  ViewLossOptions opts;
  opts.mode = config.mode;
  opts.weights = weights_at(config.schedule(), st.iter);
  opts.use_depth_prior = config.use_depth_prior;
  opts.use_normal_prior = config.use_normal_prior;

  RenderOptions ropts;
  ropts.with_fragments = true;
  ropts.threads = config.threads;
  const RenderOutput out = render(st.splats, view, ropts);
  ViewLoss loss;
  try {
    loss = evaluate_view_loss(out, view, inputs.targets[vi], prior, opts);
  } catch (const ValidationError& e) {
    throw Error("iteration " + std::to_string(st.iter) + ", view '" + view.id + "', " +
                std::to_string(st.splats.size()) + " splats: " + e.what());
  }

  st.splats.zero_grads();
  backward(st.splats, view, out, loss.adjoints, st.splats.grads, nullptr, config.threads);
  // Densification statistics follow the photometric term alone.
  const bool track = st.iter < config.densify_end();
  std::vector<Vec2> screen;
  if (track) {
    MapAdjoints photo = MapAdjoints::zeros(out.width, out.height, 0);
    photo.color = loss.adjoints.color;
    std::vector<SplatGrad> scratch(st.splats.size(), SplatGrad{});
    backward(st.splats, view, out, photo, scratch, &screen, config.threads);
  }
  for (size_t i = 0; i < st.splats.size() && track; ++i) {
    bool visible = false;
    for (size_t f = out.splat_offsets[i]; f < out.splat_offsets[i + 1] && !visible; ++f) {
      visible = out.fragments[f].composited;
    }
    if (!visible) continue;
    st.splats.screen_grad_sum[i] += screen[i].norm();
    st.splats.screen_grad_count[i] += 1;
  }
  apply_adam(st, config, inputs.scene_extent);
  ++st.iter;

  LossLogRow row;
  row.iter = st.iter;
  row.c = loss.components;
  row.total = loss.total;
  row.w = loss.weights;
  row.view = view.id;

  if (st.iter >= config.densify.start_iter && st.iter <= config.densify_end() &&
      st.iter % config.densify.interval == 0) {
    densify_and_prune(st, config, inputs.scene_extent);
  }
  row.splats = st.splats.size();
  st.log.push_back(row);
}

std::pair<size_t, size_t> densify_and_prune(TrainState& st, const TrainConfig& config, double extent) {
  SplatSet& set = st.splats;
  const size_t n = set.size();
  std::vector<Splat> kept, added;
  std::vector<SplatGrad> kept_m, kept_v;
  kept.reserve(n);
  size_t removed = 0;
  const double split_limit = config.densify.split_scale_frac * extent;
  const size_t cap = config.densify.max_splats;
  auto room = [&] { return kept.size() + added.size() + (n - kept.size() - removed) < cap; };
  for (size_t i = 0; i < n; ++i) {
    const Splat& s = set.splats[i];
    if (s.opacity() < config.densify.opacity_prune) {
      ++removed;
      continue;
    }
    const int count = set.screen_grad_count.empty() ? 0 : set.screen_grad_count[i];
    const double mean = count > 0 ? set.screen_grad_sum[i] / count : 0.0;
    const bool grow = count > 0 && mean >= config.densify.grad_threshold;
    if (grow && s.scale().maxCoeff() > split_limit && room()) {
      const Mat3 r = s.rotation();
      const double offset = 0.5 * s.scale().x();
      Splat child = s;
      child.log_scale = s.log_scale - Vec2::Constant(std::log(1.6));
      child.center = s.center + offset * r.col(0);
      added.push_back(child);
      child.center = s.center - offset * r.col(0);
      added.push_back(child);
      ++removed;
      continue;
    }
    kept.push_back(s);
    kept_m.push_back(st.adam_m[i]);
    kept_v.push_back(st.adam_v[i]);
    if (grow && s.scale().maxCoeff() <= split_limit && room()) added.push_back(s);
  }
  set.splats = std::move(kept);
  set.splats.insert(set.splats.end(), added.begin(), added.end());
  st.adam_m = std::move(kept_m);
  st.adam_v = std::move(kept_v);
  st.adam_m.resize(set.splats.size(), SplatGrad{});
  st.adam_v.resize(set.splats.size(), SplatGrad{});
  set.reset_buffers();
  return {added.size(), removed};
}

namespace {

constexpr char kOptimMagic[] = "priorsplat-optim 1\n";

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v, const std::string& where) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError(where + ": truncated optimizer state (byte offset " + std::to_string(in.gcount()) + ")");
}

json log_to_json(const std::vector<LossLogRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({r.iter, r.c.l_c, r.c.l_d, r.c.l_n, r.c.l_db, r.c.l_nb, r.total, r.w.lambda_d, r.w.lambda_n,
                   r.w.lambda_db, r.w.lambda_nb, r.view, r.splats});
  }
  return arr;
}

std::vector<LossLogRow> log_from_json(const json& arr) {
  std::vector<LossLogRow> rows;
  for (const auto& a : arr) {
    LossLogRow r;
    r.iter = a[0];
    r.c = LossComponents{a[1], a[2], a[3], a[4], a[5]};
    r.total = a[6];
    r.w = LossWeights{a[7], a[8], a[9], a[10]};
    r.view = a[11];
    r.splats = a[12];
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

void save_train_state(const std::filesystem::path& path, const TrainState& st) {
  save_checkpoint(path, st.splats, st.iter);
  std::filesystem::path optim = path;
  optim += ".optim";
  std::ofstream out(optim, std::ios::binary);
  if (!out) throw Error("cannot open " + optim.string() + " for writing");
  json header;
  header["iter"] = st.iter;
  header["count"] = st.splats.size();
  header["rng"] = st.rng.state();
  header["view_queue"] = std::vector<int>(st.view_queue.begin(), st.view_queue.end());
  header["log"] = log_to_json(st.log);
  const std::string h = header.dump();
  out << kOptimMagic;
  const uint64_t hlen = h.size();
  write_pod(out, hlen);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (size_t i = 0; i < st.splats.size(); ++i) {
    const SplatGrad p = st.splats.splats[i].pack();
    for (double v : p) write_pod(out, v);
    for (double v : st.adam_m[i]) write_pod(out, v);
    for (double v : st.adam_v[i]) write_pod(out, v);
    write_pod(out, st.splats.screen_grad_sum[i]);
    write_pod(out, static_cast<int32_t>(st.splats.screen_grad_count[i]));
  }
}

TrainState load_train_state(const std::filesystem::path& path) {
  std::filesystem::path optim = path;
  optim += ".optim";
  std::ifstream in(optim, std::ios::binary);
  if (!in) throw ValidationError("missing optimizer state " + optim.string());
  const std::string where = optim.string();
  std::string magic(sizeof(kOptimMagic) - 1, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kOptimMagic) throw ParseError(where + ": bad header (byte offset 0)");
  uint64_t hlen = 0;
  read_pod(in, hlen, where);
  std::string h(hlen, '\0');
  in.read(h.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw ParseError(where + ": truncated header");
  TrainState st;
  json header;
  try {
    header = json::parse(h);
    st.iter = header.at("iter");
    st.rng.set_state(header.at("rng").get<std::string>());
    const auto q = header.at("view_queue").get<std::vector<int>>();
    st.view_queue.assign(q.begin(), q.end());
    st.log = log_from_json(header.at("log"));
  } catch (const json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
  const size_t count = header.at("count").get<size_t>();
  st.splats.splats.resize(count);
  st.adam_m.resize(count);
  st.adam_v.resize(count);
  st.splats.reset_buffers();
  for (size_t i = 0; i < count; ++i) {
    SplatGrad p{};
    for (double& v : p) read_pod(in, v, where);
    st.splats.splats[i] = Splat::unpack(p);
    for (double& v : st.adam_m[i]) read_pod(in, v, where);
    for (double& v : st.adam_v[i]) read_pod(in, v, where);
    read_pod(in, st.splats.screen_grad_sum[i], where);
    int32_t c = 0;
    read_pod(in, c, where);
    st.splats.screen_grad_count[i] = c;
  }
  int ply_iter = 0;
  const SplatSet ply = load_checkpoint(path, &ply_iter);
  if (ply.size() != count || ply_iter != st.iter) {
    throw ValidationError(where + ": optimizer state does not match " + path.string());
  }
  return st;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossLogRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "iter,L_c,L_d,L_n,L_db,L_nb,total,lambda_d,lambda_n,lambda_db,lambda_nb,view,splats\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.iter << ',' << r.c.l_c << ',' << r.c.l_d << ',' << r.c.l_n << ',' << r.c.l_db << ',' << r.c.l_nb
        << ',' << r.total << ',' << r.w.lambda_d << ',' << r.w.lambda_n << ',' << r.w.lambda_db << ','
        << r.w.lambda_nb << ',' << r.view << ',' << r.splats << '\n';
  }
}

RunResult run_training(const TrainInputs& inputs, const TrainConfig& config, const std::filesystem::path& out_dir,
                       std::optional<TrainState> resume) {
  config.validate();
  if (inputs.targets.size() != inputs.views.size()) throw ValidationError("one target image per view required");
  if (!inputs.priors.empty() && inputs.priors.size() != inputs.views.size()) {
    throw ValidationError("one prior bundle per view required");
  }
  if (inputs.priors.empty() && config.mode == TrainMode::BuildingOnly) {
    throw ValidationError("building_only mode requires priors");
  }
  std::filesystem::create_directories(out_dir);
  RunResult res;
  res.state = resume ? std::move(*resume) : init_train_state(inputs, config);
  TrainState& st = res.state;
  const int total = config.total_iters;
  std::set<int> marks = {std::max(1, total / 4), std::max(1, total / 2), total};
  while (st.iter < total) {
    train_step(st, inputs, config);
    if (st.iter % 100 == 0 || st.iter == total) {
      const auto& r = st.log.back();
      spdlog::info("iter {:5d}  total {:.5f}  L_c {:.5f}  splats {}", r.iter, r.total, r.c.l_c, r.splats);
    }
    if (marks.count(st.iter)) {
      std::ostringstream name;
      name << "checkpoint_" << std::setw(5) << std::setfill('0') << st.iter << ".ply";
      const auto path = out_dir / name.str();
      save_train_state(path, st);
      res.checkpoints.push_back(path);
    }
  }
  write_loss_csv(out_dir / "losses.csv", st.log);
  return res;
}

}  // namespace priorsplat
