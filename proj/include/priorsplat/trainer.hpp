#pragma once

#include <deque>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "priorsplat/camera.hpp"
#include "priorsplat/losses.hpp"
#include "priorsplat/priors.hpp"
#include "priorsplat/renderer.hpp"
#include "priorsplat/splats.hpp"

namespace priorsplat {

enum class TrainMode { BuildingOnly, BuildingEnhanced };
enum class InitSource { PriorCloud, ExternalCloud };

const char* to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);

struct LearningRates {
  double center = 1.6e-4;  // multiplied by the scene extent
  double center_final_factor = 0.01;
  double rot = 1e-3;
  double scale = 5e-3;
  double opacity = 5e-2;
  double color = 2.5e-3;
};

struct DensifyConfig {
  int interval = 100;
  double grad_threshold = 1e-3;
  double opacity_prune = 5e-3;
  int start_iter = 500;
  int end_iter = -1;  // -1: 0.75 * total_iters (densification off when start is later)
  double split_scale_frac = 0.02;
  size_t max_splats = 200000;
};

struct TrainConfig {
  TrainMode mode = TrainMode::BuildingEnhanced;
  int total_iters = 2000;
  double phase1_frac = 0.5;
  double lambda_d = 100.0;
  double lambda_n = 0.05;
  double lambda_db_start = 1.0;
  double lambda_db_end = 0.1;
  double lambda_nb_start = 0.05;
  double lambda_nb_end = 0.005;
  LearningRates lr;
  DensifyConfig densify;
  uint64_t seed = 0;
  bool use_depth_prior = true;
  bool use_normal_prior = true;
  InitSource init_source = InitSource::PriorCloud;
  std::string external_cloud;
  int threads = 1;

  Schedule schedule() const;
  int densify_end() const;
  void validate() const;

  // Flat keys; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

TrainConfig load_train_config(const std::filesystem::path& path);

// Region rules shared by training and the gradient checks.
struct ViewLossOptions {
  TrainMode mode = TrainMode::BuildingEnhanced;
  LossWeights weights;
  bool use_depth_prior = true;
  bool use_normal_prior = true;
  // Fixed selections for finite-difference checks: loss region and the
  // median depth scale.
  const MaskMap* region_override = nullptr;
  std::optional<double> depth_scale;
};

struct ViewLoss {
  LossComponents components;
  LossWeights weights;
  double total = 0;
  MaskMap region;
  double depth_scale = 1.0;
  MapAdjoints adjoints;
};

// Every pixel, or the prior mask in building-only mode.
MaskMap loss_region(const RenderOutput& out, const PriorBundle* prior, TrainMode mode);

ViewLoss evaluate_view_loss(const RenderOutput& out, const CameraView& view, const ColorMap& target,
                            const PriorBundle* prior, const ViewLossOptions& opts);

struct LossLogRow {
  int iter = 0;
  LossComponents c;
  double total = 0;
  LossWeights w;
  std::string view;
  size_t splats = 0;
};

struct TrainInputs {
  std::vector<CameraView> views;
  std::vector<ColorMap> targets;
  std::vector<PriorBundle> priors;  // empty, or one per view
  InitPointCloud init_cloud;
  double scene_extent = 1.0;
};

struct TrainState {
  SplatSet splats;
  int iter = 0;
  std::vector<SplatGrad> adam_m;
  std::vector<SplatGrad> adam_v;
  Rng rng;
  std::deque<int> view_queue;
  std::vector<LossLogRow> log;
};

TrainState init_train_state(const TrainInputs& inputs, const TrainConfig& config);

// One optimization step on one view. Throws Error with a diagnostic when the
// loss is not finite.
void train_step(TrainState& state, const TrainInputs& inputs, const TrainConfig& config);

// Returns the number of splats added and removed.
std::pair<size_t, size_t> densify_and_prune(TrainState& state, const TrainConfig& config, double scene_extent);

void apply_adam(TrainState& state, const TrainConfig& config, double scene_extent);

// Checkpoint PLY plus a "<path>.optim" sidecar with the exact optimizer state.
void save_train_state(const std::filesystem::path& path, const TrainState& state);
TrainState load_train_state(const std::filesystem::path& path);

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossLogRow>& rows);

struct RunResult {
  TrainState state;
  std::vector<std::filesystem::path> checkpoints;
};

// Runs config.total_iters steps (continuing from `resume` when given) and
// writes checkpoint_<iter>.ply at 25/50/100% plus losses.csv into out_dir.
RunResult run_training(const TrainInputs& inputs, const TrainConfig& config,
                       const std::filesystem::path& out_dir, std::optional<TrainState> resume = std::nullopt);

}  // namespace priorsplat
