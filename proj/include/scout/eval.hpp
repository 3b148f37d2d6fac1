#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scout/planners.hpp"
#include "scout/reward_oracle.hpp"
#include "scout/scene.hpp"
#include "scout/world_model.hpp"

namespace scout {

struct Unreachable : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EvalConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class DifficultyTier { kEasy, kMedium, kHard };
const char* tier_name(DifficultyTier tier);

// Band edges for the initial-condition difficulty heuristic; occlusion is
// 1 - visible_fraction.
struct DifficultyThresholds {
  double easy_conf = 0.5;
  double easy_dist = 1.0;
  double easy_occl = 0.25;
  double hard_conf = 0.1;
  double hard_occl = 0.75;
  double hard_dist = 2.5;
};

DifficultyTier classify_initial_difficulty(
    const Scene& scene, const Pose& start, const CameraModel& cam,
    const std::string& target_id,
    const DifficultyThresholds& thresholds = {});

// Shortest-path distance map from every free grid cell to the nearest pose
// satisfying the success predicate (heading chosen to face the target).
// Shared across trials so the grid search runs once per scene.
class ViewingDistanceField {
 public:
  ViewingDistanceField(const Scene& scene, const CameraModel& cam,
                       const std::string& target_id,
                       const SuccessThresholds& thresholds,
                       double resolution = 0.05);

  // Path length from `start`; 0 when the start pose already succeeds.
  double distance_from(const Pose& start) const;  // throws Unreachable

 private:
  const Scene& scene_;
  CameraModel cam_;
  std::string target_id_;
  SuccessThresholds thresholds_;
  RewardParams params_;
  double resolution_;
  int nx_ = 0, ny_ = 0;
  double x0_ = 0.0, y0_ = 0.0;
  std::vector<double> dist_;  // row-major, infinity where unreachable/blocked
};

double estimate_optimal_distance(const Scene& scene, const CameraModel& cam,
                                 const Pose& start,
                                 const std::string& target_id,
                                 const SuccessThresholds& thresholds = {},
                                 double resolution = 0.05);

// r * exp(-d / d*); a zero d* means success was available at the start.
double efficiency_score(bool success, double d, double d_star);

// ---- battery runner ----

struct SceneTask {
  std::string name;
  Scene scene;
  std::string target_id;
  std::string query;  // language query fed to the learned reward head
};

struct TrialResult {
  std::string scene;
  std::string planner;
  std::string tier;
  std::uint64_t seed = 0;
  bool success = false;
  double distance = 0.0;
  double d_star = 0.0;
  double efficiency = 0.0;
  int steps = 0;
  std::string error;  // empty on a clean trial
};

struct CellAggregate {
  std::string scene;
  std::string planner;
  std::string tier;
  int n = 0;
  double success_rate = 0.0;
  double mean_efficiency = 0.0;
};

struct BatteryResult {
  std::vector<TrialResult> trials;
  std::vector<CellAggregate> cells;
};

struct BatterySpec {
  std::vector<SceneTask> scenes;
  std::vector<std::string> planners;
  int n_trials = 50;
  std::uint64_t master_seed = 0;
  SuccessThresholds thresholds;
  DifficultyThresholds difficulty;
  CameraModel cam{kPi / 2.0, 64, 5.0};
  int max_steps = 40;
  PlannerConfig planner_cfg;
};

// Builds the per-trial planning callback for one episode. The seed is derived
// from the master seed and the trial indices, so stochastic planners replay.
using TrialPlannerFactory = std::function<PlannerFn(
    const SceneTask& task, const CameraModel& cam,
    const std::string& planner_name, std::uint64_t seed)>;

// Strategy names grad | cem | hr | womap | random over a trained model.
TrialPlannerFactory learned_planner_factory(const WorldModel& model,
                                            const PlannerConfig& cfg);
// Same strategies scored by the ground-truth oracle instead of the model.
TrialPlannerFactory oracle_planner_factory(const PlannerConfig& cfg);

BatteryResult run_trials(const BatterySpec& spec,
                         const TrialPlannerFactory& factory);

// ---- reporting ----

std::string trials_csv(const std::vector<TrialResult>& trials);
std::string aggregate_json(const BatteryResult& result);
// Per-figure groupings (filename -> CSV body) for external plotting.
std::map<std::string, std::string> plot_data_csvs(const BatteryResult& result);

// ---- config-driven entry point (the `eval` subcommand) ----

// Config JSON: {scenes: [{path, target, query}|path, ...], planners: [...],
// n_trials, master_seed, thresholds: {conf_min, bbox_min}, ckpt,
// ckpt_narrow?, max_steps?, planner?: {...}}. A narrow checkpoint adds
// "<planner>@narrow" rows evaluated on the same trial seeds.
void run_eval_config(const std::string& config_path, const std::string& out_dir,
                     bool plot_data);

}  // namespace scout
