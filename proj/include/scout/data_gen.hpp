#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scout/geometry.hpp"
#include "scout/reward_oracle.hpp"
#include "scout/rng.hpp"
#include "scout/scene.hpp"

namespace scout {

struct PlanningFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientLength : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DatasetFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrajectoryParams {
  int n_waypoints = 20;
  double step_lo = 0.01;   // consecutive-pose spacing [m]
  double step_hi = 0.05;
  double perturb_lin_sigma = 0.01;
  double perturb_ang_sigma = 0.05;
  int rrt_iterations = 3000;
  double goal_radius = 0.8;  // viewing-zone radius around the target [m]
  // Optional restriction of start sampling (narrow-coverage datasets).
  std::optional<Bounds> start_region;
};

struct DatasetRecord {
  Observation observation;
  Pose pose;
  std::map<std::string, double> rewards;  // target_id -> [0,1]
  int trajectory_id = 0;
  int step_index = 0;
};

struct Dataset {
  std::string scene_ref;  // digest of the scene JSON
  std::string vocab_ref;  // digest of the vocabulary file ("" when unused)
  std::vector<DatasetRecord> records;
};

// FNV-1a 64-bit digest as a hex string.
std::string content_digest(const std::string& content);

// True when the pose has line of sight to the target within goal_radius.
bool in_viewing_zone(const Scene& scene, const CameraModel& cam, const Pose& p,
                     const std::string& target_id, double goal_radius);

// Collision-free path from start into the target's viewing zone. Tries a
// straight-line connection first, then falls back to RRT sampling. Headings
// face the travel direction; the final heading faces the target.
std::vector<Pose> sample_trajectory(const Scene& scene, const CameraModel& cam,
                                    const Pose& start,
                                    const std::string& target_id,
                                    std::uint64_t rng_seed,
                                    const TrajectoryParams& params);

// Gaussian pose noise; collision-violating perturbations are re-sampled up to
// 10 times, then the pose is left unperturbed.
std::vector<Pose> perturb(const Scene& scene, const std::vector<Pose>& traj,
                          std::uint64_t rng_seed,
                          const TrajectoryParams& params);

Dataset build_dataset(const Scene& scene, int n_trajectories,
                      const CameraModel& cam, const TrajectoryParams& params,
                      std::uint64_t rng_seed,
                      const std::string& vocab_ref = "");

struct TrainingSequence {
  std::vector<Observation> observations;  // H + 1
  std::vector<Action> actions;            // H, between consecutive poses
  std::vector<std::map<std::string, double>> successor_rewards;  // H
  std::vector<Pose> poses;                // H + 1, for test oracles
};

TrainingSequence sample_training_sequence(const Dataset& ds, int horizon,
                                          std::uint64_t rng_seed);

void save_dataset(const Dataset& ds, const TrajectoryParams& params,
                  std::uint64_t seed, const std::string& path);
Dataset load_dataset(const std::string& path);

// Uniformly samples a collision-free pose (uniform heading) inside `region`,
// or the scene bounds when region is empty.
Pose sample_free_pose(const Scene& scene, Rng& rng,
                      const std::optional<Bounds>& region = std::nullopt);

}  // namespace scout
