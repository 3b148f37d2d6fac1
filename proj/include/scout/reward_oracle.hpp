#pragma once

#include <string>

#include "scout/scene.hpp"

namespace scout {

// Visibility geometry for one (pose, target) pair. Stands in for the detector
// outputs that label the training data.
struct VisibilityReport {
  std::string target_id;
  double visible_fraction = 0.0;       // unoccluded share of the subtended angle inside FOV
  double angular_extent_visible = 0.0; // radians
  double distance = 0.0;               // pose to target centroid
  bool in_fov = false;
};

struct SuccessThresholds {
  double conf_min = 0.7;
  double bbox_min = 0.15;
};

// Angular interval [lo, hi] the target subtends from `from`, as world-frame
// bearings with hi >= lo (may exceed pi after unwrapping).
struct AngularInterval {
  double lo = 0.0;
  double hi = 0.0;
  double extent() const { return hi - lo; }
};

AngularInterval subtended_interval(const Shape& shape, const Vec2& from);

// Samples the target's subtended angle (>= min_samples bin midpoints) and
// marks a sample visible when it falls inside the FOV and the first ray hit at
// that bearing is the target.
VisibilityReport visibility(const Scene& scene, const Pose& p,
                            const CameraModel& cam,
                            const std::string& target_id,
                            int min_samples = 32);

double detection_confidence(const VisibilityReport& rep,
                            const RewardParams& params);

double bbox_proportion(const VisibilityReport& rep, const CameraModel& cam);

double ground_truth_reward(const Scene& scene, const Pose& p,
                           const CameraModel& cam,
                           const std::string& target_id,
                           const RewardParams& params);

// Resolves per-object overrides from the scene, falling back to defaults.
RewardParams reward_params_for(const Scene& scene,
                               const std::string& target_id);

bool is_success(const VisibilityReport& rep, const CameraModel& cam,
                const SuccessThresholds& thresholds,
                const RewardParams& params);

}  // namespace scout
