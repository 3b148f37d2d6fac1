#include "scout/reward_oracle.hpp"

#include <algorithm>
#include <cmath>

namespace scout {

AngularInterval subtended_interval(const Shape& shape, const Vec2& from) {
  if (const auto* d = std::get_if<Disc>(&shape)) {
    const Vec2 rel = d->center - from;
    const double dist = rel.norm();
    const double center_bearing = std::atan2(rel.y, rel.x);
    if (dist <= d->radius) {
      return {center_bearing - kPi, center_bearing + kPi};
    }
    const double half = std::asin(d->radius / dist);
    return {center_bearing - half, center_bearing + half};
  }
  const auto& poly = std::get<Polygon>(shape);
  const Vec2 c = poly.centroid();
  const Vec2 rel = c - from;
  const double center_bearing = std::atan2(rel.y, rel.x);
  double lo = 0.0, hi = 0.0;
  for (const auto& v : poly.vertices) {
    const Vec2 vr = v - from;
    const double b = std::atan2(vr.y, vr.x);
    const double off = normalize_angle(b - center_bearing);
    lo = std::min(lo, off);
    hi = std::max(hi, off);
  }
  return {center_bearing + lo, center_bearing + hi};
}

VisibilityReport visibility(const Scene& scene, const Pose& p,
                            const CameraModel& cam,
                            const std::string& target_id, int min_samples) {
  const SceneObject& target = scene.find_target(target_id);
  int target_index = -1;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (scene.objects[i].id == target_id) {
      target_index = static_cast<int>(i);
      break;
    }
  }

  VisibilityReport rep;
  rep.target_id = target_id;
  const Vec2 pos = p.position();
  rep.distance = (target.centroid() - pos).norm();

  const AngularInterval arc = subtended_interval(target.shape, pos);
  const int n = std::max(min_samples, 32);
  int visible = 0;
  bool any_in_fov = false;
  for (int i = 0; i < n; ++i) {
    // Bin midpoints: avoids tangent rays at the interval endpoints.
    const double bearing =
        arc.lo + arc.extent() * (static_cast<double>(i) + 0.5) / n;
    const double rel = normalize_angle(bearing - p.theta);
    if (std::abs(rel) > cam.fov / 2.0) continue;
    any_in_fov = true;
    const auto hit = cast_ray(scene, pos, bearing, cam.max_range);
    if (hit && hit->object_index == target_index) ++visible;
  }
  rep.in_fov = any_in_fov;
  rep.visible_fraction = static_cast<double>(visible) / n;
  rep.angular_extent_visible =
      std::min(cam.fov, rep.visible_fraction * arc.extent());
  return rep;
}

double detection_confidence(const VisibilityReport& rep,
                            const RewardParams& params) {
  if (!rep.in_fov) return 0.0;
  const double falloff =
      std::exp(-std::max(0.0, rep.distance - params.d_near) / params.d_scale);
  return rep.visible_fraction * falloff;
}

double bbox_proportion(const VisibilityReport& rep, const CameraModel& cam) {
  if (!rep.in_fov) return 0.0;
  return std::clamp(rep.angular_extent_visible / cam.fov, 0.0, 1.0);
}

RewardParams reward_params_for(const Scene& scene,
                               const std::string& target_id) {
  const SceneObject& target = scene.find_target(target_id);
  return target.reward_params.value_or(RewardParams{});
}

double ground_truth_reward(const Scene& scene, const Pose& p,
                           const CameraModel& cam,
                           const std::string& target_id,
                           const RewardParams& params) {
  const VisibilityReport rep = visibility(scene, p, cam, target_id);
  const double conf = detection_confidence(rep, params);
  const double bbox = bbox_proportion(rep, cam);
  const double r = conf * std::min(1.0, bbox / params.b_sat);
  return std::clamp(r, 0.0, 1.0);
}

bool is_success(const VisibilityReport& rep, const CameraModel& cam,
                const SuccessThresholds& thresholds,
                const RewardParams& params) {
  return detection_confidence(rep, params) >= thresholds.conf_min &&
         bbox_proportion(rep, cam) >= thresholds.bbox_min;
}

}  // namespace scout
