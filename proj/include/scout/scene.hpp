#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "scout/geometry.hpp"

namespace scout {

struct PoseOutOfBounds : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownTarget : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SceneFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kSentinelNone = -1;

struct Disc {
  Vec2 center;
  double radius = 0.0;
};

struct Polygon {
  std::vector<Vec2> vertices;  // counter-clockwise, convex

  double area() const;
  Vec2 centroid() const;
  bool contains(const Vec2& p) const;
};

using Shape = std::variant<Disc, Polygon>;

enum class ObjectRole { kTargetCandidate, kOccluder, kWall };

std::string role_name(ObjectRole role);
ObjectRole role_from_name(const std::string& name);

// Per-object reward shaping constants; see reward_oracle.hpp for semantics.
struct RewardParams {
  double d_near = 0.5;
  double d_scale = 1.5;
  double b_sat = 0.3;
  double conf_min = 0.7;
  double bbox_min = 0.15;
};

struct SceneObject {
  std::string id;
  int class_id = 0;
  Shape shape;
  ObjectRole role = ObjectRole::kOccluder;
  std::optional<RewardParams> reward_params;  // per-object override

  Vec2 centroid() const;
};

struct Bounds {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

  bool contains(const Vec2& p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
};

struct Scene {
  Bounds bounds;
  std::vector<SceneObject> objects;
  double free_radius = 0.1;

  const SceneObject& find_target(const std::string& target_id) const;
  std::vector<const SceneObject*> target_candidates() const;
  void validate() const;
};

struct CameraModel {
  double fov = kPi / 2.0;
  int n_rays = 64;
  double max_range = 5.0;
};

// Semantic range scan: per-ray depth plus class of the nearest hit.
struct Observation {
  std::vector<double> depths;
  std::vector<int> classes;  // kSentinelNone where no hit within range
};

// Nearest intersection of the ray from `origin` along unit `dir` with `shape`,
// or nullopt. Returns the ray parameter t >= 0.
std::optional<double> ray_shape_intersection(const Vec2& origin,
                                             const Vec2& dir,
                                             const Shape& shape);

struct RayHit {
  double t = 0.0;
  int object_index = -1;
};

// First object hit along a world-frame bearing, ties broken by lowest index.
std::optional<RayHit> cast_ray(const Scene& scene, const Vec2& origin,
                               double bearing, double max_range);

Observation render_scan(const Scene& scene, const Pose& p,
                        const CameraModel& cam);

// True iff the robot footprint disc at p stays inside the bounds and clear of
// every object.
bool is_collision_free(const Scene& scene, const Pose& p);

// Distance from point to the boundary-or-interior of a shape (0 if inside).
double point_shape_distance(const Vec2& p, const Shape& shape);

Scene load_scene(const std::string& path);
Scene parse_scene_json(const std::string& json_text);
std::string scene_to_json(const Scene& scene);

}  // namespace scout
