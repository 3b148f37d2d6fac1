#include "scout/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace scout {

using nlohmann::json;

double Polygon::area() const {
  double a = 0.0;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    a += vertices[i].cross(vertices[(i + 1) % n]);
  }
  return 0.5 * a;
}

Vec2 Polygon::centroid() const {
  double a = 0.0;
  Vec2 c{0.0, 0.0};
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = vertices[i];
    const Vec2& q = vertices[(i + 1) % n];
    const double w = p.cross(q);
    a += w;
    c.x += (p.x + q.x) * w;
    c.y += (p.y + q.y) * w;
  }
  a *= 0.5;
  return {c.x / (6.0 * a), c.y / (6.0 * a)};
}

bool Polygon::contains(const Vec2& p) const {
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = vertices[(i + 1) % n] - vertices[i];
    if (e.cross(p - vertices[i]) < 0.0) return false;
  }
  return true;
}

std::string role_name(ObjectRole role) {
  switch (role) {
    case ObjectRole::kTargetCandidate:
      return "target-candidate";
    case ObjectRole::kOccluder:
      return "occluder";
    case ObjectRole::kWall:
      return "wall";
  }
  return "occluder";
}

ObjectRole role_from_name(const std::string& name) {
  if (name == "target-candidate") return ObjectRole::kTargetCandidate;
  if (name == "occluder") return ObjectRole::kOccluder;
  if (name == "wall") return ObjectRole::kWall;
  throw SceneFormatError("unknown object role: " + name);
}

Vec2 SceneObject::centroid() const {
  if (const auto* d = std::get_if<Disc>(&shape)) return d->center;
  return std::get<Polygon>(shape).centroid();
}

const SceneObject& Scene::find_target(const std::string& target_id) const {
  for (const auto& obj : objects) {
    if (obj.id == target_id) {
      if (obj.role != ObjectRole::kTargetCandidate) {
        throw UnknownTarget("object is not a target-candidate: " + target_id);
      }
      return obj;
    }
  }
  throw UnknownTarget("no such target: " + target_id);
}

std::vector<const SceneObject*> Scene::target_candidates() const {
  std::vector<const SceneObject*> out;
  for (const auto& obj : objects) {
    if (obj.role == ObjectRole::kTargetCandidate) out.push_back(&obj);
  }
  return out;
}

void Scene::validate() const {
  if (bounds.width() <= 0.0 || bounds.height() <= 0.0) {
    throw SceneFormatError("scene bounds are degenerate");
  }
  bool has_target = false;
  std::vector<std::string> ids;
  for (const auto& obj : objects) {
    ids.push_back(obj.id);
    if (obj.role == ObjectRole::kTargetCandidate) has_target = true;
    if (const auto* d = std::get_if<Disc>(&obj.shape)) {
      if (d->radius <= 0.0) {
        throw SceneFormatError("degenerate disc: " + obj.id);
      }
    } else {
      const auto& poly = std::get<Polygon>(obj.shape);
      if (poly.vertices.size() < 3 || poly.area() <= 0.0) {
        throw SceneFormatError("degenerate polygon: " + obj.id);
      }
    }
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw SceneFormatError("duplicate object id");
  }
  if (!has_target) throw SceneFormatError("scene has no target-candidate");
}

namespace {

std::optional<double> ray_disc(const Vec2& o, const Vec2& d, const Disc& disc) {
  const Vec2 oc = o - disc.center;
  const double b = oc.dot(d);
  const double c = oc.norm_sq() - disc.radius * disc.radius;
  const double disc_b = b * b - c;
  if (disc_b < 0.0) return std::nullopt;
  const double s = std::sqrt(disc_b);
  const double t0 = -b - s;
  const double t1 = -b + s;
  if (t0 >= 0.0) return t0;
  if (t1 >= 0.0) return t1;  // origin inside the disc
  return std::nullopt;
}

std::optional<double> ray_segment(const Vec2& o, const Vec2& d, const Vec2& a,
                                  const Vec2& b) {
  // Solve o + t d = a + u ab.
  const Vec2 ab = b - a;
  const double denom = d.cross(ab);
  if (std::abs(denom) < 1e-15) return std::nullopt;  // parallel
  const Vec2 ao = a - o;
  const double t = ao.cross(ab) / denom;
  const double u = ao.cross(d) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

}  // namespace

std::optional<double> ray_shape_intersection(const Vec2& origin,
                                             const Vec2& dir,
                                             const Shape& shape) {
  if (const auto* d = std::get_if<Disc>(&shape)) {
    return ray_disc(origin, dir, *d);
  }
  const auto& poly = std::get<Polygon>(shape);
  std::optional<double> best;
  const std::size_t n = poly.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto t =
        ray_segment(origin, dir, poly.vertices[i], poly.vertices[(i + 1) % n]);
    if (t && (!best || *t < *best)) best = t;
  }
  return best;
}

std::optional<RayHit> cast_ray(const Scene& scene, const Vec2& origin,
                               double bearing, double max_range) {
  const Vec2 dir{std::cos(bearing), std::sin(bearing)};
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto t = ray_shape_intersection(origin, dir, scene.objects[i].shape);
    if (t && *t <= max_range && (!best || *t < best->t)) {
      best = RayHit{*t, static_cast<int>(i)};
    }
  }
  return best;
}

Observation render_scan(const Scene& scene, const Pose& p,
                        const CameraModel& cam) {
  if (!scene.bounds.contains(p.position())) {
    throw PoseOutOfBounds("render_scan: pose outside scene bounds");
  }
  Observation obs;
  obs.depths.assign(static_cast<std::size_t>(cam.n_rays), cam.max_range);
  obs.classes.assign(static_cast<std::size_t>(cam.n_rays), kSentinelNone);
  const double step = cam.fov / static_cast<double>(cam.n_rays - 1);
  for (int i = 0; i < cam.n_rays; ++i) {
    const double bearing = p.theta - cam.fov / 2.0 + step * i;
    const auto hit = cast_ray(scene, p.position(), bearing, cam.max_range);
    if (hit) {
      obs.depths[static_cast<std::size_t>(i)] = hit->t;
      obs.classes[static_cast<std::size_t>(i)] =
          scene.objects[static_cast<std::size_t>(hit->object_index)].class_id;
    }
  }
  return obs;
}

namespace {

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len_sq = ab.norm_sq();
  if (len_sq < 1e-30) return (p - a).norm();
  double u = (p - a).dot(ab) / len_sq;
  u = std::clamp(u, 0.0, 1.0);
  return (p - (a + ab * u)).norm();
}

}  // namespace

double point_shape_distance(const Vec2& p, const Shape& shape) {
  if (const auto* d = std::get_if<Disc>(&shape)) {
    return std::max(0.0, (p - d->center).norm() - d->radius);
  }
  const auto& poly = std::get<Polygon>(shape);
  if (poly.contains(p)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, point_segment_distance(p, poly.vertices[i],
                                                 poly.vertices[(i + 1) % n]));
  }
  return best;
}

bool is_collision_free(const Scene& scene, const Pose& p) {
  const Vec2 pos = p.position();
  const double r = scene.free_radius;
  if (pos.x - r < scene.bounds.xmin || pos.x + r > scene.bounds.xmax ||
      pos.y - r < scene.bounds.ymin || pos.y + r > scene.bounds.ymax) {
    return false;
  }
  for (const auto& obj : scene.objects) {
    if (point_shape_distance(pos, obj.shape) < r) return false;
  }
  return true;
}

namespace {

Shape shape_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const json& params = j.at("params");
  if (kind == "disc") {
    Disc d;
    d.center = {params.at("center").at(0).get<double>(),
                params.at("center").at(1).get<double>()};
    d.radius = params.at("radius").get<double>();
    return d;
  }
  if (kind == "polygon") {
    Polygon poly;
    for (const auto& v : params.at("vertices")) {
      poly.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    }
    return poly;
  }
  throw SceneFormatError("unknown shape kind: " + kind);
}

json shape_to_json(const Shape& shape) {
  json j;
  if (const auto* d = std::get_if<Disc>(&shape)) {
    j["kind"] = "disc";
    j["params"] = {{"center", {d->center.x, d->center.y}},
                   {"radius", d->radius}};
  } else {
    const auto& poly = std::get<Polygon>(shape);
    j["kind"] = "polygon";
    json verts = json::array();
    for (const auto& v : poly.vertices) verts.push_back({v.x, v.y});
    j["params"] = {{"vertices", verts}};
  }
  return j;
}

RewardParams reward_params_from_json(const json& j, RewardParams base) {
  if (j.contains("d_near")) base.d_near = j.at("d_near").get<double>();
  if (j.contains("d_scale")) base.d_scale = j.at("d_scale").get<double>();
  if (j.contains("b_sat")) base.b_sat = j.at("b_sat").get<double>();
  if (j.contains("conf_min")) base.conf_min = j.at("conf_min").get<double>();
  if (j.contains("bbox_min")) base.bbox_min = j.at("bbox_min").get<double>();
  return base;
}

}  // namespace

Scene parse_scene_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SceneFormatError(std::string("scene JSON parse error: ") + e.what());
  }
  Scene scene;
  const auto& b = j.at("bounds");
  scene.bounds = {b.at(0).get<double>(), b.at(1).get<double>(),
                  b.at(2).get<double>(), b.at(3).get<double>()};
  scene.free_radius = j.at("free_radius").get<double>();
  for (const auto& jo : j.at("objects")) {
    SceneObject obj;
    obj.id = jo.at("id").get<std::string>();
    obj.class_id = jo.at("class").get<int>();
    obj.shape = shape_from_json(jo.at("shape"));
    obj.role = role_from_name(jo.at("role").get<std::string>());
    if (jo.contains("reward_params")) {
      obj.reward_params =
          reward_params_from_json(jo.at("reward_params"), RewardParams{});
    }
    scene.objects.push_back(std::move(obj));
  }
  scene.validate();
  return scene;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneFormatError("cannot open scene file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scene_json(ss.str());
}

std::string scene_to_json(const Scene& scene) {
  json j;
  j["bounds"] = {scene.bounds.xmin, scene.bounds.ymin, scene.bounds.xmax,
                 scene.bounds.ymax};
  j["free_radius"] = scene.free_radius;
  json objs = json::array();
  for (const auto& obj : scene.objects) {
    json jo;
    jo["id"] = obj.id;
    jo["class"] = obj.class_id;
    jo["shape"] = shape_to_json(obj.shape);
    jo["role"] = role_name(obj.role);
    if (obj.reward_params) {
      const auto& rp = *obj.reward_params;
      jo["reward_params"] = {{"d_near", rp.d_near},
                             {"d_scale", rp.d_scale},
                             {"b_sat", rp.b_sat},
                             {"conf_min", rp.conf_min},
                             {"bbox_min", rp.bbox_min}};
    }
    objs.push_back(jo);
  }
  j["objects"] = objs;
  return j.dump(2);
}

}  // namespace scout
