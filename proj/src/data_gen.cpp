#include "scout/data_gen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace scout {

using nlohmann::json;

std::string content_digest(const std::string& content) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : content) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool in_viewing_zone(const Scene& scene, const CameraModel& cam, const Pose& p,
                     const std::string& target_id, double goal_radius) {
  const VisibilityReport rep = visibility(scene, p, cam, target_id);
  return rep.in_fov && rep.visible_fraction > 0.0 &&
         rep.distance <= goal_radius;
}

Pose sample_free_pose(const Scene& scene, Rng& rng,
                      const std::optional<Bounds>& region) {
  const Bounds b = region.value_or(scene.bounds);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Pose p{rng.uniform(b.xmin, b.xmax), rng.uniform(b.ymin, b.ymax),
                 rng.uniform(-kPi, kPi)};
    if (is_collision_free(scene, p)) return p;
  }
  throw PlanningFailed("sample_free_pose: no collision-free pose found");
}

namespace {

double heading_to(const Vec2& from, const Vec2& to) {
  return std::atan2(to.y - from.y, to.x - from.x);
}

bool edge_collision_free(const Scene& scene, const Vec2& a, const Vec2& b) {
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / 0.02)));
  for (int i = 0; i <= n; ++i) {
    const Vec2 p = a + (b - a) * (static_cast<double>(i) / n);
    if (!is_collision_free(scene, {p.x, p.y, 0.0})) return false;
  }
  return true;
}

// Resamples a polyline at uniform arc-length spacing within
// [step_lo, step_hi], headings facing travel, final heading facing target.
std::vector<Pose> polyline_to_trajectory(const std::vector<Vec2>& pts,
                                         const Vec2& target,
                                         const TrajectoryParams& params,
                                         double start_theta) {
  double total = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) total += (pts[i] - pts[i - 1]).norm();

  std::vector<Vec2> samples;
  if (total < params.step_lo) {
    samples = {pts.front(), pts.back()};
  } else {
    int n = std::max(1, static_cast<int>(std::ceil(total / params.step_hi)));
    while (n > 1 && total / n < params.step_lo) --n;
    const double s = total / n;
    samples.push_back(pts.front());
    double walked = 0.0;
    std::size_t seg = 1;
    double seg_used = 0.0;
    for (int k = 1; k <= n; ++k) {
      double need = k * s - walked;
      walked = k * s;
      while (seg < pts.size()) {
        const Vec2 dir = pts[seg] - pts[seg - 1];
        const double seg_len = dir.norm();
        const double remain = seg_len - seg_used;
        if (need <= remain + 1e-12) {
          seg_used += need;
          samples.push_back(pts[seg - 1] + dir * (seg_used / seg_len));
          break;
        }
        need -= remain;
        seg_used = 0.0;
        ++seg;
      }
    }
  }

  std::vector<Pose> traj;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double theta;
    if (i + 1 < samples.size() &&
        (samples[i + 1] - samples[i]).norm() > 1e-12) {
      theta = heading_to(samples[i], samples[i + 1]);
    } else if (i + 1 == samples.size()) {
      theta = heading_to(samples[i], target);
    } else {
      theta = start_theta;
    }
    traj.push_back({samples[i].x, samples[i].y, normalize_angle(theta)});
  }
  return traj;
}

}  // namespace

std::vector<Pose> sample_trajectory(const Scene& scene, const CameraModel& cam,
                                    const Pose& start,
                                    const std::string& target_id,
                                    std::uint64_t rng_seed,
                                    const TrajectoryParams& params) {
  if (!is_collision_free(scene, start)) {
    throw PlanningFailed("sample_trajectory: start pose in collision");
  }
  const SceneObject& target = scene.find_target(target_id);
  const Vec2 goal = target.centroid();

  if (in_viewing_zone(scene, cam, start, target_id, params.goal_radius)) {
    return {start};
  }

  auto zone_entry = [&](const Vec2& pos) {
    const Pose look{pos.x, pos.y, heading_to(pos, goal)};
    return in_viewing_zone(scene, cam, look, target_id, params.goal_radius);
  };

  // Straight-line connection first: walk toward the target centroid until the
  // viewing zone is entered.
  {
    std::vector<Vec2> line = {start.position()};
    Vec2 cur = start.position();
    bool ok = false;
    const double step = std::min(0.02, params.step_lo);
    for (int i = 0; i < 100000; ++i) {
      if (zone_entry(cur)) {
        ok = true;
        break;
      }
      const Vec2 dir = goal - cur;
      const double d = dir.norm();
      if (d < 1e-9) break;
      const Vec2 next = cur + dir * (step / d);
      if (!is_collision_free(scene, {next.x, next.y, 0.0})) break;
      cur = next;
    }
    if (ok) {
      line.push_back(cur);
      return polyline_to_trajectory(line, goal, params, start.theta);
    }
  }

  // RRT fallback: uniform position sampling with goal bias, straight-line
  // steering, collision-checked edges.
  Rng rng(rng_seed);
  struct TreeNode {
    Vec2 pos;
    int parent;
  };
  std::vector<TreeNode> tree = {{start.position(), -1}};
  int reached = -1;
  for (int it = 0; it < params.rrt_iterations && reached < 0; ++it) {
    Vec2 sample;
    if (rng.uniform() < 0.2) {
      sample = goal;
    } else {
      sample = {rng.uniform(scene.bounds.xmin, scene.bounds.xmax),
                rng.uniform(scene.bounds.ymin, scene.bounds.ymax)};
    }
    int nearest = 0;
    double best = (tree[0].pos - sample).norm_sq();
    for (std::size_t i = 1; i < tree.size(); ++i) {
      const double d = (tree[i].pos - sample).norm_sq();
      if (d < best) {
        best = d;
        nearest = static_cast<int>(i);
      }
    }
    const Vec2 from = tree[nearest].pos;
    Vec2 dir = sample - from;
    const double d = dir.norm();
    if (d < 1e-9) continue;
    const double ext = std::min(d, 0.25);
    const Vec2 to = from + dir * (ext / d);
    if (!is_collision_free(scene, {to.x, to.y, 0.0})) continue;
    if (!edge_collision_free(scene, from, to)) continue;
    tree.push_back({to, nearest});
    if (zone_entry(to)) reached = static_cast<int>(tree.size()) - 1;
  }
  if (reached < 0) {
    throw PlanningFailed("sample_trajectory: viewing zone not reached");
  }

  std::vector<Vec2> path;
  for (int i = reached; i >= 0; i = tree[i].parent) path.push_back(tree[i].pos);
  std::reverse(path.begin(), path.end());
  return polyline_to_trajectory(path, goal, params, start.theta);
}

std::vector<Pose> perturb(const Scene& scene, const std::vector<Pose>& traj,
                          std::uint64_t rng_seed,
                          const TrajectoryParams& params) {
  Rng rng(rng_seed);
  std::vector<Pose> out;
  out.reserve(traj.size());
  for (const Pose& p : traj) {
    Pose chosen = p;
    for (int attempt = 0; attempt < 10; ++attempt) {
      const Pose cand{p.x + rng.normal(0.0, params.perturb_lin_sigma),
                      p.y + rng.normal(0.0, params.perturb_lin_sigma),
                      normalize_angle(
                          p.theta + rng.normal(0.0, params.perturb_ang_sigma))};
      if (is_collision_free(scene, cand) &&
          scene.bounds.contains(cand.position())) {
        chosen = cand;
        break;
      }
    }
    out.push_back(chosen);
  }
  return out;
}

Dataset build_dataset(const Scene& scene, int n_trajectories,
                      const CameraModel& cam, const TrajectoryParams& params,
                      std::uint64_t rng_seed, const std::string& vocab_ref) {
  Dataset ds;
  ds.scene_ref = content_digest(scene_to_json(scene));
  ds.vocab_ref = vocab_ref;
  const auto targets = scene.target_candidates();

  const Rng master(rng_seed);
  for (int t = 0; t < n_trajectories; ++t) {
    Rng rng = master.fork(static_cast<std::uint64_t>(t));
    std::vector<Pose> traj;
    for (int attempt = 0; attempt < 100 && traj.empty(); ++attempt) {
      try {
        const Pose start = sample_free_pose(scene, rng, params.start_region);
        const std::string& target_id =
            targets[rng.uniform_index(targets.size())]->id;
        traj = sample_trajectory(scene, cam, start, target_id, rng.next_u64(),
                                 params);
      } catch (const PlanningFailed&) {
        traj.clear();
      }
    }
    if (traj.empty()) continue;  // infeasible trajectory, skipped

    // Exactly n_waypoints poses, evenly spread over the path.
    std::vector<Pose> picked;
    const int nw = params.n_waypoints;
    const int len = static_cast<int>(traj.size());
    for (int i = 0; i < nw; ++i) {
      const int idx =
          nw == 1 ? 0
                  : static_cast<int>(std::lround(
                        static_cast<double>(i) * (len - 1) / (nw - 1)));
      picked.push_back(traj[static_cast<std::size_t>(idx)]);
    }
    picked = perturb(scene, picked, rng.next_u64(), params);

    for (int i = 0; i < static_cast<int>(picked.size()); ++i) {
      DatasetRecord rec;
      rec.trajectory_id = t;
      rec.step_index = i;
      rec.pose = picked[static_cast<std::size_t>(i)];
      rec.observation = render_scan(scene, rec.pose, cam);
      for (const SceneObject* obj : targets) {
        rec.rewards[obj->id] = ground_truth_reward(
            scene, rec.pose, cam, obj->id, reward_params_for(scene, obj->id));
      }
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

TrainingSequence sample_training_sequence(const Dataset& ds, int horizon,
                                          std::uint64_t rng_seed) {
  if (horizon < 1) throw InsufficientLength("horizon must be >= 1");
  // Group record indices by trajectory (records are stored in order).
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // [begin, end)
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= ds.records.size(); ++i) {
    if (i == ds.records.size() ||
        ds.records[i].trajectory_id != ds.records[begin].trajectory_id) {
      if (i - begin >= static_cast<std::size_t>(horizon) + 1) {
        spans.emplace_back(begin, i);
      }
      begin = i;
    }
  }
  if (spans.empty()) {
    throw InsufficientLength("no trajectory has horizon + 1 records");
  }
  Rng rng(rng_seed);
  const auto [lo, hi] = spans[rng.uniform_index(spans.size())];
  const std::size_t max_start = hi - lo - static_cast<std::size_t>(horizon) - 1;
  const std::size_t start = lo + rng.uniform_index(max_start + 1);

  TrainingSequence seq;
  for (int h = 0; h <= horizon; ++h) {
    const DatasetRecord& rec = ds.records[start + static_cast<std::size_t>(h)];
    seq.observations.push_back(rec.observation);
    seq.poses.push_back(rec.pose);
    if (h > 0) {
      seq.actions.push_back(
          relative_action(ds.records[start + h - 1].pose, rec.pose));
      seq.successor_rewards.push_back(rec.rewards);
    }
  }
  return seq;
}

namespace {

json params_to_json(const TrajectoryParams& p) {
  json j = {{"n_waypoints", p.n_waypoints}, {"step_lo", p.step_lo},
            {"step_hi", p.step_hi},         {"perturb_lin_sigma", p.perturb_lin_sigma},
            {"perturb_ang_sigma", p.perturb_ang_sigma},
            {"rrt_iterations", p.rrt_iterations},
            {"goal_radius", p.goal_radius}};
  if (p.start_region) {
    j["start_region"] = {p.start_region->xmin, p.start_region->ymin,
                         p.start_region->xmax, p.start_region->ymax};
  }
  return j;
}

}  // namespace

void save_dataset(const Dataset& ds, const TrajectoryParams& params,
                  std::uint64_t seed, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetFormatError("cannot open for writing: " + path);
  json header = {{"scene_ref", ds.scene_ref},
                 {"vocab_ref", ds.vocab_ref},
                 {"params", params_to_json(params)},
                 {"seed", seed}};
  out << header.dump() << "\n";
  for (const auto& rec : ds.records) {
    json j = {{"trajectory_id", rec.trajectory_id},
              {"step_index", rec.step_index},
              {"pose", {rec.pose.x, rec.pose.y, rec.pose.theta}},
              {"depths", rec.observation.depths},
              {"classes", rec.observation.classes},
              {"rewards", rec.rewards}};
    out << j.dump() << "\n";
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetFormatError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DatasetFormatError("empty dataset file");
  Dataset ds;
  try {
    const json header = json::parse(line);
    ds.scene_ref = header.at("scene_ref").get<std::string>();
    ds.vocab_ref = header.at("vocab_ref").get<std::string>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      DatasetRecord rec;
      rec.trajectory_id = j.at("trajectory_id").get<int>();
      rec.step_index = j.at("step_index").get<int>();
      rec.pose = {j.at("pose").at(0).get<double>(),
                  j.at("pose").at(1).get<double>(),
                  j.at("pose").at(2).get<double>()};
      rec.observation.depths = j.at("depths").get<std::vector<double>>();
      rec.observation.classes = j.at("classes").get<std::vector<int>>();
      rec.rewards = j.at("rewards").get<std::map<std::string, double>>();
      ds.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw DatasetFormatError(std::string("dataset parse error: ") + e.what());
  }
  return ds;
}

}  // namespace scout
