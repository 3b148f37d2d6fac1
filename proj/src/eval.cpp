#include "scout/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include "json.hpp"

namespace scout {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

const char* tier_name(DifficultyTier tier) {
  switch (tier) {
    case DifficultyTier::kEasy: return "easy";
    case DifficultyTier::kMedium: return "medium";
    case DifficultyTier::kHard: return "hard";
  }
  return "unknown";
}

DifficultyTier classify_initial_difficulty(
    const Scene& scene, const Pose& start, const CameraModel& cam,
    const std::string& target_id, const DifficultyThresholds& t) {
  const RewardParams params = reward_params_for(scene, target_id);
  const auto rep = visibility(scene, start, cam, target_id);
  const double conf = detection_confidence(rep, params);
  const double occlusion = 1.0 - rep.visible_fraction;
  const double dist = rep.distance;

  if (conf >= t.easy_conf && dist <= t.easy_dist && occlusion <= t.easy_occl) {
    return DifficultyTier::kEasy;
  }
  if (conf < t.hard_conf || occlusion >= t.hard_occl || dist > t.hard_dist) {
    return DifficultyTier::kHard;
  }
  return DifficultyTier::kMedium;
}

ViewingDistanceField::ViewingDistanceField(const Scene& scene,
                                           const CameraModel& cam,
                                           const std::string& target_id,
                                           const SuccessThresholds& thresholds,
                                           double resolution)
    : scene_(scene),
      cam_(cam),
      target_id_(target_id),
      thresholds_(thresholds),
      params_(reward_params_for(scene, target_id)),
      resolution_(resolution) {
  const Bounds& b = scene.bounds;
  nx_ = std::max(1, static_cast<int>((b.xmax - b.xmin) / resolution));
  ny_ = std::max(1, static_cast<int>((b.ymax - b.ymin) / resolution));
  x0_ = b.xmin;
  y0_ = b.ymin;
  dist_.assign(static_cast<std::size_t>(nx_) * ny_, kInf);

  const Vec2 centroid = scene.find_target(target_id).centroid();

  std::vector<char> free_cell(dist_.size(), 0);
  using QItem = std::pair<double, int>;
  std::priority_queue<QItem, std::vector<QItem>, std::greater<>> queue;

  for (int iy = 0; iy < ny_; ++iy) {
    for (int ix = 0; ix < nx_; ++ix) {
      const double cx = x0_ + (ix + 0.5) * resolution_;
      const double cy = y0_ + (iy + 0.5) * resolution_;
      const std::size_t idx = static_cast<std::size_t>(iy) * nx_ + ix;
      // Heading is free to rotate in place, so face the target when testing
      // whether the cell can satisfy the success predicate.
      const double heading = std::atan2(centroid.y - cy, centroid.x - cx);
      const Pose p{cx, cy, heading};
      if (!is_collision_free(scene_, p)) continue;
      free_cell[idx] = 1;
      const auto rep = visibility(scene_, p, cam_, target_id_);
      if (is_success(rep, cam_, thresholds_, params_)) {
        dist_[idx] = 0.0;
        queue.emplace(0.0, static_cast<int>(idx));
      }
    }
  }

  // Multi-source shortest path over the free cells (8-connected).
  const double diag = resolution_ * std::sqrt(2.0);
  while (!queue.empty()) {
    const auto [d, idx] = queue.top();
    queue.pop();
    if (d > dist_[static_cast<std::size_t>(idx)]) continue;
    const int ix = idx % nx_;
    const int iy = idx / nx_;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int jx = ix + dx;
        const int jy = iy + dy;
        if (jx < 0 || jx >= nx_ || jy < 0 || jy >= ny_) continue;
        const std::size_t jdx = static_cast<std::size_t>(jy) * nx_ + jx;
        if (!free_cell[jdx]) continue;
        const double step = (dx != 0 && dy != 0) ? diag : resolution_;
        if (d + step < dist_[jdx]) {
          dist_[jdx] = d + step;
          queue.emplace(d + step, static_cast<int>(jdx));
        }
      }
    }
  }
}

double ViewingDistanceField::distance_from(const Pose& start) const {
  const auto rep = visibility(scene_, start, cam_, target_id_);
  if (is_success(rep, cam_, thresholds_, params_)) return 0.0;

  const int ix = std::clamp(
      static_cast<int>((start.x - x0_) / resolution_), 0, nx_ - 1);
  const int iy = std::clamp(
      static_cast<int>((start.y - y0_) / resolution_), 0, ny_ - 1);

  // The start's own cell center may be blocked by discretization; take the
  // best value in the immediate neighborhood plus the offset to reach it.
  double best = kInf;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int jx = ix + dx;
      const int jy = iy + dy;
      if (jx < 0 || jx >= nx_ || jy < 0 || jy >= ny_) continue;
      const double cell = dist_[static_cast<std::size_t>(jy) * nx_ + jx];
      if (!std::isfinite(cell)) continue;
      const double cx = x0_ + (jx + 0.5) * resolution_;
      const double cy = y0_ + (jy + 0.5) * resolution_;
      best = std::min(best, cell + std::hypot(start.x - cx, start.y - cy));
    }
  }
  if (!std::isfinite(best)) {
    throw Unreachable("no path from start to the viewing zone");
  }
  return best;
}

double estimate_optimal_distance(const Scene& scene, const CameraModel& cam,
                                 const Pose& start,
                                 const std::string& target_id,
                                 const SuccessThresholds& thresholds,
                                 double resolution) {
  const ViewingDistanceField field(scene, cam, target_id, thresholds,
                                   resolution);
  return field.distance_from(start);
}

double efficiency_score(bool success, double d, double d_star) {
  if (!success) return 0.0;
  if (d_star <= 1e-12) return 1.0;
  return std::exp(-d / d_star);
}

// ---- planner factories ----

namespace {

Action random_action(Rng& rng, const ActionLimits& limits) {
  return {rng.uniform(-limits.max_lin, limits.max_lin),
          rng.uniform(-limits.max_lin, limits.max_lin),
          rng.uniform(-limits.max_ang, limits.max_ang)};
}

// Dispatches one planning call for the named strategy.
PlanResult plan_with(const std::string& name, const PlanModel& pm,
                     const PlannerConfig& cfg, const Action& a_prev,
                     std::uint64_t step_seed, const Observation& obs,
                     const std::string& query, int target_class) {
  if (name == "grad") {
    return grad_plan(pm, ActionSequence::zeros(cfg.horizon), cfg, a_prev);
  }
  if (name == "cem") {
    return cem_plan(pm, cfg, step_seed, a_prev);
  }
  if (name == "hr") {
    return heuristic_plan(pm, cfg, a_prev);
  }
  if (name == "womap") {
    PrimitiveProposer proposer(target_class);
    const auto proposals = proposer.propose(query, obs, cfg.proposals_kept);
    return proposal_plan(pm, proposals, cfg, a_prev);
  }
  throw EvalConfigError("unknown planner: " + name);
}

}  // namespace

TrialPlannerFactory learned_planner_factory(const WorldModel& model,
                                            const PlannerConfig& cfg) {
  return [&model, cfg](const SceneTask& task, const CameraModel& /*cam*/,
                       const std::string& name, std::uint64_t seed) {
    const int target_class = task.scene.find_target(task.target_id).class_id;
    const LanguageEmbedding e = embed_language(task.query, model.vocab());
    return PlannerFn([&model, cfg, name, seed, target_class, e, task](
                         const Observation& obs, const Pose& /*pose*/,
                         const Action& a_prev, int step) {
      if (name == "random") {
        Rng rng(mix64(seed ^ static_cast<std::uint64_t>(step)));
        PlanResult res;
        res.sequence.actions = {random_action(rng, cfg.limits)};
        return res;
      }
      const Tensor z0 = model.encode(obs);
      const LearnedPlanModel pm(model, z0, e);
      return plan_with(name, pm, cfg, a_prev,
                       mix64(seed ^ static_cast<std::uint64_t>(step)), obs,
                       task.query, target_class);
    });
  };
}

TrialPlannerFactory oracle_planner_factory(const PlannerConfig& cfg) {
  return [cfg](const SceneTask& task, const CameraModel& cam,
               const std::string& name, std::uint64_t seed) {
    const int target_class = task.scene.find_target(task.target_id).class_id;
    return PlannerFn([cfg, name, seed, target_class, &task, cam](
                         const Observation& obs, const Pose& pose,
                         const Action& a_prev, int step) {
      if (name == "random") {
        Rng rng(mix64(seed ^ static_cast<std::uint64_t>(step)));
        PlanResult res;
        res.sequence.actions = {random_action(rng, cfg.limits)};
        return res;
      }
      const OraclePlanModel pm(task.scene, cam, pose, task.target_id);
      return plan_with(name, pm, cfg, a_prev,
                       mix64(seed ^ static_cast<std::uint64_t>(step)), obs,
                       task.query, target_class);
    });
  };
}

// ---- battery runner ----

namespace {

constexpr DifficultyTier kTiers[] = {DifficultyTier::kEasy,
                                     DifficultyTier::kMedium,
                                     DifficultyTier::kHard};

struct TrialTask {
  bool found = false;
  Pose start;
  double d_star = 0.0;
  std::string error;
  std::uint64_t seed = 0;
};

TrialTask make_trial_task(const BatterySpec& spec, const SceneTask& scene_task,
                          const ViewingDistanceField& field,
                          std::size_t scene_i, std::size_t tier_i,
                          int trial) {
  TrialTask task;
  task.seed = mix64(spec.master_seed ^ mix64(0x100 + scene_i) ^
                    mix64(0x200 + tier_i) ^
                    mix64(0x300 + static_cast<std::uint64_t>(trial)));
  const Bounds& b = scene_task.scene.bounds;
  const double margin = scene_task.scene.free_radius + 0.05;
  const RewardParams params =
      reward_params_for(scene_task.scene, scene_task.target_id);
  Rng rng(task.seed);
  // Generous cap: valid starts can be rare when a tier band is a thin shell
  // around the success region (for example, partially occluded close views).
  for (int attempt = 0; attempt < 20000; ++attempt) {
    const Pose p{rng.uniform(b.xmin + margin, b.xmax - margin),
                 rng.uniform(b.ymin + margin, b.ymax - margin),
                 rng.uniform(-kPi, kPi)};
    if (!is_collision_free(scene_task.scene, p)) continue;
    if (classify_initial_difficulty(scene_task.scene, p, spec.cam,
                                    scene_task.target_id,
                                    spec.difficulty) != kTiers[tier_i]) {
      continue;
    }
    // A trial should require motion: skip starts that already succeed.
    const auto rep =
        visibility(scene_task.scene, p, spec.cam, scene_task.target_id);
    if (is_success(rep, spec.cam, spec.thresholds, params)) continue;
    task.found = true;
    task.start = p;
    break;
  }
  if (!task.found) {
    task.error = "no start pose found in tier";
    return task;
  }
  try {
    task.d_star = field.distance_from(task.start);
  } catch (const Unreachable& e) {
    task.found = false;
    task.error = e.what();
  }
  return task;
}

}  // namespace

BatteryResult run_trials(const BatterySpec& spec,
                         const TrialPlannerFactory& factory) {
  struct Row {
    std::size_t scene_i, planner_i, tier_i;
    int trial;
    TrialResult result;
  };
  std::vector<Row> rows;

  for (std::size_t si = 0; si < spec.scenes.size(); ++si) {
    const SceneTask& st = spec.scenes[si];
    const ViewingDistanceField field(st.scene, spec.cam, st.target_id,
                                     spec.thresholds);
    for (std::size_t ti = 0; ti < 3; ++ti) {
      for (int trial = 0; trial < spec.n_trials; ++trial) {
        const TrialTask task = make_trial_task(spec, st, field, si, ti, trial);
        for (std::size_t pi = 0; pi < spec.planners.size(); ++pi) {
          const std::string& planner = spec.planners[pi];
          TrialResult r;
          r.scene = st.name;
          r.planner = planner;
          r.tier = tier_name(kTiers[ti]);
          r.seed = mix64(task.seed ^ fnv1a64(planner));
          r.d_star = task.d_star;
          if (!task.found) {
            r.error = task.error;
          } else {
            try {
              const PlannerFn fn = factory(st, spec.cam, planner, r.seed);
              const EpisodeTrace trace = execute_episode(
                  st.scene, spec.cam, fn, st.target_id, task.start,
                  spec.max_steps, spec.thresholds, spec.planner_cfg.limits);
              r.success = trace.success;
              r.distance = trace.distance;
              r.steps = static_cast<int>(trace.steps.size()) - 1;
              r.efficiency =
                  efficiency_score(trace.success, trace.distance, task.d_star);
            } catch (const std::exception& e) {
              r.error = e.what();
              r.success = false;
              r.efficiency = 0.0;
            }
          }
          rows.push_back({si, pi, ti, trial, std::move(r)});
        }
      }
    }
  }

  // Deterministic merge order: scene, planner, tier, trial.
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.scene_i, a.planner_i, a.tier_i, a.trial) <
           std::tie(b.scene_i, b.planner_i, b.tier_i, b.trial);
  });

  BatteryResult result;
  for (auto& row : rows) result.trials.push_back(std::move(row.result));

  for (std::size_t si = 0; si < spec.scenes.size(); ++si) {
    for (std::size_t pi = 0; pi < spec.planners.size(); ++pi) {
      for (std::size_t ti = 0; ti < 3; ++ti) {
        CellAggregate cell;
        cell.scene = spec.scenes[si].name;
        cell.planner = spec.planners[pi];
        cell.tier = tier_name(kTiers[ti]);
        for (const auto& t : result.trials) {
          if (t.scene != cell.scene || t.planner != cell.planner ||
              t.tier != cell.tier) {
            continue;
          }
          ++cell.n;
          cell.success_rate += t.success ? 1.0 : 0.0;
          cell.mean_efficiency += t.efficiency;
        }
        if (cell.n > 0) {
          cell.success_rate /= cell.n;
          cell.mean_efficiency /= cell.n;
        }
        result.cells.push_back(cell);
      }
    }
  }
  return result;
}

// ---- reporting ----

std::string trials_csv(const std::vector<TrialResult>& trials) {
  std::ostringstream out;
  out << "scene,planner,tier,seed,success,distance,d_star,efficiency,steps,"
         "error\n";
  for (const auto& t : trials) {
    out << t.scene << ',' << t.planner << ',' << t.tier << ',' << t.seed << ','
        << (t.success ? 1 : 0) << ',' << fmt_double(t.distance) << ','
        << fmt_double(t.d_star) << ',' << fmt_double(t.efficiency) << ','
        << t.steps << ',' << t.error << '\n';
  }
  return out.str();
}

std::string aggregate_json(const BatteryResult& result) {
  json cells = json::array();
  std::map<std::string, std::pair<double, int>> by_planner;
  for (const auto& c : result.cells) {
    cells.push_back({{"scene", c.scene},
                     {"planner", c.planner},
                     {"tier", c.tier},
                     {"n", c.n},
                     {"success_rate", c.success_rate},
                     {"mean_efficiency", c.mean_efficiency}});
    auto& [sum, n] = by_planner[c.planner];
    sum += c.success_rate;
    ++n;
  }
  json planners = json::object();
  for (const auto& [name, acc] : by_planner) {
    planners[name] = acc.second > 0 ? acc.first / acc.second : 0.0;
  }
  json j;
  j["cells"] = cells;
  j["mean_success_by_planner"] = planners;
  return j.dump(2);
}

std::map<std::string, std::string> plot_data_csvs(const BatteryResult& result) {
  std::ostringstream success, efficiency;
  success << "scene,planner,tier,success_rate\n";
  efficiency << "scene,planner,tier,mean_efficiency\n";
  for (const auto& c : result.cells) {
    success << c.scene << ',' << c.planner << ',' << c.tier << ','
            << fmt_double(c.success_rate) << '\n';
    efficiency << c.scene << ',' << c.planner << ',' << c.tier << ','
               << fmt_double(c.mean_efficiency) << '\n';
  }
  return {{"success_by_tier.csv", success.str()},
          {"efficiency_by_tier.csv", efficiency.str()}};
}

// ---- config-driven entry point ----

namespace {

PlannerConfig planner_config_from_json(const json& j) {
  PlannerConfig cfg;
  cfg.horizon = j.value("horizon", cfg.horizon);
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.grad_steps = j.value("grad_steps", cfg.grad_steps);
  cfg.grad_lr = j.value("grad_lr", cfg.grad_lr);
  cfg.proposals_kept = j.value("k", cfg.proposals_kept);
  if (j.contains("cem")) {
    const json& c = j.at("cem");
    cfg.cem.population = c.value("population", cfg.cem.population);
    cfg.cem.elites = c.value("elites", cfg.cem.elites);
    cfg.cem.iterations = c.value("iterations", cfg.cem.iterations);
    cfg.cem.init_sigma = c.value("init_sigma", cfg.cem.init_sigma);
  }
  return cfg;
}

}  // namespace

void run_eval_config(const std::string& config_path, const std::string& out_dir,
                     bool plot_data) {
  std::ifstream in(config_path);
  if (!in) throw EvalConfigError("cannot open config: " + config_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw EvalConfigError(std::string("config parse error: ") + e.what());
  }

  BatterySpec spec;
  if (!j.contains("scenes") || !j.at("scenes").is_array()) {
    throw EvalConfigError("config needs a scenes list");
  }
  for (const auto& entry : j.at("scenes")) {
    SceneTask task;
    std::string path;
    if (entry.is_string()) {
      path = entry.get<std::string>();
      task.target_id = "target";
    } else {
      path = entry.at("path").get<std::string>();
      task.target_id = entry.value("target", "target");
    }
    task.query = entry.is_object() ? entry.value("query", task.target_id)
                                   : task.target_id;
    task.name = std::filesystem::path(path).stem().string();
    task.scene = load_scene(path);
    spec.scenes.push_back(std::move(task));
  }

  spec.planners = j.value(
      "planners",
      std::vector<std::string>{"grad", "cem", "hr", "womap", "random"});
  spec.n_trials = j.value("n_trials", 50);
  spec.master_seed = j.value("master_seed", 0ULL);
  spec.max_steps = j.value("max_steps", 40);
  if (j.contains("thresholds")) {
    spec.thresholds.conf_min =
        j.at("thresholds").value("conf_min", spec.thresholds.conf_min);
    spec.thresholds.bbox_min =
        j.at("thresholds").value("bbox_min", spec.thresholds.bbox_min);
  }
  if (j.contains("planner")) {
    spec.planner_cfg = planner_config_from_json(j.at("planner"));
  }

  if (!j.contains("ckpt")) throw EvalConfigError("config needs a ckpt path");
  auto model = std::make_shared<WorldModel>(
      WorldModel::load(j.at("ckpt").get<std::string>()));
  spec.cam = CameraModel{kPi / 2.0, model->feature_config().n_rays,
                         model->feature_config().max_range};

  std::shared_ptr<WorldModel> narrow;
  if (j.contains("ckpt_narrow")) {
    narrow = std::make_shared<WorldModel>(
        WorldModel::load(j.at("ckpt_narrow").get<std::string>()));
    // Evaluate the restricted-coverage model on the same trial seeds.
    const auto base = spec.planners;
    for (const auto& name : base) spec.planners.push_back(name + "@narrow");
  }

  const PlannerConfig cfg = spec.planner_cfg;
  const TrialPlannerFactory full = learned_planner_factory(*model, cfg);
  const TrialPlannerFactory narrow_factory =
      narrow ? learned_planner_factory(*narrow, cfg) : TrialPlannerFactory{};
  const TrialPlannerFactory dispatch =
      [model, narrow, full, narrow_factory](
          const SceneTask& task, const CameraModel& cam,
          const std::string& name, std::uint64_t seed) {
        const std::string suffix = "@narrow";
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) ==
                0) {
          return narrow_factory(
              task, cam, name.substr(0, name.size() - suffix.size()), seed);
        }
        return full(task, cam, name, seed);
      };

  const BatteryResult result = run_trials(spec, dispatch);

  std::filesystem::create_directories(out_dir);
  const auto write = [&](const std::string& file, const std::string& body) {
    std::ofstream out(std::filesystem::path(out_dir) / file);
    if (!out) throw EvalConfigError("cannot write output: " + file);
    out << body;
  };
  write("trials.csv", trials_csv(result.trials));
  write("aggregate.json", aggregate_json(result) + "\n");
  if (plot_data) {
    for (const auto& [file, body] : plot_data_csvs(result)) write(file, body);
  }
}

}  // namespace scout
