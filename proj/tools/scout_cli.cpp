#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "scout/data_gen.hpp"
#include "scout/eval.hpp"
#include "scout/planners.hpp"
#include "scout/world_model.hpp"

using nlohmann::json;
using namespace scout;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TrajectoryParams parse_trajectory_params(const std::string& path) {
  TrajectoryParams p;
  const json j = json::parse(read_file(path));
  p.n_waypoints = j.value("n_waypoints", p.n_waypoints);
  p.step_lo = j.value("step_lo", p.step_lo);
  p.step_hi = j.value("step_hi", p.step_hi);
  p.perturb_lin_sigma = j.value("perturb_lin_sigma", p.perturb_lin_sigma);
  p.perturb_ang_sigma = j.value("perturb_ang_sigma", p.perturb_ang_sigma);
  p.rrt_iterations = j.value("rrt_iterations", p.rrt_iterations);
  p.goal_radius = j.value("goal_radius", p.goal_radius);
  if (j.contains("start_region")) {
    const auto& r = j.at("start_region");
    p.start_region = Bounds{r.at(0).get<double>(), r.at(1).get<double>(),
                            r.at(2).get<double>(), r.at(3).get<double>()};
  }
  return p;
}

HyperParams parse_hyper(const json& j) {
  HyperParams h;
  h.lr = j.value("lr", h.lr);
  h.start_lr = j.value("start_lr", h.start_lr);
  h.warmup_epochs = j.value("warmup_epochs", h.warmup_epochs);
  h.weight_decay = j.value("weight_decay", h.weight_decay);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.epochs = j.value("epochs", h.epochs);
  h.horizon = j.value("horizon", h.horizon);
  h.d_z = j.value("d_z", h.d_z);
  h.d_e = j.value("d_e", h.d_e);
  h.w_dyn = j.value("w_dyn", h.w_dyn);
  h.w_rew = j.value("w_rew", h.w_rew);
  h.d_embed = j.value("d_embed", h.d_embed);
  h.d_hidden = j.value("d_hidden", h.d_hidden);
  h.trainable_encoder = j.value("trainable_encoder", h.trainable_encoder);
  h.encoder_hidden = j.value("encoder_hidden", h.encoder_hidden);
  return h;
}

int cmd_gen_data(const std::string& scene_path, const std::string& out,
                 int n_traj, std::uint64_t seed,
                 const std::string& params_path,
                 const std::string& vocab_path, int n_rays, double max_range,
                 double fov) {
  const Scene scene = load_scene(scene_path);
  const CameraModel cam{fov, n_rays, max_range};
  TrajectoryParams params;
  if (!params_path.empty()) params = parse_trajectory_params(params_path);
  std::string vocab_ref;
  if (!vocab_path.empty()) vocab_ref = content_digest(read_file(vocab_path));
  const Dataset ds = build_dataset(scene, n_traj, cam, params, seed, vocab_ref);
  save_dataset(ds, params, seed, out);
  std::cout << "wrote " << ds.records.size() << " records to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& out,
              const std::string& config_path, std::uint64_t seed) {
  const Dataset ds = load_dataset(data_path);
  if (ds.records.empty()) throw std::runtime_error("dataset is empty");
  const json cfg =
      config_path.empty() ? json::object() : json::parse(read_file(config_path));
  const HyperParams hyper = parse_hyper(cfg);

  FeatureConfig feat;
  feat.n_rays = static_cast<int>(ds.records.front().observation.depths.size());
  feat.max_range = cfg.value("max_range", 5.0);
  feat.n_classes = cfg.value("n_classes", 8);

  Vocabulary vocab = cfg.contains("vocab")
                         ? Vocabulary::load(cfg.at("vocab").get<std::string>())
                         : Vocabulary(hyper.d_e, 0);
  if (vocab.dim() != hyper.d_e) {
    throw std::runtime_error("vocabulary dimension must match d_e");
  }

  WorldModel model(feat, std::move(vocab), hyper, seed);
  const auto log = model.train(ds, seed);
  model.save(out);
  if (!log.empty()) {
    std::cout << "final losses: dynamics " << log.back().dyn << ", reward "
              << log.back().rew << "\n";
  }
  std::cout << "saved checkpoint to " << out << "\n";
  return 0;
}

int cmd_rollout(const std::string& scene_path, const std::string& ckpt,
                const std::string& query, const std::string& planner,
                std::uint64_t seed, const std::string& target,
                const std::string& start_str, int max_steps,
                const std::string& proposals_path, const std::string& out) {
  const Scene scene = load_scene(scene_path);
  const WorldModel model = WorldModel::load(ckpt);
  const CameraModel cam{kPi / 2.0, model.feature_config().n_rays,
                        model.feature_config().max_range};

  Pose start;
  if (!start_str.empty()) {
    std::istringstream ss(start_str);
    char comma;
    if (!(ss >> start.x >> comma >> start.y >> comma >> start.theta)) {
      throw std::runtime_error("--start expects \"x,y,theta\"");
    }
    if (!is_collision_free(scene, start)) {
      throw std::runtime_error("start pose is not collision-free");
    }
  } else {
    Rng rng(seed);
    start = sample_free_pose(scene, rng);
  }

  SceneTask task{"scene", scene, target, query};
  PlannerConfig cfg;
  PlannerFn fn;
  if (planner == "womap" && !proposals_path.empty()) {
    // External ranked proposals instead of the scripted proposer.
    auto proposer = std::make_shared<FileProposer>(proposals_path);
    const LanguageEmbedding e = embed_language(query, model.vocab());
    fn = [&model, cfg, proposer, e, query](const Observation& obs,
                                           const Pose&, const Action& a_prev,
                                           int) {
      const auto props = proposer->propose(query, obs, cfg.proposals_kept);
      const LearnedPlanModel pm(model, model.encode(obs), e);
      return proposal_plan(pm, props, cfg, a_prev);
    };
  } else {
    fn = learned_planner_factory(model, cfg)(task, cam, planner, seed);
  }

  const EpisodeTrace trace = execute_episode(
      scene, cam, fn, target, start, max_steps, SuccessThresholds{},
      cfg.limits);

  json steps = json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"pose", {s.pose.x, s.pose.y, s.pose.theta}},
                     {"action", {s.action.dx, s.action.dy, s.action.dtheta}},
                     {"oracle_reward", s.oracle_reward},
                     {"predicted_return", s.predicted_return}});
  }
  json j;
  j["query"] = query;
  j["planner"] = planner;
  j["seed"] = seed;
  j["success"] = trace.success;
  j["distance"] = trace.distance;
  j["final_pose"] = {trace.final_pose.x, trace.final_pose.y,
                     trace.final_pose.theta};
  j["steps"] = steps;
  const std::string text = j.dump(2) + "\n";
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write output: " + out);
    f << text;
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-perception world-model lab"};
  app.require_subcommand(1);

  // gen-data
  std::string scene_path, out_path, params_path, vocab_path;
  int n_traj = 10;
  std::uint64_t seed = 0;
  int n_rays = 64;
  double max_range = 5.0;
  double fov = kPi / 2.0;
  auto* gen = app.add_subcommand("gen-data", "Generate a trajectory dataset");
  gen->add_option("--scene", scene_path, "Scene JSON file")->required();
  gen->add_option("--out", out_path, "Output dataset path")->required();
  gen->add_option("--n-traj", n_traj, "Number of trajectories")->required();
  gen->add_option("--seed", seed, "Master seed")->required();
  gen->add_option("--params", params_path, "Trajectory parameter JSON");
  gen->add_option("--vocab", vocab_path, "Vocabulary file to reference");
  gen->add_option("--n-rays", n_rays, "Camera ray count");
  gen->add_option("--max-range", max_range, "Camera max range [m]");
  gen->add_option("--fov", fov, "Camera field of view [rad]");

  // train
  std::string data_path, ckpt_path, config_path;
  std::uint64_t train_seed = 0;
  auto* train = app.add_subcommand("train", "Train a world model");
  train->add_option("--data", data_path, "Dataset file")->required();
  train->add_option("--out", ckpt_path, "Checkpoint output path")->required();
  train->add_option("--config", config_path, "Hyperparameter JSON");
  train->add_option("--seed", train_seed, "Training seed")->required();

  // rollout
  std::string r_scene, r_ckpt, r_query, r_planner, r_target = "target";
  std::string r_start, r_proposals, r_out;
  std::uint64_t r_seed = 0;
  int r_max_steps = 40;
  auto* roll = app.add_subcommand("rollout", "Run one planning episode");
  roll->add_option("--scene", r_scene, "Scene JSON file")->required();
  roll->add_option("--ckpt", r_ckpt, "Model checkpoint")->required();
  roll->add_option("--query", r_query, "Language query")->required();
  roll->add_option("--planner", r_planner, "grad|cem|hr|womap|random")
      ->required()
      ->check(CLI::IsMember({"grad", "cem", "hr", "womap", "random"}));
  roll->add_option("--seed", r_seed, "Episode seed")->required();
  roll->add_option("--target", r_target, "Target object id");
  roll->add_option("--start", r_start, "Start pose \"x,y,theta\"");
  roll->add_option("--max-steps", r_max_steps, "Step budget");
  roll->add_option("--proposals", r_proposals,
                   "Ranked proposal JSON (womap only)");
  roll->add_option("--out", r_out, "Also write the trace JSON here");

  // eval
  std::string e_config, e_out;
  bool e_plot = false;
  auto* eval = app.add_subcommand("eval", "Run a trial battery");
  eval->add_option("--config", e_config, "Battery config JSON")->required();
  eval->add_option("--out", e_out, "Output directory")->required();
  eval->add_flag("--plot-data", e_plot, "Emit per-figure CSVs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen_data(scene_path, out_path, n_traj, seed, params_path,
                          vocab_path, n_rays, max_range, fov);
    }
    if (train->parsed()) {
      return cmd_train(data_path, ckpt_path, config_path, train_seed);
    }
    if (roll->parsed()) {
      return cmd_rollout(r_scene, r_ckpt, r_query, r_planner, r_seed, r_target,
                         r_start, r_max_steps, r_proposals, r_out);
    }
    if (eval->parsed()) {
      run_eval_config(e_config, e_out, e_plot);
      std::cout << "wrote results to " << e_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
