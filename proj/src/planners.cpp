#include "scout/planners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace scout {

using nlohmann::json;

namespace {

Tensor action_row(const Action& a) {
  return Tensor::row({a.dx, a.dy, a.dtheta});
}

std::vector<double> flatten(const ActionSequence& seq) {
  std::vector<double> x;
  x.reserve(seq.actions.size() * 3);
  for (const auto& a : seq.actions) {
    x.push_back(a.dx);
    x.push_back(a.dy);
    x.push_back(a.dtheta);
  }
  return x;
}

ActionSequence unflatten(const std::vector<double>& x) {
  ActionSequence seq;
  seq.actions.resize(x.size() / 3);
  for (std::size_t t = 0; t < seq.actions.size(); ++t) {
    seq.actions[t] = {x[3 * t], x[3 * t + 1], x[3 * t + 2]};
  }
  return seq;
}

ActionSequence clamp_sequence(ActionSequence seq, const ActionLimits& limits) {
  for (auto& a : seq.actions) a = clamp_action(a, limits);
  return seq;
}

// Pads with zero actions (or truncates) so every candidate spans the horizon.
ActionSequence fit_horizon(ActionSequence seq, int horizon) {
  seq.actions.resize(static_cast<std::size_t>(horizon));
  return seq;
}

int argmax_tie_lowest(const std::vector<double>& scores) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

}  // namespace

double smoothness_penalty(const ActionSequence& seq, const Action& a_prev) {
  double total = 0.0;
  Action prev = a_prev;
  for (const auto& a : seq.actions) {
    total += std::abs(a.dx - prev.dx) + std::abs(a.dy - prev.dy) +
             std::abs(a.dtheta - prev.dtheta);
    prev = a;
  }
  return total;
}

double mpc_objective(const PlanModel& model, const ActionSequence& seq,
                     double gamma, const Action& a_prev) {
  const auto rewards = model.rollout_rewards(seq);
  const double rsum = std::accumulate(rewards.begin(), rewards.end(), 0.0);
  return rsum - gamma * smoothness_penalty(seq, a_prev);
}

std::pair<double, std::vector<double>> PlanModel::objective_and_grad(
    const ActionSequence& seq, double gamma, const Action& a_prev) const {
  // Central differences over the flattened actions; the step is wide enough
  // to average over the oracle's angular sampling quantization.
  const double h = 2e-2;
  std::vector<double> x = flatten(seq);
  const double j0 = mpc_objective(*this, seq, gamma, a_prev);
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double jp = mpc_objective(*this, unflatten(x), gamma, a_prev);
    x[i] = saved - h;
    const double jm = mpc_objective(*this, unflatten(x), gamma, a_prev);
    x[i] = saved;
    g[i] = (jp - jm) / (2.0 * h);
  }
  return {j0, g};
}

std::pair<std::vector<Tensor>, std::vector<double>> rollout_latent(
    const WorldModel& model, const Tensor& z0, const ActionSequence& seq,
    const LanguageEmbedding& e_g) {
  std::vector<Tensor> latents{z0};
  std::vector<double> rewards;
  Tensor z = z0;
  for (const auto& a : seq.actions) {
    z = model.predict_dynamics(z, a).first;  // mu propagation
    latents.push_back(z);
    rewards.push_back(model.predict_reward(z, e_g));
  }
  return {std::move(latents), std::move(rewards)};
}

std::vector<double> LearnedPlanModel::rollout_rewards(
    const ActionSequence& seq) const {
  return rollout_latent(model_, z0_, seq, e_).second;
}

std::pair<double, std::vector<double>> LearnedPlanModel::objective_and_grad(
    const ActionSequence& seq, double gamma, const Action& a_prev) const {
  Tape tape;
  const auto ids = model_.bind(tape, false);
  NodeId z = tape.constant(z0_);
  const NodeId e = tape.constant(e_.e);

  std::vector<NodeId> act_nodes;
  NodeId reward_sum = -1;
  for (const auto& a : seq.actions) {
    const NodeId act = tape.parameter(action_row(a));
    act_nodes.push_back(act);
    z = model_.dynamics_node(tape, ids, z, act).first;
    const NodeId r = model_.reward_node(tape, ids, z, e);
    reward_sum = act_nodes.size() == 1 ? r : tape.add(reward_sum, r);
  }

  NodeId prev = tape.constant(action_row(a_prev));
  NodeId penalty = -1;
  for (std::size_t t = 0; t < act_nodes.size(); ++t) {
    const NodeId d = tape.l1_norm(tape.sub(act_nodes[t], prev));
    penalty = t == 0 ? d : tape.add(penalty, d);
    prev = act_nodes[t];
  }

  const NodeId objective = tape.sub(reward_sum, tape.scale(penalty, gamma));
  tape.backward(objective);

  std::vector<double> g;
  g.reserve(act_nodes.size() * 3);
  for (const NodeId act : act_nodes) {
    const Tensor& gt = tape.grad(act);
    g.insert(g.end(), gt.data.begin(), gt.data.end());
  }
  return {tape.value(objective).value(), std::move(g)};
}

namespace {

// Finer angular sampling than the labeling default, so central differences see
// a smoother landscape.
double oracle_reward_at(const Scene& scene, const CameraModel& cam,
                        const Pose& p, const std::string& target_id,
                        const RewardParams& params) {
  if (!is_collision_free(scene, p)) return 0.0;
  const auto rep = visibility(scene, p, cam, target_id, 256);
  const double conf = detection_confidence(rep, params);
  const double bbox = bbox_proportion(rep, cam);
  return conf * std::min(1.0, bbox / params.b_sat);
}

}  // namespace

std::vector<double> OraclePlanModel::rollout_rewards(
    const ActionSequence& seq) const {
  std::vector<double> rewards;
  rewards.reserve(seq.actions.size());
  Pose p = start_;
  for (const auto& a : seq.actions) {
    p = compose(p, a);
    rewards.push_back(oracle_reward_at(scene_, cam_, p, target_id_, params_));
  }
  return rewards;
}

PlanResult grad_plan(const PlanModel& model, const ActionSequence& init,
                     const PlannerConfig& cfg, const Action& a_prev) {
  ActionSequence cur =
      clamp_sequence(fit_horizon(init, cfg.horizon), cfg.limits);
  ActionSequence best = cur;
  double best_j = mpc_objective(model, cur, cfg.gamma, a_prev);

  for (int step = 0; step < cfg.grad_steps; ++step) {
    const auto [j, g] = model.objective_and_grad(cur, cfg.gamma, a_prev);
    if (j > best_j) {
      best_j = j;
      best = cur;
    }
    std::vector<double> x = flatten(cur);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += cfg.grad_lr * g[i];
    cur = clamp_sequence(unflatten(x), cfg.limits);
  }
  const double j_final = mpc_objective(model, cur, cfg.gamma, a_prev);
  if (j_final > best_j) {
    best_j = j_final;
    best = cur;
  }

  PlanResult res;
  res.sequence = best;
  res.predicted_return = best_j;
  res.per_step_rewards = model.rollout_rewards(best);
  return res;
}

PlanResult cem_plan(const PlanModel& model, const PlannerConfig& cfg,
                    std::uint64_t seed, const Action& a_prev) {
  Rng rng(seed);
  const std::size_t n = static_cast<std::size_t>(cfg.horizon) * 3;
  std::vector<double> mean(n, 0.0);
  std::vector<double> sigma(n, cfg.cem.init_sigma);

  ActionSequence best;
  double best_j = -std::numeric_limits<double>::infinity();

  for (int it = 0; it < cfg.cem.iterations; ++it) {
    std::vector<std::vector<double>> samples;
    std::vector<double> scores;
    samples.reserve(static_cast<std::size_t>(cfg.cem.population));
    for (int s = 0; s < cfg.cem.population; ++s) {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = mean[i] + sigma[i] * rng.normal();
      }
      ActionSequence seq = clamp_sequence(unflatten(x), cfg.limits);
      const double j = mpc_objective(model, seq, cfg.gamma, a_prev);
      if (j > best_j) {
        best_j = j;
        best = seq;
      }
      samples.push_back(flatten(seq));
      scores.push_back(j);
    }

    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    const int n_elite =
        std::min<int>(cfg.cem.elites, static_cast<int>(order.size()));

    for (std::size_t i = 0; i < n; ++i) {
      double m = 0.0;
      for (int e = 0; e < n_elite; ++e) m += samples[order[e]][i];
      m /= static_cast<double>(n_elite);
      double var = 0.0;
      for (int e = 0; e < n_elite; ++e) {
        const double d = samples[order[e]][i] - m;
        var += d * d;
      }
      var /= static_cast<double>(n_elite);
      mean[i] = m;
      sigma[i] = std::max(std::sqrt(var), 1e-4);
    }
  }

  PlanResult res;
  res.sequence = best;
  res.predicted_return = best_j;
  res.per_step_rewards = model.rollout_rewards(best);
  return res;
}

std::vector<ActionSequence> primitive_set(double scale) {
  const double d = scale / std::sqrt(2.0);
  const double turn = kPi / 4.0;
  return {
      {{{scale, 0.0, 0.0}}},                       // A: forward
      {{{0.0, scale, 0.0}}},                       // B: strafe left
      {{{0.0, -scale, 0.0}}},                      // C: strafe right
      {{{0.0, 0.0, turn}}},                        // D: turn left
      {{{0.0, 0.0, -turn}}},                       // E: turn right
      {{{d, d, 0.0}}},                             // F: forward-left
      {{{d, -d, 0.0}}},                            // G: forward-right
      {{{d, d, 0.0}, {0.0, 0.0, -turn}}},          // H: arc left, face right
      {{{d, -d, 0.0}, {0.0, 0.0, turn}}},          // I: arc right, face left
  };
}

namespace {

PlanResult refine_candidates(const PlanModel& model,
                             const std::vector<ActionSequence>& candidates,
                             const PlannerConfig& cfg, const Action& a_prev) {
  std::vector<PlanResult> refined;
  std::vector<double> scores;
  refined.reserve(candidates.size());
  for (const auto& cand : candidates) {
    refined.push_back(grad_plan(model, cand, cfg, a_prev));
    scores.push_back(refined.back().predicted_return);
  }
  PlanResult res = refined[static_cast<std::size_t>(argmax_tie_lowest(scores))];
  res.proposal_scores = std::move(scores);
  return res;
}

}  // namespace

PlanResult heuristic_plan(const PlanModel& model, const PlannerConfig& cfg,
                          const Action& a_prev) {
  return refine_candidates(model, primitive_set(), cfg, a_prev);
}

PlanResult proposal_plan(const PlanModel& model,
                         const std::vector<ActionSequence>& proposals,
                         const PlannerConfig& cfg, const Action& a_prev) {
  if (proposals.empty()) throw NoProposals("no candidate sequences to refine");
  return refine_candidates(model, proposals, cfg, a_prev);
}

// ---- proposal sources ----

std::vector<ActionSequence> PrimitiveProposer::propose(
    const std::string& /*query*/, const Observation& obs, int k) {
  const auto prims = primitive_set(scale_);
  const int n_rays = static_cast<int>(obs.classes.size());

  double match_sum = 0.0, match_count = 0.0, depth_sum = 0.0;
  for (int i = 0; i < n_rays; ++i) {
    if (obs.classes[i] == target_class_) {
      match_sum += static_cast<double>(i);
      match_count += 1.0;
      depth_sum += obs.depths[static_cast<std::size_t>(i)];
    }
  }

  std::vector<double> scores(prims.size(), 0.0);
  if (match_count > 0.0) {
    // Bearing of the matching rays, mapped through a nominal FOV; steer the
    // motion and the heading toward it.
    const double u = n_rays > 1
                         ? match_sum / match_count / (n_rays - 1) - 0.5
                         : 0.0;
    const double phi = u * kPi / 2.0;
    // Stand-off control: approach while the target is far, hold station in
    // the comfortable viewing band, back off when so close that the target
    // overflows the field of view. Always turn to keep it centered.
    const double mean_depth = depth_sum / match_count;
    double radial = 1.0;
    if (mean_depth < 0.35) {
      radial = -1.0;
    } else if (mean_depth < 0.7) {
      radial = 0.0;
    }
    for (std::size_t j = 0; j < prims.size(); ++j) {
      double px = 0.0, py = 0.0, rot = 0.0;
      for (const auto& a : prims[j].actions) {
        px += a.dx;
        py += a.dy;
        rot += a.dtheta;
      }
      const double align =
          radial * (px * std::cos(phi) + py * std::sin(phi)) / scale_;
      const double facing =
          1.0 - std::abs(normalize_angle(rot - phi)) / kPi;
      scores[j] = align + 0.5 * facing;
      if (radial == 0.0) {
        scores[j] -= 0.5 * std::hypot(px, py) / scale_;
      }
    }
  } else {
    // Nothing matching in view: look around before moving.
    const std::vector<int> explore = {3, 4, 7, 8, 0, 5, 6, 1, 2};
    for (std::size_t r = 0; r < explore.size(); ++r) {
      scores[static_cast<std::size_t>(explore[r])] =
          static_cast<double>(explore.size() - r);
    }
  }

  std::vector<int> order(prims.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });

  std::vector<ActionSequence> out;
  for (int i = 0; i < k && i < static_cast<int>(order.size()); ++i) {
    out.push_back(prims[static_cast<std::size_t>(order[i])]);
  }
  return out;
}

FileProposer::FileProposer(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProposalFormatError("cannot open proposal file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ProposalFormatError(std::string("proposal parse error: ") +
                              e.what());
  }
  if (!j.is_array()) throw ProposalFormatError("proposal file must be a list");

  std::vector<std::pair<int, ActionSequence>> entries;
  for (const auto& item : j) {
    if (!item.contains("rank") || !item.contains("actions")) {
      throw ProposalFormatError("proposal entry needs rank and actions");
    }
    ActionSequence seq;
    for (const auto& row : item.at("actions")) {
      if (!row.is_array() || row.size() != 3) {
        throw ProposalFormatError("action must be [dx, dy, dtheta]");
      }
      seq.actions.push_back({row[0].get<double>(), row[1].get<double>(),
                             row[2].get<double>()});
    }
    entries.emplace_back(item.at("rank").get<int>(), std::move(seq));
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) {
                     return a.first < b.first;
                   });
  for (auto& [rank, seq] : entries) ranked_.push_back(std::move(seq));
}

std::vector<ActionSequence> FileProposer::propose(const std::string&,
                                                  const Observation&, int k) {
  std::vector<ActionSequence> out;
  for (int i = 0; i < k && i < static_cast<int>(ranked_.size()); ++i) {
    out.push_back(ranked_[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::vector<ActionSequence> OracleProposer::propose(const std::string&,
                                                    const Observation&,
                                                    int k) {
  const auto prims = primitive_set(scale_);
  const RewardParams params = reward_params_for(scene_, target_id_);
  std::vector<double> scores;
  scores.reserve(prims.size());
  for (const auto& seq : prims) {
    Pose p = pose_;
    for (const auto& a : seq.actions) p = compose(p, a);
    scores.push_back(oracle_reward_at(scene_, cam_, p, target_id_, params));
  }
  std::vector<int> order(prims.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<ActionSequence> out;
  for (int i = 0; i < k && i < static_cast<int>(order.size()); ++i) {
    out.push_back(prims[static_cast<std::size_t>(order[i])]);
  }
  return out;
}

// ---- episode execution ----

Action truncate_to_free(const Scene& scene, const Pose& p, const Action& a) {
  const auto scaled = [&](double lam) {
    return Action{a.dx * lam, a.dy * lam, a.dtheta * lam};
  };
  if (is_collision_free(scene, compose(p, a))) return a;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 30; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (is_collision_free(scene, compose(p, scaled(mid)))) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return scaled(lo);
}

EpisodeTrace execute_episode(const Scene& scene, const CameraModel& cam,
                             const PlannerFn& planner,
                             const std::string& target_id, const Pose& start,
                             int max_steps, const SuccessThresholds& thresholds,
                             const ActionLimits& limits) {
  const RewardParams params = reward_params_for(scene, target_id);
  EpisodeTrace trace;
  Pose p = start;
  Action a_prev{};

  for (int step = 0; step <= max_steps; ++step) {
    const auto rep = visibility(scene, p, cam, target_id);
    const double conf = detection_confidence(rep, params);
    const double bbox = bbox_proportion(rep, cam);
    const double reward = conf * std::min(1.0, bbox / params.b_sat);

    if (is_success(rep, cam, thresholds, params)) {
      trace.steps.push_back({p, Action{}, reward, 0.0});
      trace.success = true;
      break;
    }
    if (step == max_steps) {
      trace.steps.push_back({p, Action{}, reward, 0.0});
      break;
    }

    const Observation obs = render_scan(scene, p, cam);
    const PlanResult plan = planner(obs, p, a_prev, step);
    Action a = plan.sequence.actions.empty()
                   ? Action{}
                   : clamp_action(plan.sequence.actions.front(), limits);
    a = truncate_to_free(scene, p, a);

    trace.steps.push_back({p, a, reward, plan.predicted_return});
    trace.distance += std::hypot(a.dx, a.dy);
    p = compose(p, a);
    a_prev = a;
  }

  trace.final_pose = p;
  return trace;
}

}  // namespace scout
