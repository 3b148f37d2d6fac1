#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "scout/geometry.hpp"
#include "scout/reward_oracle.hpp"
#include "scout/rng.hpp"
#include "scout/scene.hpp"
#include "scout/world_model.hpp"

namespace scout {

struct NoProposals : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProposalFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ActionSequence {
  std::vector<Action> actions;

  std::size_t horizon() const { return actions.size(); }
  static ActionSequence zeros(int horizon) {
    return {std::vector<Action>(static_cast<std::size_t>(horizon))};
  }
};

struct PlanResult {
  ActionSequence sequence;
  double predicted_return = 0.0;
  std::vector<double> per_step_rewards;
  std::vector<double> proposal_scores;  // per-candidate, when applicable
};

struct CemConfig {
  int population = 36;
  int elites = 6;
  int iterations = 8;
  double init_sigma = 0.12;
};

struct PlannerConfig {
  int horizon = 4;
  double gamma = 0.05;     // smoothness penalty weight
  int grad_steps = 25;
  double grad_lr = 0.05;
  CemConfig cem;
  int proposals_kept = 3;  // K
  ActionLimits limits;
};

// Planning-time view of the process: rolls an action sequence out from the
// episode's current state and scores it. The learned adapter differentiates
// through the tape; the oracle adapter falls back to central differences.
class PlanModel {
 public:
  virtual ~PlanModel() = default;
  virtual std::vector<double> rollout_rewards(
      const ActionSequence& seq) const = 0;
  // Objective value and its gradient w.r.t. the flattened actions (3T).
  virtual std::pair<double, std::vector<double>> objective_and_grad(
      const ActionSequence& seq, double gamma, const Action& a_prev) const;
};

double mpc_objective(const PlanModel& model, const ActionSequence& seq,
                     double gamma, const Action& a_prev);
double smoothness_penalty(const ActionSequence& seq, const Action& a_prev);

// Latent-space adapter over a trained model: mu-propagated rollout with the
// reward head as the per-step score.
class LearnedPlanModel : public PlanModel {
 public:
  LearnedPlanModel(const WorldModel& model, Tensor z0, LanguageEmbedding e_g)
      : model_(model), z0_(std::move(z0)), e_(std::move(e_g)) {}

  std::vector<double> rollout_rewards(const ActionSequence& seq) const override;
  std::pair<double, std::vector<double>> objective_and_grad(
      const ActionSequence& seq, double gamma,
      const Action& a_prev) const override;

 private:
  const WorldModel& model_;
  Tensor z0_;
  LanguageEmbedding e_;
};

// Ground-truth adapter: simulates poses through the scene geometry and scores
// with the oracle reward (used by planner sanity checks and the oracle
// proposer).
class OraclePlanModel : public PlanModel {
 public:
  OraclePlanModel(const Scene& scene, const CameraModel& cam, Pose start,
                  std::string target_id)
      : scene_(scene),
        cam_(cam),
        start_(start),
        target_id_(std::move(target_id)),
        params_(reward_params_for(scene, target_id_)) {}

  std::vector<double> rollout_rewards(const ActionSequence& seq) const override;

 private:
  const Scene& scene_;
  CameraModel cam_;
  Pose start_;
  std::string target_id_;
  RewardParams params_;
};

// Deterministic mu-mode rollout through the learned model.
std::pair<std::vector<Tensor>, std::vector<double>> rollout_latent(
    const WorldModel& model, const Tensor& z0, const ActionSequence& seq,
    const LanguageEmbedding& e_g);

PlanResult grad_plan(const PlanModel& model, const ActionSequence& init,
                     const PlannerConfig& cfg, const Action& a_prev = {});

PlanResult cem_plan(const PlanModel& model, const PlannerConfig& cfg,
                    std::uint64_t seed, const Action& a_prev = {});

// The nine scripted primitives (options A-I), at the given stride in meters.
std::vector<ActionSequence> primitive_set(double scale = 0.15);

PlanResult heuristic_plan(const PlanModel& model, const PlannerConfig& cfg,
                          const Action& a_prev = {});

PlanResult proposal_plan(const PlanModel& model,
                         const std::vector<ActionSequence>& proposals,
                         const PlannerConfig& cfg, const Action& a_prev = {});

// ---- proposal sources ----

class ProposalSource {
 public:
  virtual ~ProposalSource() = default;
  virtual std::vector<ActionSequence> propose(const std::string& query,
                                              const Observation& obs,
                                              int k) = 0;
};

// Ranks the scripted primitives from the scan alone: steer toward rays whose
// class matches the queried target, explore by turning when none match.
class PrimitiveProposer : public ProposalSource {
 public:
  PrimitiveProposer(int target_class_id, double scale = 0.15)
      : target_class_(target_class_id), scale_(scale) {}
  std::vector<ActionSequence> propose(const std::string& query,
                                      const Observation& obs, int k) override;

 private:
  int target_class_;
  double scale_;
};

// Ranked proposals from a JSON file, the out-of-band hook for an external
// proposal generator.
class FileProposer : public ProposalSource {
 public:
  explicit FileProposer(const std::string& path);
  std::vector<ActionSequence> propose(const std::string& query,
                                      const Observation& obs, int k) override;

 private:
  std::vector<ActionSequence> ranked_;
};

// Test-only: peeks at the scene geometry and ranks primitives by the oracle
// reward at their endpoint.
class OracleProposer : public ProposalSource {
 public:
  OracleProposer(const Scene& scene, const CameraModel& cam,
                 std::string target_id, double scale = 0.15)
      : scene_(scene), cam_(cam), target_id_(std::move(target_id)),
        scale_(scale) {}
  void set_pose(const Pose& p) { pose_ = p; }
  std::vector<ActionSequence> propose(const std::string& query,
                                      const Observation& obs, int k) override;

 private:
  const Scene& scene_;
  CameraModel cam_;
  std::string target_id_;
  double scale_;
  Pose pose_;
};

// ---- episode execution ----

struct EpisodeStep {
  Pose pose;
  Action action;            // executed (possibly truncated) action
  double oracle_reward = 0.0;
  double predicted_return = 0.0;
};

struct EpisodeTrace {
  std::vector<EpisodeStep> steps;
  bool success = false;
  double distance = 0.0;  // total translation [m]
  Pose final_pose;
};

// Planner callback: current observation, pose, previous executed action,
// step index.
using PlannerFn = std::function<PlanResult(
    const Observation& obs, const Pose& pose, const Action& a_prev, int step)>;

EpisodeTrace execute_episode(const Scene& scene, const CameraModel& cam,
                             const PlannerFn& planner,
                             const std::string& target_id, const Pose& start,
                             int max_steps, const SuccessThresholds& thresholds,
                             const ActionLimits& limits);

// Largest prefix scale of `a` that keeps the pose collision-free.
Action truncate_to_free(const Scene& scene, const Pose& p, const Action& a);

}  // namespace scout
