#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scout/autodiff.hpp"
#include "scout/data_gen.hpp"
#include "scout/scene.hpp"
#include "scout/vocab.hpp"

namespace scout {

struct DimMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LabelOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HyperParams {
  double lr = 5e-4;
  double start_lr = 1e-3;
  int warmup_epochs = 2;
  double weight_decay = 4e-2;
  int batch_size = 25;
  int epochs = 100;
  int horizon = 4;  // recurrent rollout length H
  int d_z = 64;
  int d_e = 32;
  double w_dyn = 1.0;
  double w_rew = 1.0;
  int d_embed = 64;    // affine conditioning width
  int d_hidden = 128;  // perceptron hidden width
  bool trainable_encoder = false;  // frozen random projection by default
  int encoder_hidden = 128;
};

// Scan-to-feature layout the encoder consumes: per ray a normalized depth
// channel plus a one-hot class channel block.
struct FeatureConfig {
  int n_rays = 64;
  double max_range = 5.0;
  int n_classes = 8;

  int dim() const { return n_rays * (1 + n_classes); }
};

// Encoder + Gaussian dynamics + language-conditioned reward head over latent
// scan embeddings.
class WorldModel {
 public:
  WorldModel(FeatureConfig feat, Vocabulary vocab, HyperParams hyper,
             std::uint64_t init_seed);

  // ---- plain inference (fresh tape per call) ----
  Tensor features(const Observation& obs) const;  // (1, feat_dim)
  Tensor features_batch(const std::vector<Observation>& obs) const;
  Tensor encode(const Observation& obs) const;  // latent (1, d_z)
  Tensor encode_features(const Tensor& feats) const;
  // (mu, log_sigma), log_sigma clamped to the tape's range.
  std::pair<Tensor, Tensor> predict_dynamics(const Tensor& z,
                                             const Action& a) const;
  double predict_reward(const Tensor& z, const LanguageEmbedding& e) const;

  // ---- graph building for training and gradient planning ----
  // One node per parameter tensor; trainable tensors become tape parameters
  // when as_params is set, everything else binds as constants.
  std::vector<NodeId> bind(Tape& tape, bool as_params) const;
  NodeId encode_node(Tape& tape, const std::vector<NodeId>& ids,
                     NodeId features) const;
  std::pair<NodeId, NodeId> dynamics_node(Tape& tape,
                                          const std::vector<NodeId>& ids,
                                          NodeId z, NodeId a) const;
  NodeId reward_node(Tape& tape, const std::vector<NodeId>& ids, NodeId z,
                     NodeId e) const;

  // ---- losses (values on a fresh tape) ----
  double dynamics_loss(const TrainingSequence& seq) const;
  struct RewardSample {
    Observation observation;
    std::string target_id;
    double label = 0.0;
  };
  double reward_loss(const std::vector<RewardSample>& batch) const;

  struct EpochLog {
    double dyn = 0.0;
    double rew = 0.0;
  };
  std::vector<EpochLog> train(const Dataset& ds, std::uint64_t seed);

  // Mean H-step NLL of the identity predictor (mu = z_t, log_sigma at the
  // clamp floor), the reference the trained dynamics must beat.
  double identity_baseline_nll(const Dataset& ds, int horizon,
                               std::uint64_t seed, int n_sequences) const;
  double mean_dynamics_nll(const Dataset& ds, int horizon, std::uint64_t seed,
                           int n_sequences) const;

  LanguageEmbedding embed_target(const std::string& target_id) const {
    return embed_language(target_id, vocab_);
  }

  const Vocabulary& vocab() const { return vocab_; }
  const HyperParams& hyper() const { return hyper_; }
  const FeatureConfig& feature_config() const { return feat_; }
  int latent_dim() const { return hyper_.d_z; }

  const std::vector<std::string>& param_names() const { return names_; }
  const Tensor& param(const std::string& name) const;
  std::string encoder_checksum() const;

  std::string to_json() const;
  static WorldModel from_json(const std::string& json_text);
  void save(const std::string& path) const;
  static WorldModel load(const std::string& path);

 private:
  int index_of(const std::string& name) const;
  void add_param(const std::string& name, Tensor t, bool trainable);

  FeatureConfig feat_;
  Vocabulary vocab_;
  HyperParams hyper_;
  std::vector<std::string> names_;
  std::vector<Tensor> params_;
  std::vector<bool> trainable_;
  OptimState optim_;
  bool optim_ready_ = false;
};

}  // namespace scout
