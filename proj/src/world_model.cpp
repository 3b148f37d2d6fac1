#include "scout/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "scout/rng.hpp"

namespace scout {

using nlohmann::json;

namespace {

Tensor gaussian_init(Rng& rng, std::size_t rows, std::size_t cols,
                     double scale) {
  Tensor t(rows, cols);
  for (double& v : t.data) v = rng.normal(0.0, scale);
  return t;
}

}  // namespace

void WorldModel::add_param(const std::string& name, Tensor t, bool trainable) {
  names_.push_back(name);
  params_.push_back(std::move(t));
  trainable_.push_back(trainable);
}

int WorldModel::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  throw CheckpointError("unknown parameter: " + name);
}

const Tensor& WorldModel::param(const std::string& name) const {
  return params_[static_cast<std::size_t>(index_of(name))];
}

WorldModel::WorldModel(FeatureConfig feat, Vocabulary vocab, HyperParams hyper,
                       std::uint64_t init_seed)
    : feat_(feat), vocab_(std::move(vocab)), hyper_(hyper) {
  Rng rng(init_seed);
  const int fd = feat_.dim();
  const int dz = hyper_.d_z;
  const int de = hyper_.d_e;
  const int dm = hyper_.d_embed;
  const int dh = hyper_.d_hidden;

  if (hyper_.trainable_encoder) {
    const int eh = hyper_.encoder_hidden;
    add_param("enc.w1", gaussian_init(rng, fd, eh, 1.0 / std::sqrt(fd)), true);
    add_param("enc.b1", Tensor::zeros(1, eh), true);
    add_param("enc.w2", gaussian_init(rng, eh, dz, 1.0 / std::sqrt(eh)), true);
    add_param("enc.b2", Tensor::zeros(1, dz), true);
  } else {
    // Frozen seeded random projection.
    add_param("enc.proj", gaussian_init(rng, fd, dz, 1.0 / std::sqrt(fd)),
              false);
  }

  add_param("dyn.az", gaussian_init(rng, dz, dm, 1.0 / std::sqrt(dz)), true);
  add_param("dyn.bz", Tensor::zeros(1, dm), true);
  add_param("dyn.aa", gaussian_init(rng, 3, dm, 1.0 / std::sqrt(3.0)), true);
  add_param("dyn.ba", Tensor::zeros(1, dm), true);
  add_param("dyn.w1", gaussian_init(rng, 2 * dm, dh, 1.0 / std::sqrt(2.0 * dm)),
            true);
  add_param("dyn.b1", Tensor::zeros(1, dh), true);
  add_param("dyn.mu_w", gaussian_init(rng, dh, dz, 1.0 / std::sqrt(dh)), true);
  add_param("dyn.mu_b", Tensor::zeros(1, dz), true);
  add_param("dyn.ls_w", gaussian_init(rng, dh, dz, 1.0 / std::sqrt(dh)), true);
  Tensor ls_b = Tensor::zeros(1, dz);
  for (double& v : ls_b.data) v = -1.0;
  add_param("dyn.ls_b", std::move(ls_b), true);

  add_param("rew.ez", gaussian_init(rng, dz, dm, 1.0 / std::sqrt(dz)), true);
  add_param("rew.bz", Tensor::zeros(1, dm), true);
  add_param("rew.ee", gaussian_init(rng, de, dm, 1.0 / std::sqrt(de)), true);
  add_param("rew.be", Tensor::zeros(1, dm), true);
  add_param("rew.w1", gaussian_init(rng, 2 * dm, dh, 1.0 / std::sqrt(2.0 * dm)),
            true);
  add_param("rew.b1", Tensor::zeros(1, dh), true);
  add_param("rew.w2", gaussian_init(rng, dh, 1, 1.0 / std::sqrt(dh)), true);
  add_param("rew.b2", Tensor::zeros(1, 1), true);
}

Tensor WorldModel::features(const Observation& obs) const {
  return features_batch({obs});
}

Tensor WorldModel::features_batch(const std::vector<Observation>& obs) const {
  const int nr = feat_.n_rays;
  const int nc = feat_.n_classes;
  Tensor out(obs.size(), static_cast<std::size_t>(feat_.dim()));
  for (std::size_t b = 0; b < obs.size(); ++b) {
    const Observation& o = obs[b];
    if (static_cast<int>(o.depths.size()) != nr ||
        static_cast<int>(o.classes.size()) != nr) {
      throw DimMismatch("observation ray count mismatch");
    }
    for (int i = 0; i < nr; ++i) {
      out.at(b, static_cast<std::size_t>(i)) =
          o.depths[static_cast<std::size_t>(i)] / feat_.max_range;
      const int cls = o.classes[static_cast<std::size_t>(i)];
      if (cls >= nc) throw DimMismatch("class id exceeds feature config");
      if (cls >= 0) {
        out.at(b, static_cast<std::size_t>(nr + i * nc + cls)) = 1.0;
      }
    }
  }
  return out;
}

std::vector<NodeId> WorldModel::bind(Tape& tape, bool as_params) const {
  std::vector<NodeId> ids;
  ids.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (as_params && trainable_[i]) {
      ids.push_back(tape.parameter(params_[i]));
    } else {
      ids.push_back(tape.constant(params_[i]));
    }
  }
  return ids;
}

NodeId WorldModel::encode_node(Tape& tape, const std::vector<NodeId>& ids,
                               NodeId features) const {
  if (hyper_.trainable_encoder) {
    const NodeId h = tape.tanh(tape.affine(features, ids[index_of("enc.w1")],
                                           ids[index_of("enc.b1")]));
    return tape.affine(h, ids[index_of("enc.w2")], ids[index_of("enc.b2")]);
  }
  return tape.matmul(features, ids[index_of("enc.proj")]);
}

std::pair<NodeId, NodeId> WorldModel::dynamics_node(
    Tape& tape, const std::vector<NodeId>& ids, NodeId z, NodeId a) const {
  const NodeId ez =
      tape.affine(z, ids[index_of("dyn.az")], ids[index_of("dyn.bz")]);
  const NodeId ea =
      tape.affine(a, ids[index_of("dyn.aa")], ids[index_of("dyn.ba")]);
  const NodeId h = tape.tanh(tape.affine(tape.concat(ez, ea),
                                         ids[index_of("dyn.w1")],
                                         ids[index_of("dyn.b1")]));
  const NodeId mu =
      tape.affine(h, ids[index_of("dyn.mu_w")], ids[index_of("dyn.mu_b")]);
  const NodeId ls =
      tape.affine(h, ids[index_of("dyn.ls_w")], ids[index_of("dyn.ls_b")]);
  return {mu, ls};
}

NodeId WorldModel::reward_node(Tape& tape, const std::vector<NodeId>& ids,
                               NodeId z, NodeId e) const {
  const NodeId hz =
      tape.affine(z, ids[index_of("rew.ez")], ids[index_of("rew.bz")]);
  const NodeId he =
      tape.affine(e, ids[index_of("rew.ee")], ids[index_of("rew.be")]);
  const NodeId h = tape.tanh(tape.affine(tape.concat(hz, he),
                                         ids[index_of("rew.w1")],
                                         ids[index_of("rew.b1")]));
  return tape.sigmoid(
      tape.affine(h, ids[index_of("rew.w2")], ids[index_of("rew.b2")]));
}

Tensor WorldModel::encode_features(const Tensor& feats) const {
  if (static_cast<int>(feats.cols) != feat_.dim()) {
    throw DimMismatch("encode: feature dimension mismatch");
  }
  Tape tape;
  const auto ids = bind(tape, false);
  return tape.value(encode_node(tape, ids, tape.constant(feats)));
}

Tensor WorldModel::encode(const Observation& obs) const {
  return encode_features(features(obs));
}

std::pair<Tensor, Tensor> WorldModel::predict_dynamics(const Tensor& z,
                                                       const Action& a) const {
  if (static_cast<int>(z.cols) != hyper_.d_z) {
    throw DimMismatch("predict_dynamics: latent dimension mismatch");
  }
  Tape tape;
  const auto ids = bind(tape, false);
  const NodeId an = tape.constant(Tensor::row({a.dx, a.dy, a.dtheta}));
  const auto [mu, ls] = dynamics_node(tape, ids, tape.constant(z), an);
  Tensor log_sigma = tape.value(ls);
  for (double& v : log_sigma.data) {
    v = std::clamp(v, kLogSigmaMin, kLogSigmaMax);
  }
  return {tape.value(mu), std::move(log_sigma)};
}

double WorldModel::predict_reward(const Tensor& z,
                                  const LanguageEmbedding& e) const {
  if (static_cast<int>(z.cols) != hyper_.d_z ||
      static_cast<int>(e.e.cols) != hyper_.d_e) {
    throw DimMismatch("predict_reward: dimension mismatch");
  }
  Tape tape;
  const auto ids = bind(tape, false);
  return tape
      .value(reward_node(tape, ids, tape.constant(z), tape.constant(e.e)))
      .value();
}

namespace {

// Stacks the H+1 observations of B sequences into per-step batches.
struct SequenceBatch {
  std::vector<Tensor> obs_feats;  // H+1 tensors of (B, feat)
  std::vector<Tensor> actions;    // H tensors of (B, 3)
};

SequenceBatch stack_sequences(const WorldModel& model,
                              const std::vector<TrainingSequence>& seqs,
                              int horizon) {
  SequenceBatch batch;
  const std::size_t B = seqs.size();
  for (int h = 0; h <= horizon; ++h) {
    std::vector<Observation> obs;
    obs.reserve(B);
    for (const auto& s : seqs) obs.push_back(s.observations[h]);
    batch.obs_feats.push_back(model.features_batch(obs));
  }
  for (int h = 0; h < horizon; ++h) {
    Tensor a(B, 3);
    for (std::size_t b = 0; b < B; ++b) {
      a.at(b, 0) = seqs[b].actions[h].dx;
      a.at(b, 1) = seqs[b].actions[h].dy;
      a.at(b, 2) = seqs[b].actions[h].dtheta;
    }
    batch.actions.push_back(std::move(a));
  }
  return batch;
}

// Recurrent H-step NLL: mu is passed forward, no teacher forcing.
NodeId sequence_nll_node(const WorldModel& model, Tape& tape,
                         const std::vector<NodeId>& ids,
                         const SequenceBatch& batch, int horizon) {
  NodeId z = model.encode_node(tape, ids, tape.constant(batch.obs_feats[0]));
  NodeId total = -1;
  for (int h = 0; h < horizon; ++h) {
    const NodeId a = tape.constant(batch.actions[h]);
    const auto [mu, ls] = model.dynamics_node(tape, ids, z, a);
    const NodeId target =
        model.encode_node(tape, ids, tape.constant(batch.obs_feats[h + 1]));
    const NodeId step = tape.gaussian_nll(target, mu, ls);
    total = (total < 0) ? step : tape.add(total, step);
    z = mu;
  }
  return tape.scale(total, 1.0 / horizon);
}

}  // namespace

double WorldModel::dynamics_loss(const TrainingSequence& seq) const {
  if (seq.actions.empty()) {
    throw InsufficientLength("dynamics_loss: empty sequence");
  }
  const int horizon = static_cast<int>(seq.actions.size());
  Tape tape;
  const auto ids = bind(tape, false);
  const SequenceBatch batch = stack_sequences(*this, {seq}, horizon);
  return tape.value(sequence_nll_node(*this, tape, ids, batch, horizon))
      .value();
}

double WorldModel::reward_loss(const std::vector<RewardSample>& batch) const {
  if (batch.empty()) throw InsufficientLength("reward_loss: empty batch");
  for (const auto& s : batch) {
    if (s.label < 0.0 || s.label > 1.0) {
      throw LabelOutOfRange("reward_loss: label outside [0, 1]");
    }
  }
  Tape tape;
  const auto ids = bind(tape, false);
  std::vector<Observation> obs;
  Tensor e(batch.size(), static_cast<std::size_t>(hyper_.d_e));
  Tensor labels(batch.size(), 1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    obs.push_back(batch[i].observation);
    const LanguageEmbedding emb = embed_target(batch[i].target_id);
    for (int j = 0; j < hyper_.d_e; ++j) {
      e.at(i, static_cast<std::size_t>(j)) = emb.e.data[j];
    }
    labels.at(i, 0) = batch[i].label;
  }
  const NodeId z =
      encode_node(tape, ids, tape.constant(features_batch(obs)));
  const NodeId pred = reward_node(tape, ids, z, tape.constant(e));
  return tape.value(tape.bce(pred, tape.constant(labels))).value();
}

std::vector<WorldModel::EpochLog> WorldModel::train(const Dataset& ds,
                                                    std::uint64_t seed) {
  if (ds.records.empty()) {
    throw InsufficientLength("train: empty dataset");
  }
  const int H = hyper_.horizon;
  const int B = hyper_.batch_size;

  // Language embeddings for every labeled target.
  std::vector<std::string> target_ids;
  for (const auto& [id, r] : ds.records.front().rewards) target_ids.push_back(id);
  std::map<std::string, LanguageEmbedding> embeds;
  for (const auto& id : target_ids) embeds[id] = embed_target(id);

  std::vector<Tensor*> train_params;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (trainable_[i]) train_params.push_back(&params_[i]);
  }
  if (!optim_ready_) {
    std::vector<Tensor> snapshot;
    for (Tensor* p : train_params) snapshot.push_back(*p);
    AdamHyper ah;
    ah.lr = hyper_.lr;
    ah.weight_decay = hyper_.weight_decay;
    optim_ = OptimState::init(snapshot, ah);
    optim_ready_ = true;
  }

  Rng rng(seed);
  const int steps_per_epoch =
      std::max(1, static_cast<int>(ds.records.size()) / std::max(1, B));
  std::vector<EpochLog> log;

  for (int epoch = 0; epoch < hyper_.epochs; ++epoch) {
    optim_.hyper.lr = epoch < hyper_.warmup_epochs ? hyper_.start_lr : hyper_.lr;
    EpochLog epoch_log;
    for (int step = 0; step < steps_per_epoch; ++step) {
      // Dynamics minibatch: B random H-step windows.
      std::vector<TrainingSequence> seqs;
      for (int b = 0; b < B; ++b) {
        seqs.push_back(sample_training_sequence(ds, H, rng.next_u64()));
      }
      const SequenceBatch batch = stack_sequences(*this, seqs, H);

      // Reward minibatch: B random records, each labeled for every target.
      std::vector<Observation> robs;
      std::vector<double> rlabels;
      std::vector<const LanguageEmbedding*> rembeds;
      for (int b = 0; b < B; ++b) {
        const DatasetRecord& rec =
            ds.records[rng.uniform_index(ds.records.size())];
        for (const auto& id : target_ids) {
          robs.push_back(rec.observation);
          rlabels.push_back(rec.rewards.at(id));
          rembeds.push_back(&embeds.at(id));
        }
      }

      Tape tape;
      const auto ids = bind(tape, true);
      const NodeId dyn = sequence_nll_node(*this, tape, ids, batch, H);

      Tensor e(robs.size(), static_cast<std::size_t>(hyper_.d_e));
      Tensor labels(robs.size(), 1);
      for (std::size_t i = 0; i < robs.size(); ++i) {
        for (int j = 0; j < hyper_.d_e; ++j) {
          e.at(i, static_cast<std::size_t>(j)) = rembeds[i]->e.data[j];
        }
        labels.at(i, 0) = rlabels[i];
      }
      const NodeId z =
          encode_node(tape, ids, tape.constant(features_batch(robs)));
      const NodeId pred = reward_node(tape, ids, z, tape.constant(e));
      const NodeId rew = tape.bce(pred, tape.constant(labels));

      const NodeId loss = tape.add(tape.scale(dyn, hyper_.w_dyn),
                                   tape.scale(rew, hyper_.w_rew));
      tape.backward(loss);

      std::vector<Tensor> grads;
      std::vector<Tensor> values;
      std::size_t k = 0;
      for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!trainable_[i]) continue;
        grads.push_back(tape.grad(ids[i]));
        values.push_back(params_[i]);
        ++k;
      }
      adam_step(values, grads, optim_);
      k = 0;
      for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!trainable_[i]) continue;
        params_[i] = std::move(values[k++]);
      }

      epoch_log.dyn += tape.value(dyn).value();
      epoch_log.rew += tape.value(rew).value();
    }
    epoch_log.dyn /= steps_per_epoch;
    epoch_log.rew /= steps_per_epoch;
    log.push_back(epoch_log);
  }
  return log;
}

double WorldModel::mean_dynamics_nll(const Dataset& ds, int horizon,
                                     std::uint64_t seed,
                                     int n_sequences) const {
  Rng rng(seed);
  double total = 0.0;
  for (int i = 0; i < n_sequences; ++i) {
    total += dynamics_loss(sample_training_sequence(ds, horizon, rng.next_u64()));
  }
  return total / n_sequences;
}

double WorldModel::identity_baseline_nll(const Dataset& ds, int horizon,
                                         std::uint64_t seed,
                                         int n_sequences) const {
  Rng rng(seed);
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  double total = 0.0;
  for (int i = 0; i < n_sequences; ++i) {
    const TrainingSequence seq =
        sample_training_sequence(ds, horizon, rng.next_u64());
    const Tensor z0 = encode(seq.observations[0]);
    double seq_nll = 0.0;
    for (int h = 0; h < horizon; ++h) {
      const Tensor zt = encode(seq.observations[static_cast<std::size_t>(h) + 1]);
      for (std::size_t d = 0; d < zt.size(); ++d) {
        const double diff = zt.data[d] - z0.data[d];
        seq_nll += kLogSigmaMin + kHalfLog2Pi +
                   diff * diff * 0.5 * std::exp(-2.0 * kLogSigmaMin);
      }
    }
    total += seq_nll / horizon;
  }
  return total / n_sequences;
}

namespace {

json hyper_to_json(const HyperParams& h) {
  return {{"lr", h.lr},
          {"start_lr", h.start_lr},
          {"warmup_epochs", h.warmup_epochs},
          {"weight_decay", h.weight_decay},
          {"batch_size", h.batch_size},
          {"epochs", h.epochs},
          {"horizon", h.horizon},
          {"d_z", h.d_z},
          {"d_e", h.d_e},
          {"w_dyn", h.w_dyn},
          {"w_rew", h.w_rew},
          {"d_embed", h.d_embed},
          {"d_hidden", h.d_hidden},
          {"trainable_encoder", h.trainable_encoder},
          {"encoder_hidden", h.encoder_hidden}};
}

HyperParams hyper_from_json(const json& j) {
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

json tensor_to_json(const Tensor& t) {
  return {{"rows", t.rows}, {"cols", t.cols}, {"data", t.data}};
}

Tensor tensor_from_json(const json& j) {
  Tensor t(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  t.data = j.at("data").get<std::vector<double>>();
  if (t.data.size() != t.rows * t.cols) {
    throw CheckpointError("tensor payload size mismatch");
  }
  return t;
}

}  // namespace

std::string WorldModel::encoder_checksum() const {
  std::string blob;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].rfind("enc.", 0) != 0) continue;
    blob += names_[i];
    const char* raw = reinterpret_cast<const char*>(params_[i].data.data());
    blob.append(raw, params_[i].data.size() * sizeof(double));
  }
  return content_digest(blob);
}

std::string WorldModel::to_json() const {
  json j;
  j["format"] = "scout-checkpoint-1";
  j["hyper"] = hyper_to_json(hyper_);
  j["feature"] = {{"n_rays", feat_.n_rays},
                  {"max_range", feat_.max_range},
                  {"n_classes", feat_.n_classes}};
  j["vocab"] = json::parse(vocab_.to_json());
  json params = json::object();
  for (std::size_t i = 0; i < names_.size(); ++i) {
    json p = tensor_to_json(params_[i]);
    p["trainable"] = static_cast<bool>(trainable_[i]);
    params[names_[i]] = p;
  }
  j["params"] = params;
  if (optim_ready_) {
    json optim;
    optim["step"] = optim_.step;
    json m = json::array(), v = json::array();
    for (const auto& t : optim_.m) m.push_back(tensor_to_json(t));
    for (const auto& t : optim_.v) v.push_back(tensor_to_json(t));
    optim["m"] = m;
    optim["v"] = v;
    j["optim"] = optim;
  }
  return j.dump();
}

WorldModel WorldModel::from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint parse error: ") + e.what());
  }
  if (j.value("format", "") != "scout-checkpoint-1") {
    throw CheckpointError("unrecognized checkpoint format");
  }
  const HyperParams hyper = hyper_from_json(j.at("hyper"));
  FeatureConfig feat;
  feat.n_rays = j.at("feature").at("n_rays").get<int>();
  feat.max_range = j.at("feature").at("max_range").get<double>();
  feat.n_classes = j.at("feature").at("n_classes").get<int>();
  Vocabulary vocab = Vocabulary::parse_json(j.at("vocab").dump());
  WorldModel model(feat, std::move(vocab), hyper, 0);
  for (std::size_t i = 0; i < model.names_.size(); ++i) {
    model.params_[i] = tensor_from_json(j.at("params").at(model.names_[i]));
  }
  if (j.contains("optim")) {
    std::vector<Tensor> snapshot;
    for (std::size_t i = 0; i < model.params_.size(); ++i) {
      if (model.trainable_[i]) snapshot.push_back(model.params_[i]);
    }
    AdamHyper ah;
    ah.lr = hyper.lr;
    ah.weight_decay = hyper.weight_decay;
    model.optim_ = OptimState::init(snapshot, ah);
    model.optim_.step = j.at("optim").at("step").get<long>();
    const auto& jm = j.at("optim").at("m");
    const auto& jv = j.at("optim").at("v");
    for (std::size_t i = 0; i < model.optim_.m.size(); ++i) {
      model.optim_.m[i] = tensor_from_json(jm.at(i));
      model.optim_.v[i] = tensor_from_json(jv.at(i));
    }
    model.optim_ready_ = true;
  }
  return model;
}

void WorldModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out << to_json() << "\n";
}

WorldModel WorldModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace scout
