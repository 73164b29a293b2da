#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "mrolab/checkpoint.hpp"
#include "mrolab/dataset.hpp"
#include "mrolab/environment.hpp"
#include "mrolab/nn.hpp"

namespace mrolab::cql {

struct CqlConfig {
  std::size_t hidden = 64;
  double gamma = 0.99;
  double alpha = 1.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t steps = 4000;
  std::size_t target_sync = 200;
  double huber_delta = 1.0;
  double grad_clip = 10.0;
  double divergence_threshold = 1e6;
  std::size_t divergence_patience = 50;
  std::uint64_t seed = 0;

  void validate() const;
  static CqlConfig from_config(const KeyValueConfig& cfg);
};

// State-to-Q MLP: in -> hidden -> hidden -> 3, gelu activations.
struct QModel {
  nn::ParamSet online;
  nn::ParamSet target;
  std::size_t input_dim = kStateDim;
  CqlConfig config;
  Normalizer normalizer;

  static QModel create(std::size_t input_dim, const CqlConfig& config, Rng& rng);
  // [B, in] -> [B, 3]
  tensor::Tensor q_values(const tensor::Tensor& states, bool use_target = false) const;
  std::array<double, 3> q(std::span<const double> state) const;
  void sync_target() { target.copy_values_from(online); }
};

// One sample in learning form; action is an index in {0,1,2}.
struct Sample {
  std::vector<double> state;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

std::vector<Sample> samples_from_dataset(const OfflineDataset& d);

struct LossParts {
  tensor::Tensor total;
  double td = 0.0;
  double penalty = 0.0;  // mean logsumexp(Q) - Q(s, a_data)
};

// Double-DQN huber TD loss against r + gamma * Q_target(s', argmax Q_online(s'))
// (no bootstrap at terminals) plus alpha times the conservative penalty.
LossParts cql_loss(const QModel& model, std::span<const Sample> batch, double alpha);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  QModel model;
  std::vector<double> loss_curve;
  std::vector<double> penalty_curve;
};

TrainResult train_cql(std::span<const Sample> samples, std::size_t input_dim, const CqlConfig& config);
TrainResult train_cql(const OfflineDataset& d, const CqlConfig& config);

// Argmax over Q for actions (-1, 0, +1); exact ties go to 0, then to -1.
int greedy_action(const std::array<double, 3>& q);
// Greedy action for a raw counter state, clipped at the CIO bounds.
int cql_policy(const QModel& model, const HoCounters& state);

std::unique_ptr<Policy> make_cql_policy(std::shared_ptr<const QModel> model, std::string name = "CQL");

Checkpoint to_checkpoint(const QModel& model);
QModel from_checkpoint(const Checkpoint& ckpt);

}  // namespace mrolab::cql
