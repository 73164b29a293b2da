#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mrolab/checkpoint.hpp"
#include "mrolab/dataset.hpp"
#include "mrolab/environment.hpp"
#include "mrolab/nn.hpp"

namespace mrolab::dt {

struct DtConfig {
  std::size_t d_model = 64;
  std::size_t blocks = 2;
  std::size_t heads = 1;
  std::size_t context_k = 5;
  std::size_t max_timestep = 17;
  double learning_rate = 5e-4;
  std::size_t batch_size = 32;
  std::size_t steps = 3000;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  static DtConfig from_config(const KeyValueConfig& cfg);
};

// One timestep of a context. `action` is empty for the step being decided.
struct DtStep {
  double rtg = 0.0;  // raw (unnormalized) reward-to-go
  std::vector<double> state;
  std::optional<std::size_t> action;
  std::size_t timestep = 0;
};
using DtContext = std::vector<DtStep>;

struct DtModel {
  nn::ParamSet params;
  DtConfig config;
  std::size_t state_dim = kStateDim;
  double rtg_scale = 1.0;  // RtG inputs are divided by this
  Normalizer normalizer;

  static DtModel create(std::size_t state_dim, double rtg_scale, const DtConfig& config, Rng& rng);
};

// Logits [B*L, 3] for B contexts of equal length L <= K. Tokens are ordered
// (rtg, state, action) per step under a causal mask; the logits of step l
// are read from its state token, so they only see steps <= l and not the
// action of step l.
tensor::Tensor dt_forward(const DtModel& model, std::span<const DtContext> batch);

struct TrainResult {
  DtModel model;
  std::vector<double> loss_curve;
};

struct Episode {
  std::vector<std::vector<double>> states;
  std::vector<std::size_t> actions;
  std::vector<double> rtg;
};

std::vector<Episode> episodes_from_dataset(const OfflineDataset& d);

// Cross-entropy on every action of uniformly sampled length-K windows.
TrainResult train_dt(std::span<const Episode> episodes, std::size_t state_dim, double rtg_scale,
                     const DtConfig& config);
TrainResult train_dt(const OfflineDataset& d, const DtConfig& config);

// Return-conditioned controller: the RtG slot starts at target_rtg and is
// decreased by every observed reward.
class DtPolicy final : public Policy {
 public:
  DtPolicy(std::shared_ptr<const DtModel> model, double target_rtg, std::string name = "DT");
  std::string name() const override { return name_; }
  void begin_episode(std::uint64_t seed) override;
  int act(const HoCounters& state) override;
  void observe(int applied_action, double reward, const HoCounters& next) override;

  // RtG values fed at each decided step so far.
  const std::vector<double>& rtg_inputs() const { return rtg_inputs_; }

 private:
  std::shared_ptr<const DtModel> model_;
  double target_;
  std::string name_;
  double current_ = 0.0;
  std::size_t t_ = 0;
  std::vector<DtStep> history_;
  std::vector<double> rtg_inputs_;
};

Trajectory dt_rollout(std::shared_ptr<const DtModel> model, Environment& env, double target_rtg, int init_cio,
                      int horizon, const std::string& scenario_id = {});

Checkpoint to_checkpoint(const DtModel& model);
DtModel from_checkpoint(const Checkpoint& ckpt);

}  // namespace mrolab::dt
