#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrolab/config.hpp"
#include "mrolab/ho_events.hpp"
#include "mrolab/mro.hpp"

namespace mrolab::reward {

using events::HoCounters;

enum class Variant { kPlain, kCioPenalty, kEventPenalty };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& text);

struct RewardConfig {
  double w_early = 1.0;
  double w_late = 1.0;
  double C = 1.0;
  Variant variant = Variant::kPlain;
  double lambda_cio = 0.0;
  double cio_exponent = 1.0;
  double lambda_event = 0.0;
  mro::IssueWeights weights;

  void validate() const;
  static RewardConfig from_config(const KeyValueConfig& cfg);
};

// w_early * E_sum / N_ALL + w_late * L_sum / N_ALL; empty when N_ALL == 0.
std::optional<double> cost(const HoCounters& c, const RewardConfig& cfg);

struct StepReward {
  double value = 0.0;
  bool empty_window = false;  // N_ALL == 0, scored as zero cost
};

// exp(C - cost) minus the variant penalty.
StepReward reward(const HoCounters& c, const RewardConfig& cfg);
inline double reward_value(const HoCounters& c, const RewardConfig& cfg) { return reward(c, cfg).value; }

// Undiscounted suffix sums.
std::vector<double> rtg(std::span<const double> rewards);

}  // namespace mrolab::reward
