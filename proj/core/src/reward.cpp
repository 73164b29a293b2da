#include "mrolab/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace mrolab::reward {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kPlain: return "plain";
    case Variant::kCioPenalty: return "cio_penalty";
    case Variant::kEventPenalty: return "event_penalty";
  }
  return "plain";
}

Variant variant_from_string(const std::string& text) {
  for (auto v : {Variant::kPlain, Variant::kCioPenalty, Variant::kEventPenalty})
    if (to_string(v) == text) return v;
  throw std::invalid_argument("unknown reward variant '" + text + "' (plain, cio_penalty, event_penalty)");
}

void RewardConfig::validate() const {
  if (w_early < 0 || w_late < 0) throw std::invalid_argument("RewardConfig: w_early and w_late must be >= 0");
  if (lambda_cio < 0 || lambda_event < 0) throw std::invalid_argument("RewardConfig: penalties must be >= 0");
  if (variant == Variant::kCioPenalty && !(cio_exponent >= 1.0)) {
    throw std::invalid_argument("RewardConfig: cio_exponent must be >= 1 for the cio_penalty variant");
  }
  if (!std::isfinite(C)) throw std::invalid_argument("RewardConfig: C must be finite");
  weights.validate();
}

RewardConfig RewardConfig::from_config(const KeyValueConfig& cfg) {
  RewardConfig r;
  r.w_early = cfg.get_double("reward.w_early", r.w_early);
  r.w_late = cfg.get_double("reward.w_late", r.w_late);
  r.C = cfg.get_double("reward.C", r.C);
  r.variant = variant_from_string(cfg.get_string("reward.variant", "plain"));
  r.lambda_cio = cfg.get_double("reward.lambda_cio", r.lambda_cio);
  r.cio_exponent = cfg.get_double("reward.cio_exponent", r.cio_exponent);
  r.lambda_event = cfg.get_double("reward.lambda_event", r.lambda_event);
  r.weights.w_f = cfg.get_double("mro.w_f", r.weights.w_f);
  r.weights.w_w = cfg.get_double("mro.w_w", r.weights.w_w);
  r.weights.w_p = cfg.get_double("mro.w_p", r.weights.w_p);
  r.weights.w_ss = cfg.get_double("mro.w_ss", r.weights.w_ss);
  r.validate();
  return r;
}

std::optional<double> cost(const HoCounters& c, const RewardConfig& cfg) {
  const int n = c.n_all();
  if (n <= 0) return std::nullopt;
  return cfg.w_early * mro::early_sum(c, cfg.weights) / n + cfg.w_late * mro::late_sum(c, cfg.weights) / n;
}

StepReward reward(const HoCounters& c, const RewardConfig& cfg) {
  const auto k = cost(c, cfg);
  StepReward out;
  out.empty_window = !k.has_value();
  out.value = std::exp(cfg.C - k.value_or(0.0));
  switch (cfg.variant) {
    case Variant::kPlain: break;
    case Variant::kCioPenalty: out.value -= cfg.lambda_cio * std::pow(std::abs(static_cast<double>(c.cio)), cfg.cio_exponent); break;
    case Variant::kEventPenalty: out.value -= cfg.lambda_event * c.n_all(); break;
  }
  return out;
}

std::vector<double> rtg(std::span<const double> rewards) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc += rewards[i];
    out[i] = acc;
  }
  return out;
}

}  // namespace mrolab::reward
