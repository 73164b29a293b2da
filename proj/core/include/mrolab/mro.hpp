#pragma once

#include <optional>
#include <string>

#include "mrolab/ho_events.hpp"

namespace mrolab::mro {

using events::HoCounters;

inline constexpr int kCioMin = -8;
inline constexpr int kCioMax = 8;

constexpr int clip_cio(int cio) { return cio < kCioMin ? kCioMin : (cio > kCioMax ? kCioMax : cio); }
// Action actually applied from `cio` after clipping to the allowed range.
constexpr int clip_action(int cio, int action) { return clip_cio(cio + action) - cio; }

struct IssueWeights {
  double w_f = 1.0;   // failures
  double w_w = 0.5;   // wrong cell
  double w_p = 0.1;   // ping-pong
  double w_ss = 0.1;  // short stay

  void validate() const;
  // Empty when the usual ordering w_f > w_w > w_p >= w_ss holds.
  std::optional<std::string> ordering_warning() const;
};

struct MroThresholds {
  int tau_events = 10;
  double tau_early = 0.01;
  double tau_late = 0.01;

  void validate() const;
};

double early_sum(const HoCounters& c, const IssueWeights& w);
double late_sum(const HoCounters& c, const IssueWeights& w);

// (E_sum - L_sum) / N_ALL; empty when N_ALL == 0 (insufficient data).
std::optional<double> mro_ratio(const HoCounters& c, const IssueWeights& w);

// Three-threshold rule; returns the clipped action in {-1, 0, +1}.
int mro_decide(const HoCounters& c, const IssueWeights& w, const MroThresholds& th);

// Same rule expressed over the sufficient statistics.
int mro_decide_from_sums(double e_sum, double l_sum, int n_all, int cio, const MroThresholds& th);

}  // namespace mrolab::mro
