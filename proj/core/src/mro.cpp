#include "mrolab/mro.hpp"

#include <stdexcept>

namespace mrolab::mro {

void IssueWeights::validate() const {
  if (w_f < 0 || w_w < 0 || w_p < 0 || w_ss < 0) throw std::invalid_argument("IssueWeights: weights must be >= 0");
}

std::optional<std::string> IssueWeights::ordering_warning() const {
  if (w_f > w_w && w_w > w_p && w_p >= w_ss) return std::nullopt;
  return "issue weights do not follow w_f > w_w > w_p >= w_ss";
}

void MroThresholds::validate() const {
  if (tau_events < 1) throw std::invalid_argument("MroThresholds: tau_events must be >= 1");
  if (!(tau_early > 0) || !(tau_late > 0)) throw std::invalid_argument("MroThresholds: margins must be positive");
}

double early_sum(const HoCounters& c, const IssueWeights& w) {
  return w.w_f * c.n_fte + w.w_p * c.n_pp + w.w_w * c.n_wc + w.w_ss * c.n_stf + w.w_ss * c.n_se;
}

double late_sum(const HoCounters& c, const IssueWeights& w) { return w.w_f * c.n_ftl + w.w_w * c.n_rc + w.w_ss * c.n_sl; }

std::optional<double> mro_ratio(const HoCounters& c, const IssueWeights& w) {
  const int n = c.n_all();
  if (n <= 0) return std::nullopt;
  return (early_sum(c, w) - late_sum(c, w)) / n;
}

int mro_decide_from_sums(double e_sum, double l_sum, int n_all, int cio, const MroThresholds& th) {
  if (n_all < th.tau_events || n_all <= 0) return 0;
  const double rho = (e_sum - l_sum) / n_all;
  int action = 0;
  if (rho > th.tau_early) {
    action = 1;
  } else if (rho < -th.tau_late) {
    action = -1;
  }
  return clip_action(cio, action);
}

int mro_decide(const HoCounters& c, const IssueWeights& w, const MroThresholds& th) {
  return mro_decide_from_sums(early_sum(c, w), late_sum(c, w), c.n_all(), c.cio, th);
}

}  // namespace mrolab::mro
