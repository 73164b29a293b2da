#include "mrolab/ho_events.hpp"

#include <stdexcept>
#include <unordered_map>

namespace mrolab {

std::string to_string(HoOutcome outcome) {
  switch (outcome) {
    case HoOutcome::kSuccess: return "success";
    case HoOutcome::kRlfBeforeCommand: return "rlf-before-command";
    case HoOutcome::kRlfDuringExecution: return "rlf-during-execution";
    case HoOutcome::kRlfInSource: return "rlf-in-source";
  }
  return "unknown";
}

HoOutcome outcome_from_string(const std::string& text) {
  for (auto o : {HoOutcome::kSuccess, HoOutcome::kRlfBeforeCommand, HoOutcome::kRlfDuringExecution,
                 HoOutcome::kRlfInSource}) {
    if (to_string(o) == text) return o;
  }
  throw std::invalid_argument("unknown handover outcome '" + text + "'");
}

}  // namespace mrolab

namespace mrolab::events {

std::string to_string(HoEventType type) {
  switch (type) {
    case HoEventType::kSuc: return "SUC";
    case HoEventType::kFte: return "FTE";
    case HoEventType::kFtl: return "FTL";
    case HoEventType::kPp: return "PP";
    case HoEventType::kSe: return "SE";
    case HoEventType::kSl: return "SL";
    case HoEventType::kStf: return "StF";
    case HoEventType::kWc: return "WC";
    case HoEventType::kRc: return "RC";
    case HoEventType::kOther: return "OTHER";
  }
  return "?";
}

bool is_failure_derived(HoEventType type) {
  return type == HoEventType::kFte || type == HoEventType::kFtl || type == HoEventType::kWc ||
         type == HoEventType::kRc;
}

bool is_success_derived(HoEventType type) {
  return type == HoEventType::kPp || type == HoEventType::kSe || type == HoEventType::kSl ||
         type == HoEventType::kStf;
}

std::array<double, 11> HoCounters::features() const {
  return {static_cast<double>(cio),   static_cast<double>(n_suc), static_cast<double>(n_fte),
          static_cast<double>(n_ftl), static_cast<double>(n_f),   static_cast<double>(n_pp),
          static_cast<double>(n_se),  static_cast<double>(n_sl),  static_cast<double>(n_stf),
          static_cast<double>(n_wc),  static_cast<double>(n_rc)};
}

HoCounters HoCounters::from_features(const std::array<double, 11>& f) {
  auto i = [&](std::size_t k) { return static_cast<int>(f[k]); };
  return HoCounters{i(0), i(1), i(2), i(3), i(4), i(5), i(6), i(7), i(8), i(9), i(10)};
}

HoCounters HoCounters::scaled(int k) const {
  return HoCounters{cio,      n_suc * k, n_fte * k, n_ftl * k, n_f * k,  n_pp * k,
                    n_se * k, n_sl * k,  n_stf * k, n_wc * k,  n_rc * k};
}

bool is_early_failure(const HoRecord& r) { return r.outcome == HoOutcome::kRlfDuringExecution; }

std::vector<LabeledRecord> classify(std::span<const HoRecord> records, CellPair pair, double short_stay_window_s) {
  if (!(short_stay_window_s > 0.0)) throw std::invalid_argument("classify: short_stay_window must be positive");
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].time_s < records[i - 1].time_s) {
      throw std::invalid_argument("classify: records are not sorted by time (index " + std::to_string(i) + ")");
    }
  }

  // next[i] = index of the same UE's following record, or npos.
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> next(records.size(), npos);
  std::unordered_map<std::uint64_t, std::size_t> later;
  for (std::size_t i = records.size(); i-- > 0;) {
    const auto it = later.find(records[i].ue);
    if (it != later.end()) next[i] = it->second;
    later[records[i].ue] = i;
  }

  const int a = pair.source, b = pair.target;
  std::vector<LabeledRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const HoRecord& r = records[i];
    HoEventType type = HoEventType::kOther;
    const HoRecord* follow = nullptr;
    if (next[i] != npos && records[next[i]].time_s - r.time_s <= short_stay_window_s) follow = &records[next[i]];

    if (r.is_failure()) {
      const int re = r.reestablish_cell.value_or(r.source);
      if (r.source == a) {
        if (r.target == b && re != a && re != b) {
          type = HoEventType::kWc;
        } else if (r.target != b && re == b) {
          type = HoEventType::kRc;
        } else if (r.target == b) {
          type = is_early_failure(r) ? HoEventType::kFte : HoEventType::kFtl;
        }
      }
    } else if (r.source == a && r.target == b) {
      type = HoEventType::kSuc;
      if (follow != nullptr && follow->source == b) {
        if (follow->is_failure()) {
          type = HoEventType::kStf;
        } else if (follow->target == a) {
          type = HoEventType::kPp;
        } else {
          type = HoEventType::kSe;
        }
      }
    } else if (r.source == a) {
      if (follow != nullptr && !follow->is_failure() && follow->source == r.target && follow->target == b) {
        type = HoEventType::kSl;
      }
    }
    out.push_back(LabeledRecord{r, type});
  }
  return out;
}

HoCounters aggregate(std::span<const LabeledRecord> labels, int cio) {
  HoCounters c;
  c.cio = cio;
  for (const auto& l : labels) {
    switch (l.type) {
      case HoEventType::kSuc: ++c.n_suc; break;
      case HoEventType::kSe:
        ++c.n_suc;
        ++c.n_se;
        break;
      case HoEventType::kPp: ++c.n_pp; break;
      case HoEventType::kStf: ++c.n_stf; break;
      case HoEventType::kSl: ++c.n_sl; break;
      case HoEventType::kFte: ++c.n_fte; break;
      case HoEventType::kFtl: ++c.n_ftl; break;
      case HoEventType::kWc: ++c.n_wc; break;
      case HoEventType::kRc: ++c.n_rc; break;
      case HoEventType::kOther: break;
    }
  }
  c.n_f = c.n_fte + c.n_ftl + c.n_wc + c.n_rc;
  return c;
}

}  // namespace mrolab::events
