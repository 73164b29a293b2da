#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrolab/ho_record.hpp"

namespace mrolab::events {

// Handover issue taxonomy for one directed cell pair (A,B). kOther marks
// records that carry no information about the pair (e.g. B->A successes
// that are not part of a ping-pong).
enum class HoEventType { kSuc, kFte, kFtl, kPp, kSe, kSl, kStf, kWc, kRc, kOther };

std::string to_string(HoEventType type);
bool is_failure_derived(HoEventType type);
bool is_success_derived(HoEventType type);

struct CellPair {
  int source = 0;  // A
  int target = 0;  // B
};

// The eleven state features for one decision window.
struct HoCounters {
  int cio = 0;
  int n_suc = 0;
  int n_fte = 0;
  int n_ftl = 0;
  int n_f = 0;
  int n_pp = 0;
  int n_se = 0;
  int n_sl = 0;
  int n_stf = 0;
  int n_wc = 0;
  int n_rc = 0;

  int n_all() const { return n_suc + n_fte + n_ftl; }
  // Feature order: cio, suc, fte, ftl, f, pp, se, sl, stf, wc, rc.
  std::array<double, 11> features() const;
  static HoCounters from_features(const std::array<double, 11>& f);
  HoCounters scaled(int k) const;
  bool operator==(const HoCounters&) const = default;
};

inline constexpr std::size_t kFeatureCount = 11;

struct LabeledRecord {
  HoRecord record;
  HoEventType type;
};

// True for failures the network attributes to a handover that fired too
// early (random access failure at the target); false for late-side ones.
bool is_early_failure(const HoRecord& r);

// Labels every record. `records` must be sorted by time (ties allowed).
// Success A->B is annotated by the same UE's next record within
// `short_stay_window_s`: B->A success => PP, B->C success => SE, any failure
// => StF. Success A->C followed by C->B success => SL on the A->C record.
std::vector<LabeledRecord> classify(std::span<const HoRecord> records, CellPair pair, double short_stay_window_s);

// n_suc counts plain SUC and SE successes; PP and StF successes did not lead
// to stable service on B and are counted only in their own counters.
HoCounters aggregate(std::span<const LabeledRecord> labels, int cio = 0);

}  // namespace mrolab::events
