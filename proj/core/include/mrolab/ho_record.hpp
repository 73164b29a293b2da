#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace mrolab {

enum class HoOutcome {
  kSuccess,
  kRlfBeforeCommand,    // serving link lost while the A3/handover preparation was pending
  kRlfDuringExecution,  // random access at the target failed
  kRlfInSource,         // serving link lost with no handover in progress
};

std::string to_string(HoOutcome outcome);
HoOutcome outcome_from_string(const std::string& text);

// One completed handover attempt (or radio link failure) of one UE.
// For failures, `target` is the cell the UE was heading to; for an
// rlf-in-source it is the cell the UE re-established on.
struct HoRecord {
  std::uint64_t ue = 0;
  double time_s = 0.0;
  int source = 0;
  int target = 0;
  HoOutcome outcome = HoOutcome::kSuccess;
  std::optional<int> reestablish_cell;  // present iff outcome is a failure
  std::optional<double> prev_success_time_s;
  std::optional<int> prev_success_cell;

  bool is_failure() const { return outcome != HoOutcome::kSuccess; }
  bool operator==(const HoRecord&) const = default;
};

}  // namespace mrolab
