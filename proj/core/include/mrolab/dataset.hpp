#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mrolab/environment.hpp"
#include "mrolab/radio.hpp"
#include "mrolab/reward.hpp"

namespace mrolab {

inline constexpr std::size_t kStateDim = 12;
using StateVector = std::array<double, kStateDim>;

// Learning features of a counter state: CIO scaled to [-1, 1], the ten
// counts as rates over N_ALL (zero when N_ALL = 0) and N_ALL divided by a
// dataset constant; then standardized per feature.
struct Normalizer {
  double n_all_scale = 1.0;
  StateVector mean{};
  StateVector scale = filled(1.0);

  StateVector features(const HoCounters& c) const;
  StateVector apply(const HoCounters& c) const;
  bool operator==(const Normalizer&) const = default;

  static Normalizer fit(std::span<const Trajectory> trajectories);

 private:
  static StateVector filled(double v) {
    StateVector a;
    a.fill(v);
    return a;
  }
};

struct DatasetMeta {
  int version = 1;
  std::string config_hash;
  int horizon = 17;
  std::uint64_t base_seed = 0;
  std::string reward_variant = "plain";
  bool operator==(const DatasetMeta&) const = default;
};

// Immutable collection of equal-length trajectories.
class OfflineDataset {
 public:
  OfflineDataset() = default;
  OfflineDataset(std::vector<Trajectory> trajectories, DatasetMeta meta);

  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const DatasetMeta& meta() const { return meta_; }
  const Normalizer& normalizer() const { return normalizer_; }
  std::size_t size() const { return trajectories_.size(); }
  bool empty() const { return trajectories_.empty(); }
  double max_rtg() const;

  bool operator==(const OfflineDataset&) const = default;

 private:
  std::vector<Trajectory> trajectories_;
  DatasetMeta meta_;
  Normalizer normalizer_;
};

struct GenerationConfig {
  radio::RadioConfig radio;
  reward::RewardConfig reward;
  mro::MroThresholds thresholds;
  std::vector<radio::ScenarioConfig> scenarios;
  std::vector<BehaviorKind> policies{BehaviorKind::kRnd, BehaviorKind::kUp, BehaviorKind::kDown, BehaviorKind::kMro};
  int episodes_per_cell = 4;
  int horizon = 17;
  std::uint64_t base_seed = 0;
  unsigned threads = 0;
  std::string config_hash;
};

// One trajectory per (scenario, policy, episode), stored in that order.
OfflineDataset generate_dataset(const GenerationConfig& cfg);

class OverFilterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Drops trajectories with rtg[0] >= threshold; with require_zero_failures
// only those among them that saw no failure. Throws OverFilterError when
// nothing is left.
OfflineDataset filter_dataset(const OfflineDataset& d, double rtg_threshold, bool require_zero_failures);

// Recomputes every reward (and RtG) from the stored next states.
OfflineDataset relabel_rewards(const OfflineDataset& d, const reward::RewardConfig& cfg);

// JSON lines: one metadata record, then one record per trajectory.
std::string dataset_to_jsonl(const OfflineDataset& d);
OfflineDataset dataset_from_jsonl(const std::string& text);
void save_dataset(const std::filesystem::path& path, const OfflineDataset& d);
OfflineDataset load_dataset(const std::filesystem::path& path);

}  // namespace mrolab
