#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mrolab/ho_events.hpp"
#include "mrolab/mro.hpp"
#include "mrolab/radio.hpp"
#include "mrolab/random.hpp"
#include "mrolab/reward.hpp"

namespace mrolab {

using events::HoCounters;

// Actions are CIO increments in {-1, 0, +1}; index form is action + 1.
inline constexpr int kActionCount = 3;
constexpr std::size_t action_index(int action) { return static_cast<std::size_t>(action + 1); }
constexpr int action_from_index(std::size_t index) { return static_cast<int>(index) - 1; }

struct StepResult {
  HoCounters next;
  int applied_action = 0;
  double reward = 0.0;
  bool empty_window = false;
};

// Episodic control problem over the tunable CIO.
class Environment {
 public:
  virtual ~Environment() = default;
  // Starts an episode at `init_cio` and returns the first observed state.
  virtual HoCounters reset(int init_cio) = 0;
  virtual StepResult step(int action) = 0;
};

// One decision window per step of a radio world. reset() warms the world up
// and runs one window at the initial CIO; every step() applies the clipped
// action and observes the next window.
class CioEnvironment final : public Environment {
 public:
  CioEnvironment(radio::RadioConfig radio, radio::ScenarioConfig scenario, reward::RewardConfig reward,
                 std::uint64_t stream);

  HoCounters reset(int init_cio) override;
  StepResult step(int action) override;

  int cio() const { return cio_; }
  const radio::World& world() const { return *world_; }

 private:
  radio::RadioConfig radio_;
  radio::ScenarioConfig scenario_;
  reward::RewardConfig reward_;
  std::uint64_t stream_;
  std::unique_ptr<radio::World> world_;
  int cio_ = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(std::uint64_t seed) { (void)seed; }
  // Raw action in {-1, 0, +1}; the caller clips it at the CIO bounds.
  virtual int act(const HoCounters& state) = 0;
  virtual void observe(int applied_action, double reward, const HoCounters& next) {
    (void)applied_action;
    (void)reward;
    (void)next;
  }
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

enum class BehaviorKind { kRnd, kUp, kDown, kMro };
std::string to_string(BehaviorKind kind);
BehaviorKind behavior_from_string(const std::string& text);

std::unique_ptr<Policy> make_behavior_policy(BehaviorKind kind, mro::IssueWeights weights = {},
                                             mro::MroThresholds thresholds = {});

struct Transition {
  HoCounters state;
  int action = 0;  // applied (already clipped)
  double reward = 0.0;
  HoCounters next_state;
  bool empty_window = false;
  bool terminal = false;
  bool operator==(const Transition&) const = default;
};

struct Trajectory {
  std::string scenario;
  std::string policy;
  int init_cio = 0;
  std::vector<Transition> transitions;
  std::vector<double> rtg;

  double total() const { return rtg.empty() ? 0.0 : rtg.front(); }
  int final_cio() const { return transitions.empty() ? init_cio : transitions.back().next_state.cio; }
  int failure_count() const;
  bool operator==(const Trajectory&) const = default;
};

Trajectory run_episode(Environment& env, Policy& policy, int init_cio, int horizon, std::uint64_t policy_seed,
                       std::string scenario_id = {});

// Stable 64-bit identifier of a scenario, used to derive its random streams.
std::uint64_t scenario_key(const radio::ScenarioConfig& scenario);

// Random inputs of one episode. They depend on (base seed, scenario,
// episode) only, so every policy run with the same base seed faces the same
// initial CIO and the same traffic.
struct EpisodeSeeds {
  int init_cio = 0;
  std::uint64_t world_stream = 0;
  std::uint64_t policy_seed = 0;
};
EpisodeSeeds episode_seeds(std::uint64_t base_seed, const radio::ScenarioConfig& scenario, int episode);

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace mrolab
