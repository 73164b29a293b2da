#include "mrolab/environment.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace mrolab {

CioEnvironment::CioEnvironment(radio::RadioConfig radio, radio::ScenarioConfig scenario, reward::RewardConfig reward,
                               std::uint64_t stream)
    : radio_(std::move(radio)), scenario_(std::move(scenario)), reward_(std::move(reward)), stream_(stream) {
  reward_.validate();
}

HoCounters CioEnvironment::reset(int init_cio) {
  if (init_cio < mro::kCioMin || init_cio > mro::kCioMax) {
    throw std::out_of_range("initial CIO " + std::to_string(init_cio) + " outside [-8, +8]");
  }
  world_ = std::make_unique<radio::World>(radio_, scenario_, stream_);
  world_->set_cio(init_cio);
  world_->warm_up();
  cio_ = init_cio;
  return world_->run_window(cio_).counters;
}

StepResult CioEnvironment::step(int action) {
  if (!world_) throw std::logic_error("CioEnvironment: step() before reset()");
  if (action < -1 || action > 1) throw std::invalid_argument("action must be -1, 0 or +1");
  StepResult out;
  out.applied_action = mro::clip_action(cio_, action);
  cio_ += out.applied_action;
  out.next = world_->run_window(cio_).counters;
  const auto r = reward::reward(out.next, reward_);
  out.reward = r.value;
  out.empty_window = r.empty_window;
  return out;
}

std::string to_string(BehaviorKind kind) {
  switch (kind) {
    case BehaviorKind::kRnd: return "RND";
    case BehaviorKind::kUp: return "UP";
    case BehaviorKind::kDown: return "DOWN";
    case BehaviorKind::kMro: return "MRO";
  }
  return "?";
}

BehaviorKind behavior_from_string(const std::string& text) {
  for (auto k : {BehaviorKind::kRnd, BehaviorKind::kUp, BehaviorKind::kDown, BehaviorKind::kMro})
    if (to_string(k) == text) return k;
  throw std::invalid_argument("unknown behavior policy '" + text + "' (RND, UP, DOWN, MRO)");
}

namespace {

class RandomPolicy final : public Policy {
 public:
  std::string name() const override { return "RND"; }
  void begin_episode(std::uint64_t seed) override { rng_.seed(seed); }
  int act(const HoCounters&) override { return std::uniform_int_distribution<int>(-1, 1)(rng_); }

 private:
  Rng rng_;
};

class ConstantPolicy final : public Policy {
 public:
  explicit ConstantPolicy(int action) : action_(action) {}
  std::string name() const override { return action_ > 0 ? "UP" : "DOWN"; }
  int act(const HoCounters&) override { return action_; }

 private:
  int action_;
};

class MroPolicy final : public Policy {
 public:
  MroPolicy(mro::IssueWeights w, mro::MroThresholds th) : w_(w), th_(th) {}
  std::string name() const override { return "MRO"; }
  int act(const HoCounters& state) override { return mro::mro_decide(state, w_, th_); }

 private:
  mro::IssueWeights w_;
  mro::MroThresholds th_;
};

}  // namespace

std::unique_ptr<Policy> make_behavior_policy(BehaviorKind kind, mro::IssueWeights weights,
                                             mro::MroThresholds thresholds) {
  switch (kind) {
    case BehaviorKind::kRnd: return std::make_unique<RandomPolicy>();
    case BehaviorKind::kUp: return std::make_unique<ConstantPolicy>(1);
    case BehaviorKind::kDown: return std::make_unique<ConstantPolicy>(-1);
    case BehaviorKind::kMro: return std::make_unique<MroPolicy>(weights, thresholds);
  }
  throw std::invalid_argument("unknown behavior policy");
}

int Trajectory::failure_count() const {
  int n = 0;
  for (const auto& t : transitions) n += t.next_state.n_f;
  return n;
}

Trajectory run_episode(Environment& env, Policy& policy, int init_cio, int horizon, std::uint64_t policy_seed,
                       std::string scenario_id) {
  if (horizon < 1) throw std::invalid_argument("run_episode: horizon must be >= 1");
  Trajectory traj;
  traj.scenario = std::move(scenario_id);
  traj.policy = policy.name();
  traj.init_cio = init_cio;
  policy.begin_episode(policy_seed);
  HoCounters state = env.reset(init_cio);
  std::vector<double> rewards;
  for (int t = 0; t < horizon; ++t) {
    const int raw = policy.act(state);
    const StepResult r = env.step(raw);
    policy.observe(r.applied_action, r.reward, r.next);
    traj.transitions.push_back(Transition{state, r.applied_action, r.reward, r.next, r.empty_window, t + 1 == horizon});
    rewards.push_back(r.reward);
    state = r.next;
  }
  traj.rtg = reward::rtg(rewards);
  return traj;
}

std::uint64_t scenario_key(const radio::ScenarioConfig& scenario) {
  return std::stoull(fnv1a_hex(scenario.id()), nullptr, 16);
}

EpisodeSeeds episode_seeds(std::uint64_t base_seed, const radio::ScenarioConfig& scenario, int episode) {
  const std::uint64_t key = scenario_key(scenario);
  const auto e = static_cast<std::uint64_t>(episode);
  EpisodeSeeds s;
  Rng rng = make_rng(base_seed, {key, e, 0xC10ULL});
  s.init_cio = std::uniform_int_distribution<int>(mro::kCioMin, mro::kCioMax)(rng);
  s.world_stream = derive_seed(base_seed, {key, e});
  s.policy_seed = derive_seed(base_seed, {key, e, 0x9017ULL});
  return s;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mrolab
