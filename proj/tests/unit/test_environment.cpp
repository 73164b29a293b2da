#include <atomic>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "mrolab/environment.hpp"

using namespace mrolab;

namespace {

// Deterministic stand-in: counters depend only on the CIO.
class LineEnvironment final : public Environment {
 public:
  HoCounters reset(int init_cio) override {
    cio_ = init_cio;
    return observe();
  }
  StepResult step(int action) override {
    StepResult s;
    s.applied_action = mro::clip_action(cio_, action);
    cio_ += s.applied_action;
    s.next = observe();
    s.reward = reward::reward_value(s.next, reward::RewardConfig{});
    return s;
  }

 private:
  HoCounters observe() const {
    HoCounters c;
    c.cio = cio_;
    c.n_suc = 100;
    c.n_fte = std::max(0, -cio_);
    c.n_ftl = std::max(0, cio_);
    c.n_f = c.n_fte + c.n_ftl;
    return c;
  }
  int cio_ = 0;
};

HoCounters balanced() {
  HoCounters c;
  c.n_suc = 50;
  c.n_fte = 1;
  c.n_ftl = 1;
  c.n_f = 2;
  return c;
}

}  // namespace

TEST_SUITE("environment") {

TEST_CASE("action index mapping") {
  for (int a : {-1, 0, 1}) CHECK(action_from_index(action_index(a)) == a);
  CHECK(action_index(-1) == 0);
}

TEST_CASE("fixed behavior policies") {
  auto up = make_behavior_policy(BehaviorKind::kUp);
  auto down = make_behavior_policy(BehaviorKind::kDown);
  auto mro = make_behavior_policy(BehaviorKind::kMro);
  CHECK(up->act(balanced()) == 1);
  CHECK(down->act(balanced()) == -1);
  CHECK(mro->act(balanced()) == 0);
  CHECK(up->name() == "UP");
  CHECK(behavior_from_string("MRO") == BehaviorKind::kMro);
  CHECK_THROWS(behavior_from_string("SIDEWAYS"));

  LineEnvironment env;
  auto at8 = run_episode(env, *up, 8, 3, 0);
  for (const auto& t : at8.transitions) CHECK(t.action == 0);
  CHECK(at8.final_cio() == 8);
}

TEST_CASE("RND draws are uniform") {
  auto rnd = make_behavior_policy(BehaviorKind::kRnd);
  rnd->begin_episode(42);
  const int n = 10000;
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < n; ++i) ++counts[action_index(rnd->act(balanced()))];
  const double sigma = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
  for (int k : counts) CHECK(std::abs(k - n / 3.0) < 3 * sigma);
}

TEST_CASE("episodes have fixed length, clipped actions and consistent RtG") {
  LineEnvironment env;
  auto down = make_behavior_policy(BehaviorKind::kDown);
  const auto tr = run_episode(env, *down, -5, 17, 0, "line");
  REQUIRE(tr.transitions.size() == 17);
  CHECK(tr.rtg.size() == 17);
  CHECK(tr.scenario == "line");
  CHECK(tr.policy == "DOWN");
  CHECK(tr.final_cio() == -8);
  for (std::size_t t = 0; t < 17; ++t) {
    const auto& x = tr.transitions[t];
    CHECK(x.next_state.cio == mro::clip_cio(x.state.cio + x.action));
    if (t + 1 < 17) {
      CHECK(x.next_state == tr.transitions[t + 1].state);
      CHECK(tr.rtg[t] - tr.rtg[t + 1] == doctest::Approx(x.reward));
    }
    CHECK(x.terminal == (t == 16));
  }
  CHECK(tr.failure_count() == 6 + 7 + 8 * 15);
}

TEST_CASE("MRO converges on a monotone response") {
  LineEnvironment env;
  auto mro = make_behavior_policy(BehaviorKind::kMro);
  for (int init : {-8, -3, 4, 8}) CHECK(std::abs(run_episode(env, *mro, init, 17, 0).final_cio()) <= 1);
}

TEST_CASE("episode seeds are reproducible and policy independent") {
  radio::ScenarioConfig a, b;
  b.load = 0.9;
  const auto s1 = episode_seeds(7, a, 3);
  const auto s2 = episode_seeds(7, a, 3);
  CHECK(s1.init_cio == s2.init_cio);
  CHECK(s1.world_stream == s2.world_stream);
  CHECK(s1.policy_seed == s2.policy_seed);
  CHECK(episode_seeds(7, a, 4).world_stream != s1.world_stream);
  CHECK(episode_seeds(7, b, 3).world_stream != s1.world_stream);
  CHECK(scenario_key(a) != scenario_key(b));
  int lo = 0, hi = 0;
  for (int e = 0; e < 400; ++e) {
    const int c = episode_seeds(1, a, e).init_cio;
    CHECK(c >= -8);
    CHECK(c <= 8);
    lo += c == -8;
    hi += c == 8;
  }
  CHECK(lo > 0);
  CHECK(hi > 0);
}

TEST_CASE("real environment steps respect the clip invariant") {
  radio::ScenarioConfig sc;
  sc.window_seconds = 5;
  radio::RadioConfig rc;
  rc.warmup_s = 10;
  CioEnvironment env(rc, sc, reward::RewardConfig{}, 3);
  auto up = make_behavior_policy(BehaviorKind::kUp);
  const auto tr = run_episode(env, *up, 6, 4, 0);
  REQUIRE(tr.transitions.size() == 4);
  CHECK(tr.transitions[0].state.cio == 6);
  CHECK(tr.final_cio() == 8);
  CHECK(env.cio() == 8);
  for (const auto& t : tr.transitions) CHECK(t.next_state.cio == mro::clip_cio(t.state.cio + t.action));
}

TEST_CASE("parallel_for visits every index and propagates errors") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

}  // TEST_SUITE
