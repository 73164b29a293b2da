#include <cmath>
#include <random>

#include "doctest.h"
#include "mrolab/cql.hpp"
#include "mrolab/dt.hpp"
#include "support.hpp"

using namespace mrolab;
using namespace mrolab::dt;
using mrolab::tensor::Tensor;

namespace {

DtConfig small_config(std::size_t k = 3) {
  DtConfig c;
  c.d_model = 16;
  c.blocks = 2;
  c.heads = 2;
  c.context_k = k;
  c.max_timestep = 8;
  c.batch_size = 16;
  c.steps = 200;
  c.learning_rate = 3e-3;
  c.seed = 2;
  return c;
}

DtContext random_context(std::size_t len, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> g;
  std::uniform_int_distribution<std::size_t> a(0, 2);
  DtContext ctx(len);
  for (std::size_t j = 0; j < len; ++j) {
    ctx[j].rtg = 10 + g(rng);
    ctx[j].state.resize(dim);
    for (auto& x : ctx[j].state) x = g(rng);
    ctx[j].action = a(rng);
    ctx[j].timestep = j + 1;
  }
  ctx.back().action.reset();
  return ctx;
}

std::vector<double> logits_of(const DtModel& m, const DtContext& ctx) {
  const auto out = dt_forward(m, std::span<const DtContext>(&ctx, 1));
  return {out.values().begin(), out.values().end()};
}

// Episodes whose action is sign(-cio), with the CIO in feature 0 and noise elsewhere.
std::vector<Episode> scripted_episodes(std::size_t n, std::size_t len, Rng& rng) {
  std::uniform_int_distribution<int> cio(-8, 8);
  std::normal_distribution<double> g;
  std::vector<Episode> out(n);
  for (auto& e : out) {
    for (std::size_t t = 0; t < len; ++t) {
      const int c = cio(rng);
      std::vector<double> s(4);
      s[0] = c / 8.0;
      for (std::size_t i = 1; i < s.size(); ++i) s[i] = g(rng);
      e.states.push_back(s);
      e.actions.push_back(action_index(c > 0 ? -1 : (c < 0 ? 1 : 0)));
    }
    std::vector<double> r(len);
    for (auto& x : r) x = 1 + std::abs(g(rng));
    e.rtg = reward::rtg(r);
  }
  return out;
}

class ConstantRewardEnv final : public Environment {
 public:
  explicit ConstantRewardEnv(double r) : r_(r) {}
  HoCounters reset(int init_cio) override {
    cio_ = init_cio;
    return state();
  }
  StepResult step(int action) override {
    StepResult s;
    s.applied_action = mro::clip_action(cio_, action);
    cio_ += s.applied_action;
    s.next = state();
    s.reward = r_;
    return s;
  }

 private:
  HoCounters state() const {
    HoCounters c;
    c.cio = cio_;
    c.n_suc = 40 + cio_;
    c.n_fte = cio_ < 0 ? -cio_ : 0;
    return c;
  }
  double r_;
  int cio_ = 0;
};

}  // namespace

TEST_SUITE("dt") {

TEST_CASE("logits never depend on later tokens") {
  Rng rng(1);
  const auto m = DtModel::create(5, 20.0, small_config(4), rng);
  for (int trial = 0; trial < 10; ++trial) {
    auto ctx = random_context(4, 5, rng);
    ctx.back().action = 1;
    const auto base = logits_of(m, ctx);
    for (std::size_t l = 0; l < 4; ++l) {
      auto p = ctx;
      // The action of step l and everything after it.
      p[l].action = (*p[l].action + 1) % 3;
      for (std::size_t j = l + 1; j < 4; ++j) {
        p[j].rtg += 3.0;
        p[j].state[2] -= 1.5;
        p[j].timestep = 7;
      }
      const auto out = logits_of(m, p);
      for (std::size_t i = 0; i < 3 * (l + 1); ++i) CHECK(out[i] == base[i]);
      bool changed = false;
      for (std::size_t i = 3 * (l + 1); i < out.size(); ++i) changed = changed || out[i] != base[i];
      if (l + 1 < 4) CHECK(changed);
    }
  }
}

TEST_CASE("K = 1 is a feed-forward map of rtg and state") {
  Rng rng(2);
  const auto m = DtModel::create(3, 5.0, small_config(1), rng);
  auto a = random_context(1, 3, rng);
  auto b = a;
  b[0].action = 2;
  CHECK(logits_of(m, a) == logits_of(m, b));
  auto c = a;
  c[0].rtg += 1.0;
  CHECK(logits_of(m, c) != logits_of(m, a));
  // Rows of a batch are independent.
  const auto other = random_context(1, 3, rng);
  const std::vector<DtContext> batch{a, other};
  const auto out = dt_forward(m, batch);
  const auto single = logits_of(m, other);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out.values()[3 + i] == doctest::Approx(single[i]).epsilon(1e-13));
}

TEST_CASE("a zeroed head gives uniform logits") {
  Rng rng(3);
  auto m = DtModel::create(4, 5.0, small_config(), rng);
  for (auto& e : m.params.entries())
    if (e.name.rfind("head.", 0) == 0) std::fill(e.value.mutable_values().begin(), e.value.mutable_values().end(), 0.0);
  const auto l = logits_of(m, random_context(3, 4, rng));
  for (double v : l) CHECK(v == 0.0);
  const auto p = tensor::softmax(Tensor::from({1, 3}, {l[0], l[1], l[2]}));
  for (double v : p.values()) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("context and horizon limits") {
  Rng rng(4);
  const auto m = DtModel::create(4, 5.0, small_config(3), rng);
  CHECK_THROWS(logits_of(m, random_context(4, 4, rng)));
  CHECK_THROWS(logits_of(m, random_context(3, 5, rng)));
  CHECK_NOTHROW(logits_of(m, random_context(2, 4, rng)));

  auto eps = scripted_episodes(4, 3, rng);
  CHECK_THROWS(train_dt(eps, 4, 10.0, small_config(4)));
  CHECK_THROWS(train_dt(std::vector<Episode>{}, 4, 10.0, small_config(3)));
  CHECK_THROWS(DtModel::create(4, 0.0, small_config(), rng));
}

TEST_CASE("gradients of the cross-entropy match finite differences") {
  Rng rng(5);
  auto cfg = small_config(2);
  cfg.d_model = 8;
  cfg.blocks = 1;
  auto m = DtModel::create(3, 4.0, cfg, rng);
  std::vector<DtContext> batch{random_context(2, 3, rng), random_context(2, 3, rng)};
  for (auto& c : batch) c.back().action = 1;
  const std::vector<std::size_t> targets{0, 2, 1, 1};
  const double err =
      nn::grad_check([&] { return tensor::cross_entropy(dt_forward(m, batch), targets); }, m.params);
  CHECK(err < 1e-4);
}

TEST_CASE("a single repeated trajectory is memorized") {
  Rng rng(6);
  auto eps = scripted_episodes(1, 5, rng);
  auto cfg = small_config(5);
  cfg.steps = 300;
  const auto res = train_dt(eps, 4, eps[0].rtg[0], cfg);
  CHECK(res.loss_curve.back() < 0.05);
  CHECK(res.loss_curve.back() < res.loss_curve.front());
}

TEST_CASE("scripted sign(-cio) policy is reproduced on held-out windows") {
  Rng rng(7);
  const auto train = scripted_episodes(200, 6, rng);
  const auto held = scripted_episodes(100, 6, rng);
  auto cfg = small_config(3);
  cfg.steps = 600;
  cfg.batch_size = 32;
  const auto res = train_dt(train, 4, 12.0, cfg);
  int correct = 0, total = 0;
  for (const auto& e : held) {
    for (std::size_t start = 0; start + 3 <= e.actions.size(); start += 3) {
      DtContext ctx;
      for (std::size_t j = 0; j < 3; ++j) {
        ctx.push_back(DtStep{e.rtg[start + j], e.states[start + j], e.actions[start + j], start + j});
      }
      ctx.back().action.reset();
      const auto l = logits_of(res.model, ctx);
      for (std::size_t j = 0; j < 3; ++j) {
        const std::array<double, 3> q{l[3 * j], l[3 * j + 1], l[3 * j + 2]};
        correct += action_index(cql::greedy_action(q)) == e.actions[start + j];
        ++total;
      }
    }
  }
  CHECK(static_cast<double>(correct) / total >= 0.99);
}

TEST_CASE("training is deterministic given the seed") {
  Rng rng(8);
  const auto eps = scripted_episodes(10, 4, rng);
  auto cfg = small_config(2);
  cfg.steps = 20;
  CHECK(train_dt(eps, 4, 8.0, cfg).loss_curve == train_dt(eps, 4, 8.0, cfg).loss_curve);
}

TEST_CASE("rollout decrements the rtg input by each observed reward") {
  Rng rng(9);
  auto m = std::make_shared<DtModel>(DtModel::create(kStateDim, 30.0, small_config(3), rng));
  ConstantRewardEnv env(0.75);
  DtPolicy policy(m, 20.0);
  const auto tr = run_episode(env, policy, -5, 10, 0);
  REQUIRE(policy.rtg_inputs().size() == 10);
  for (std::size_t t = 0; t < 10; ++t) CHECK(policy.rtg_inputs()[t] == doctest::Approx(20.0 - 0.75 * t));
  for (const auto& x : tr.transitions) CHECK(x.next_state.cio == mro::clip_cio(x.state.cio + x.action));

  ConstantRewardEnv env2(0.75);
  const auto a = dt_rollout(m, env2, 20.0, 3, 12);
  const auto b = dt_rollout(m, env2, 20.0, 3, 12);
  CHECK(a == b);
  CHECK(a.transitions.size() == 12);
  CHECK_THROWS(DtPolicy(m, std::nan("")));
}

TEST_CASE("checkpoint round trip") {
  Rng rng(10);
  auto m = DtModel::create(kStateDim, 27.5, small_config(3), rng);
  m.normalizer.n_all_scale = 80;
  m.normalizer.mean[0] = -0.1;
  const auto back = from_checkpoint(checkpoint_from_string(checkpoint_to_string(to_checkpoint(m))));
  CHECK(back.rtg_scale == 27.5);
  CHECK(back.normalizer == m.normalizer);
  CHECK(back.config.context_k == 3);
  const auto ctx = random_context(3, kStateDim, rng);
  CHECK(logits_of(back, ctx) == logits_of(m, ctx));
}

}  // TEST_SUITE
