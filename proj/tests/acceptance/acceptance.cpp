// Acceptance run: one PASS/FAIL line per criterion.
//
//   mrolab_acceptance --config configs/default.cfg [--only id,id] [--work dir]
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mrolab/checkpoint.hpp"
#include "mrolab/config.hpp"
#include "mrolab/cql.hpp"
#include "mrolab/dataset.hpp"
#include "mrolab/dt.hpp"
#include "mrolab/eval.hpp"
#include "mrolab/mro.hpp"
#include "mrolab/reward.hpp"

namespace fs = std::filesystem;
using namespace mrolab;
using tensor::Tensor;

namespace {

// Tolerances and budgets.
constexpr double kFormulaRelTol = 1e-12;
constexpr double kGradRelTol = 1e-4;
constexpr int kGradSeeds = 5;
constexpr int kPenaltyBatches = 1000;
constexpr double kLn3Tol = 1e-12;
constexpr int kCausalContexts = 100;
constexpr double kSpearmanBound = 0.8;
constexpr int kCurveSeeds = 4;
constexpr int kCurveWindows = 20;
constexpr int kMroSeeds = 10;
constexpr std::size_t kMroTail = 4;
constexpr int kMroBandWidth = 3;
constexpr double kMroSeedFraction = 0.9;
constexpr double kDtScriptedAccuracy = 0.99;
constexpr double kE2eMargin = 0.01;
constexpr int kDtBand = 2;  // max final - min final, i.e. within +-1 dB of the middle

constexpr double kBudgetFormula = 1.0;
constexpr double kBudgetGradients = 60.0;
constexpr double kBudgetPenalty = 10.0;
constexpr double kBudgetCausal = 10.0;
constexpr double kBudgetCurves = 600.0;
constexpr double kBudgetMro = 600.0;
constexpr double kBudgetScripted = 600.0;  // 5 min for each of the two learners
constexpr double kBudgetE2e = 7200.0;
constexpr double kBudgetRgain = 1.0;
constexpr double kBudgetDeterminism = 600.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Setup {
  KeyValueConfig cfg;
  radio::RadioConfig radio;
  radio::ScenarioConfig scenario;
  reward::RewardConfig reward;
  mro::MroThresholds thresholds;
  fs::path work;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

// ---------------------------------------------------------------------------

Outcome formula_fidelity(const Setup&) {
  const mro::IssueWeights w{1.0, 0.5, 0.1, 0.1};
  HoCounters c;
  c.n_fte = 2;
  c.n_pp = 3;
  c.n_wc = 1;
  c.n_se = 4;
  c.n_ftl = 1;
  c.n_rc = 2;
  c.n_suc = 97;
  c.n_f = c.n_fte + c.n_ftl + c.n_wc + c.n_rc;
  reward::RewardConfig rc;
  rc.weights = w;
  const double e = mro::early_sum(c, w), l = mro::late_sum(c, w);
  const double ratio = *mro::mro_ratio(c, w);
  const double cost = *reward::cost(c, rc);
  const double r = reward::reward_value(c, rc);
  double worst = 0.0;
  worst = std::max(worst, rel(e, 2 * 1.0 + 3 * 0.1 + 1 * 0.5 + 4 * 0.1));
  worst = std::max(worst, rel(l, 1 * 1.0 + 2 * 0.5));
  worst = std::max(worst, rel(ratio, (3.2 - 2.0) / 100));
  worst = std::max(worst, rel(cost, 3.2 / 100 + 2.0 / 100));
  worst = std::max(worst, rel(r, std::exp(1.0 - 0.052)));
  const bool decide = mro::mro_decide_from_sums(3.2, 2.0, 100, 0, {}) == 1 && mro::mro_decide_from_sums(0, 5, 100, 0, {}) == -1;
  return {worst < kFormulaRelTol && decide, "max rel err " + fmt("%.2e", worst) + ", reward " + fmt("%.4f", r)};
}

std::vector<cql::Sample> random_samples(std::size_t n, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> g;
  std::uniform_int_distribution<std::size_t> a(0, 2);
  std::vector<cql::Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = out[i];
    s.state.resize(dim);
    s.next_state.resize(dim);
    for (auto& x : s.state) x = g(rng);
    for (auto& x : s.next_state) x = g(rng);
    s.action = a(rng);
    s.reward = 1 + g(rng);
    s.terminal = i % 5 == 4;
  }
  return out;
}

dt::DtContext random_context(std::size_t len, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> g;
  std::uniform_int_distribution<std::size_t> a(0, 2);
  dt::DtContext ctx(len);
  for (std::size_t j = 0; j < len; ++j) {
    ctx[j].rtg = 30 + 5 * g(rng);
    ctx[j].state.resize(dim);
    for (auto& x : ctx[j].state) x = g(rng);
    ctx[j].action = a(rng);
    ctx[j].timestep = j;
  }
  return ctx;
}

Outcome gradient_suite(const Setup&) {
  double worst_cql = 0.0, worst_dt = 0.0;
  for (int seed = 1; seed <= kGradSeeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    cql::CqlConfig cc;
    cc.hidden = 8;
    auto q = cql::QModel::create(4, cc, rng);
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& e : q.target.entries())
      for (auto& v : e.value.mutable_values()) v += g(rng);
    const auto batch = random_samples(6, 4, rng);
    worst_cql = std::max(worst_cql, nn::grad_check([&] { return cql::cql_loss(q, batch, 1.0).total; }, q.online));

    dt::DtConfig dc;
    dc.d_model = 8;
    dc.blocks = 1;
    dc.heads = 2;
    dc.context_k = 3;
    auto m = dt::DtModel::create(3, 40.0, dc, rng);
    std::vector<dt::DtContext> ctx{random_context(3, 3, rng), random_context(3, 3, rng)};
    const std::vector<std::size_t> targets{0, 1, 2, 2, 1, 0};
    worst_dt = std::max(worst_dt,
                        nn::grad_check([&] { return tensor::cross_entropy(dt::dt_forward(m, ctx), targets); }, m.params));
  }
  return {worst_cql < kGradRelTol && worst_dt < kGradRelTol,
          "CQL " + fmt("%.2e", worst_cql) + ", DT " + fmt("%.2e", worst_dt) + " over " + std::to_string(kGradSeeds) +
              " seeds"};
}

Outcome cql_penalty(const Setup&) {
  Rng rng(77);
  cql::CqlConfig cc;
  cc.hidden = 16;
  const auto model = cql::QModel::create(6, cc, rng);
  auto flat = model;
  flat.online = model.online.clone();
  for (auto& e : flat.online.entries())
    if (e.name.rfind("q.out", 0) == 0) std::ranges::fill(e.value.mutable_values(), 0.0);
  double min_penalty = 1e300, worst_ln3 = 0.0;
  for (int b = 0; b < kPenaltyBatches; ++b) {
    const auto batch = random_samples(8 + b % 25, 6, rng);
    min_penalty = std::min(min_penalty, cql::cql_loss(model, batch, 1.0).penalty);
    worst_ln3 = std::max(worst_ln3, std::abs(cql::cql_loss(flat, batch, 1.0).penalty - std::log(3.0)));
  }
  return {min_penalty >= 0.0 && worst_ln3 < kLn3Tol,
          "min penalty " + fmt("%.4g", min_penalty) + ", max |penalty - ln 3| " + fmt("%.1e", worst_ln3)};
}

Outcome dt_causal(const Setup&) {
  Rng rng(78);
  dt::DtConfig dc;
  dc.d_model = 32;
  dc.context_k = 5;
  const auto m = dt::DtModel::create(kStateDim, 40.0, dc, rng);
  std::uniform_int_distribution<std::size_t> len(2, 5);
  std::normal_distribution<double> g;
  int violations = 0;
  for (int c = 0; c < kCausalContexts; ++c) {
    const std::size_t l = len(rng);
    const auto ctx = random_context(l, kStateDim, rng);
    const std::size_t cut = std::uniform_int_distribution<std::size_t>(0, l - 1)(rng);
    auto perturbed = ctx;
    perturbed[cut].action = (*perturbed[cut].action + 1) % 3;
    for (std::size_t j = cut + 1; j < l; ++j) {
      perturbed[j].rtg += g(rng);
      for (auto& x : perturbed[j].state) x += g(rng);
      perturbed[j].action = std::nullopt;
    }
    const auto a = dt::dt_forward(m, std::span<const dt::DtContext>(&ctx, 1));
    const auto b = dt::dt_forward(m, std::span<const dt::DtContext>(&perturbed, 1));
    for (std::size_t i = 0; i < 3 * (cut + 1); ++i) violations += a.values()[i] != b.values()[i];
  }
  return {violations == 0, std::to_string(kCausalContexts) + " contexts, " + std::to_string(violations) +
                               " prefix logits changed"};
}

Outcome env_monotonicity(const Setup& s) {
  auto sc = s.scenario;
  sc.load = 0.6;
  sc.velocity_kmh = 50;
  std::vector<std::uint64_t> seeds;
  for (int i = 1; i <= kCurveSeeds; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
  const auto curve = eval::baseline_curves(s.radio, s.reward, sc, seeds, kCurveWindows);
  std::vector<double> cio, e, l;
  for (const auto& p : curve) {
    cio.push_back(p.cio);
    e.push_back(p.early);
    l.push_back(p.late);
  }
  const double re = eval::spearman(cio, e), rl = eval::spearman(cio, l);
  const bool cross = eval::curves_cross(curve);
  int crossing = 99;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if ((curve[i - 1].early - curve[i - 1].late) * (curve[i].early - curve[i].late) <= 0) {
      crossing = curve[i - 1].cio;
      break;
    }
  }
  return {re <= -kSpearmanBound && rl >= kSpearmanBound && cross,
          "rho(E) " + fmt("%.3f", re) + ", rho(L) " + fmt("%.3f", rl) +
              (cross ? ", curves cross in [" + std::to_string(crossing) + ", " + std::to_string(crossing + 1) + "]"
                     : ", no crossing")};
}

eval::EvalSpec base_spec(const Setup& s) {
  eval::EvalSpec spec;
  spec.radio = s.radio;
  spec.reward = s.reward;
  spec.horizon = s.scenario.horizon;
  spec.base_seed = static_cast<std::uint64_t>(s.cfg.get_int("eval.seed", 1000));
  spec.episodes = static_cast<int>(s.cfg.get_int("eval.episodes_per_cell", 4));
  return spec;
}

eval::NamedPolicy mro_policy(const Setup& s) {
  const auto w = s.reward.weights;
  const auto th = s.thresholds;
  return {"MRO", [w, th] { return make_behavior_policy(BehaviorKind::kMro, w, th); }};
}

Outcome mro_convergence(const Setup& s) {
  const auto spec = base_spec(s);
  int converged = 0;
  std::string bands;
  for (int seed = 1; seed <= kMroSeeds; ++seed) {
    auto sc = s.scenario;
    sc.seed = static_cast<std::uint64_t>(seed);
    const auto sweep = eval::converged_cio_sweep(spec, mro_policy(s), sc);
    const auto band = eval::absorbing_band(sweep.paths, kMroTail, kMroBandWidth);
    if (band) ++converged;
    bands += (bands.empty() ? "" : " ") + (band ? std::to_string(*band) : std::string("-"));
  }
  const double frac = static_cast<double>(converged) / kMroSeeds;
  return {frac >= kMroSeedFraction, std::to_string(converged) + "/" + std::to_string(kMroSeeds) +
                                        " seeds absorbed (band low edges: " + bands + ")"};
}

// Three-state chain with a non-myopic optimum; see the unit tests for the same fixture.
std::size_t chain_next(std::size_t s, std::size_t a) {
  if (a == 0) return s == 0 ? 0 : s - 1;
  if (a == 2) return std::min<std::size_t>(s + 1, 2);
  return s;
}
double chain_reward(std::size_t s, std::size_t a) {
  if (s == 0 && a == 1) return 0.3;
  return a == 2 && chain_next(s, a) == 2 ? 1.0 : 0.0;
}

Outcome scripted_oracles(const Setup&) {
  using Clock = std::chrono::steady_clock;
  // CQL on the chain against value iteration.
  const auto t0 = Clock::now();
  const double gamma = 0.9;
  std::array<std::array<double, 3>, 3> q{};
  for (int it = 0; it < 500; ++it) {
    auto nq = q;
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t a = 0; a < 3; ++a) {
        const auto& n = q[chain_next(s, a)];
        nq[s][a] = chain_reward(s, a) + gamma * std::max({n[0], n[1], n[2]});
      }
    q = nq;
  }
  std::vector<cql::Sample> data;
  for (int rep = 0; rep < 10; ++rep)
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t a = 0; a < 3; ++a) {
        cql::Sample x;
        x.state.assign(3, 0.0);
        x.state[s] = 1.0;
        x.next_state.assign(3, 0.0);
        x.next_state[chain_next(s, a)] = 1.0;
        x.action = a;
        x.reward = chain_reward(s, a);
        data.push_back(x);
      }
  cql::CqlConfig cc;
  cc.hidden = 16;
  cc.gamma = gamma;
  cc.alpha = 0.5;
  cc.steps = 3000;
  cc.batch_size = 32;
  cc.target_sync = 50;
  cc.learning_rate = 3e-3;
  cc.seed = 4;
  const auto res = cql::train_cql(data, 3, cc);
  int cql_ok = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<double> x(3, 0.0);
    x[s] = 1.0;
    const auto best = std::max_element(q[s].begin(), q[s].end()) - q[s].begin();
    cql_ok += static_cast<long>(action_index(cql::greedy_action(res.model.q(x)))) == best;
  }
  const double cql_s = std::chrono::duration<double>(Clock::now() - t0).count();

  // DT on a scripted sign(-cio) controller.
  const auto t1 = Clock::now();
  Rng rng(7);
  auto episodes = [&](std::size_t n) {
    std::uniform_int_distribution<int> cio(-8, 8);
    std::normal_distribution<double> g;
    std::vector<dt::Episode> out(n);
    for (auto& e : out) {
      std::vector<double> r;
      for (std::size_t t = 0; t < 6; ++t) {
        const int c = cio(rng);
        std::vector<double> st(4);
        st[0] = c / 8.0;
        for (std::size_t i = 1; i < st.size(); ++i) st[i] = g(rng);
        e.states.push_back(st);
        e.actions.push_back(action_index(c > 0 ? -1 : (c < 0 ? 1 : 0)));
        r.push_back(1 + std::abs(g(rng)));
      }
      e.rtg = reward::rtg(r);
    }
    return out;
  };
  const auto train = episodes(200), held = episodes(100);
  dt::DtConfig dc;
  dc.d_model = 16;
  dc.heads = 2;
  dc.context_k = 3;
  dc.max_timestep = 8;
  dc.batch_size = 32;
  dc.steps = 600;
  dc.learning_rate = 3e-3;
  dc.seed = 2;
  const auto model = dt::train_dt(train, 4, 12.0, dc).model;
  int correct = 0, total = 0;
  for (const auto& e : held) {
    for (std::size_t start = 0; start + 3 <= 6; start += 3) {
      dt::DtContext ctx;
      for (std::size_t j = 0; j < 3; ++j) ctx.push_back({e.rtg[start + j], e.states[start + j], e.actions[start + j], start + j});
      ctx.back().action.reset();
      const auto l = dt::dt_forward(model, std::span<const dt::DtContext>(&ctx, 1)).values();
      for (std::size_t j = 0; j < 3; ++j) {
        correct += action_index(cql::greedy_action({l[3 * j], l[3 * j + 1], l[3 * j + 2]})) == e.actions[start + j];
        ++total;
      }
    }
  }
  const double acc = static_cast<double>(correct) / total;
  const double dt_s = std::chrono::duration<double>(Clock::now() - t1).count();
  const bool pass = cql_ok == 3 && acc >= kDtScriptedAccuracy && cql_s < kBudgetScripted / 2 && dt_s < kBudgetScripted / 2;
  return {pass, "CQL " + std::to_string(cql_ok) + "/3 states optimal (" + fmt("%.1f s", cql_s) + "), DT held-out accuracy " +
                    fmt("%.4f", acc) + " (" + fmt("%.1f s", dt_s) + ")"};
}

std::vector<radio::ScenarioConfig> train_grid(const Setup& s) {
  return eval::ScenarioGrid::from_config(s.cfg, "grid.train", eval::ScenarioGrid::train()).expand(s.scenario);
}

eval::NamedPolicy dt_named(std::shared_ptr<const dt::DtModel> m, double multiplier, const std::string& name) {
  const double target = m->rtg_scale * multiplier;
  return {name, [m, target, name] { return std::make_unique<dt::DtPolicy>(m, target, name); }};
}

double mean_abs_final(const eval::CioSweep& sweep) {
  double t = 0.0;
  for (int f : sweep.finals()) t += std::abs(f);
  return t / static_cast<double>(sweep.paths.size());
}

Outcome end_to_end(const Setup& s) {
  GenerationConfig g;
  g.radio = s.radio;
  g.reward = s.reward;
  g.thresholds = s.thresholds;
  g.scenarios = train_grid(s);
  g.episodes_per_cell = static_cast<int>(s.cfg.get_int("dataset.episodes_per_cell", 4));
  g.horizon = s.scenario.horizon;
  g.base_seed = static_cast<std::uint64_t>(s.cfg.get_int("dataset.seed", 0));
  g.config_hash = fnv1a_hex(s.cfg.canonical());
  const auto data = generate_dataset(g);
  std::cerr << "  e2e: dataset " << data.size() << " trajectories\n";

  OfflineDataset filtered = data;
  if (s.cfg.has("dataset.filter_rtg")) {
    filtered = filter_dataset(data, s.cfg.get_double("dataset.filter_rtg", 0.0),
                              s.cfg.get_bool("dataset.filter_zero_failures", true));
  }
  const auto cc = cql::CqlConfig::from_config(s.cfg);
  auto cql_model = std::make_shared<const cql::QModel>(cql::train_cql(filtered, cc).model);
  const double multiplier = s.cfg.get_double("eval.target_multiplier", 1.0);
  std::vector<eval::NamedPolicy> policies{mro_policy(s),
                                          {"CQL", [cql_model] { return cql::make_cql_policy(cql_model, "CQL"); }}};
  const auto base_dt = dt::DtConfig::from_config(s.cfg);
  std::map<std::string, std::shared_ptr<const dt::DtModel>> dts;
  for (std::size_t k : {3, 4, 5, 7}) {
    auto dc = base_dt;
    dc.context_k = k;
    auto m = std::make_shared<const dt::DtModel>(dt::train_dt(data, dc).model);
    const std::string name = "DT-K" + std::to_string(k);
    dts[name] = m;
    policies.push_back(dt_named(m, multiplier, name));
  }
  std::cerr << "  e2e: trained CQL and 4 DT models\n";

  auto spec = base_spec(s);
  spec.scenarios = train_grid(s);
  const auto report = eval::evaluate(spec, policies);
  const auto rows = report.summarize();
  double mro_mean = 0.0, best_mean = -1e300;
  std::string best, table;
  std::string best_dt;
  double best_dt_mean = -1e300;
  for (const auto& r : rows) {
    if (r.group != "all") continue;
    table += " " + r.policy + "=" + fmt("%.2f", r.mean);
    if (r.policy == "MRO") {
      mro_mean = r.mean;
      continue;
    }
    if (r.mean > best_mean) {
      best_mean = r.mean;
      best = r.policy;
    }
    if (dts.count(r.policy) && r.mean > best_dt_mean) {
      best_dt_mean = r.mean;
      best_dt = r.policy;
    }
  }
  const bool beats = best_mean >= (1.0 - kE2eMargin) * mro_mean;
  std::cerr << "  e2e: means" << table << "\n";

  // Converged CIO of the best DT from every initial CIO.
  const auto sweep = eval::converged_cio_sweep(spec, dt_named(dts[best_dt], multiplier, best_dt), s.scenario);
  const bool banded = sweep.spread() <= kDtBand;

  // Same learner on the CIO-penalized reward.
  auto pen = s.reward;
  pen.variant = reward::Variant::kCioPenalty;
  if (pen.lambda_cio <= 0) pen.lambda_cio = 0.02;
  const auto pen_data = relabel_rewards(data, pen);
  auto dc = dts[best_dt]->config;
  auto pen_model = std::make_shared<const dt::DtModel>(dt::train_dt(pen_data, dc).model);
  auto pen_spec = spec;
  pen_spec.reward = pen;
  const auto pen_sweep = eval::converged_cio_sweep(pen_spec, dt_named(pen_model, multiplier, best_dt + "-pen"), s.scenario);
  const double plain_abs = mean_abs_final(sweep), pen_abs = mean_abs_final(pen_sweep);
  const bool closer = pen_abs <= plain_abs;

  const auto finals = sweep.finals();
  std::ostringstream os;
  os << "best " << best << " " << fmt("%.2f", best_mean) << " vs MRO " << fmt("%.2f", mro_mean) << " (rGain "
     << eval::format_rgain(eval::rgain(best_mean, mro_mean)) << "%); " << best_dt << " sweep finals in ["
     << *std::ranges::min_element(finals) << ", " << *std::ranges::max_element(finals)
     << "]; mean |CIO| plain " << fmt("%.2f", plain_abs) << " vs cio_penalty " << fmt("%.2f", pen_abs);
  return {beats && banded && closer, os.str()};
}

Outcome rgain_arithmetic(const Setup&) {
  eval::EvalReport r;
  eval::PolicyRun base{"MRO", {}}, dt{"DT", {}};
  base.episodes.push_back({"fixture", 0.6, 50, 1, 0, 0, -2, 23.08});
  dt.episodes.push_back({"fixture", 0.6, 50, 1, 0, 0, -2, 23.36});
  r.runs = {base, dt};
  std::string shown;
  for (const auto& row : r.summarize())
    if (row.policy == "DT" && row.group == "all") shown = eval::format_rgain(*row.rgain);
  const bool csv = eval::summary_csv(r).find(",+1.2\n") != std::string::npos;
  return {shown == "+1.2" && csv, "rGain(23.36, 23.08) = " + shown + "%"};
}

Outcome determinism(const Setup& s) {
  // Every stage at reduced size, twice.
  auto run = [&](const fs::path& dir) {
    GenerationConfig g;
    g.radio = s.radio;
    g.radio.warmup_s = 20;
    g.reward = s.reward;
    g.thresholds = s.thresholds;
    auto sc = s.scenario;
    sc.window_seconds = 10;
    g.scenarios = {sc};
    sc.load = 0.4;
    g.scenarios.push_back(sc);
    g.episodes_per_cell = 2;
    g.horizon = 5;
    g.base_seed = 3;
    const auto d = generate_dataset(g);
    save_dataset(dir / "dataset.jsonl", d);
    const auto loaded = load_dataset(dir / "dataset.jsonl");
    cql::CqlConfig cc;
    cc.hidden = 16;
    cc.steps = 100;
    const auto q = cql::train_cql(loaded, cc).model;
    save_checkpoint(dir / "cql.ckpt.json", cql::to_checkpoint(q));
    dt::DtConfig dc;
    dc.d_model = 16;
    dc.context_k = 3;
    dc.steps = 50;
    const auto m = std::make_shared<const dt::DtModel>(dt::train_dt(loaded, dc).model);
    save_checkpoint(dir / "dt.ckpt.json", dt::to_checkpoint(*m));
    eval::EvalSpec spec;
    spec.radio = g.radio;
    spec.reward = s.reward;
    spec.scenarios = g.scenarios;
    spec.episodes = 2;
    spec.horizon = 5;
    auto qp = std::make_shared<const cql::QModel>(q);
    const auto rep = eval::evaluate(spec, {{"CQL", [qp] { return cql::make_cql_policy(qp); }},
                                           dt_named(m, 1.0, "DT")});
    eval::report_emit(rep, dir / "eval");
    const auto sweep = eval::converged_cio_sweep(spec, dt_named(m, 1.0, "DT"), g.scenarios[0]);
    std::string paths;
    for (const auto& p : sweep.paths)
      for (int c : p) paths += std::to_string(c) + ",";
    eval::write_text(dir / "sweep.txt", paths);
    auto csc = g.scenarios[0];
    const auto curve = eval::baseline_curves(g.radio, s.reward, csc, {1}, 1);
    std::string cs;
    for (const auto& p : curve) cs += fmt("%.17g,", p.early) + fmt("%.17g,", p.late) + fmt("%.17g\n", p.n_all);
    eval::write_text(dir / "curves.txt", cs);
  };
  const fs::path a = s.work / "det_a", b = s.work / "det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  fs::create_directories(a);
  fs::create_directories(b);
  run(a);
  run(b);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  int files = 0, differ = 0;
  std::string which;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const auto rel_path = fs::relative(entry.path(), a);
    if (slurp(entry.path()) != slurp(b / rel_path)) {
      ++differ;
      which += " " + rel_path.string();
    }
  }
  return {differ == 0 && files >= 9,
          std::to_string(files) + " artifacts compared, " + std::to_string(differ) + " differ" + which};
}

struct Criterion {
  const char* id;
  const char* title;
  double budget_s;
  Outcome (*run)(const Setup&);
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mrolab acceptance run"};
  std::string config;
  std::string only;
  std::string work = (fs::temp_directory_path() / "mrolab_acceptance").string();
  app.add_option("--config", config, "Configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("--only", only, "Comma-separated criterion ids");
  app.add_option("--work", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  Setup s;
  try {
    s.cfg = KeyValueConfig::load(config);
    s.radio = radio::RadioConfig::from_config(s.cfg);
    s.scenario = radio::ScenarioConfig::from_config(s.cfg);
    s.reward = reward::RewardConfig::from_config(s.cfg);
    s.thresholds.tau_events = static_cast<int>(s.cfg.get_int("mro.tau_events", s.thresholds.tau_events));
    s.thresholds.tau_early = s.cfg.get_double("mro.tau_early", s.thresholds.tau_early);
    s.thresholds.tau_late = s.cfg.get_double("mro.tau_late", s.thresholds.tau_late);
    s.work = work;
    fs::create_directories(s.work);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  const std::vector<Criterion> criteria{
      {"formula", "formula fidelity", kBudgetFormula, formula_fidelity},
      {"gradients", "gradient suite", kBudgetGradients, gradient_suite},
      {"cql-penalty", "CQL penalty non-negativity and ln 3 identity", kBudgetPenalty, cql_penalty},
      {"dt-causal", "DT causal masking", kBudgetCausal, dt_causal},
      {"env-monotonicity", "environment monotonicity", kBudgetCurves, env_monotonicity},
      {"mro-convergence", "baseline convergence", kBudgetMro, mro_convergence},
      {"scripted-oracles", "scripted-MDP oracles", kBudgetScripted, scripted_oracles},
      {"end-to-end", "end-to-end comparative finding", kBudgetE2e, end_to_end},
      {"rgain", "rGain arithmetic", kBudgetRgain, rgain_arithmetic},
      {"determinism", "determinism", kBudgetDeterminism, determinism},
  };
  std::set<std::string> selected;
  std::stringstream ss(only);
  for (std::string id; std::getline(ss, id, ',');)
    if (!id.empty()) selected.insert(id);

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(s);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s  %-17s %-46s %8.2f s / %.0f s  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.title, secs, c.budget_s,
                o.detail.c_str(), in_time ? "" : "  [over budget]");
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::cerr << "error: no criterion matches --only " << only << "\n";
    return 2;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
