#include "mrolab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mrolab::eval {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string short_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string group_of(const EpisodeOutcome& e) { return "l" + short_num(e.load) + "_v" + short_num(e.velocity); }

}  // namespace

ScenarioGrid ScenarioGrid::train() { return ScenarioGrid{{0.2, 0.4, 0.6, 0.7}, {4, 50, 120}, {1, 2}}; }

ScenarioGrid ScenarioGrid::validation() { return ScenarioGrid{{0.5, 0.6, 0.7}, {25, 85}, {3, 4}}; }

ScenarioGrid ScenarioGrid::from_config(const KeyValueConfig& cfg, const std::string& prefix,
                                       const ScenarioGrid& fallback) {
  ScenarioGrid g;
  g.loads = cfg.get_doubles(prefix + ".loads", fallback.loads);
  g.velocities = cfg.get_doubles(prefix + ".velocities", fallback.velocities);
  std::vector<double> fallback_seeds(fallback.seeds.begin(), fallback.seeds.end());
  for (double s : cfg.get_doubles(prefix + ".seeds", fallback_seeds)) {
    if (s < 0 || s != std::floor(s)) throw ConfigError("config: " + prefix + ".seeds must be non-negative integers");
    g.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (g.loads.empty() || g.velocities.empty() || g.seeds.empty()) {
    throw ConfigError("config: scenario grid '" + prefix + "' is empty");
  }
  return g;
}

std::vector<radio::ScenarioConfig> ScenarioGrid::expand(const radio::ScenarioConfig& base) const {
  std::vector<radio::ScenarioConfig> out;
  for (double l : loads)
    for (double v : velocities)
      for (auto s : seeds) {
        auto c = base;
        c.load = l;
        c.velocity_kmh = v;
        c.seed = s;
        c.validate();
        out.push_back(c);
      }
  return out;
}

const PolicyRun* EvalReport::find(const std::string& policy) const {
  for (const auto& r : runs)
    if (r.policy == policy) return &r;
  return nullptr;
}

std::vector<SummaryRow> EvalReport::summarize() const {
  auto stats = [](const std::string& policy, const std::string& group, const std::vector<const EpisodeOutcome*>& eps) {
    SummaryRow row;
    row.policy = policy;
    row.group = group;
    row.episodes = eps.size();
    if (eps.empty()) return row;
    double sum = 0.0;
    row.max = eps.front()->rtg;
    for (const auto* e : eps) {
      sum += e->rtg;
      row.max = std::max(row.max, e->rtg);
      row.final_cios.push_back(e->final_cio);
    }
    row.mean = sum / static_cast<double>(eps.size());
    if (eps.size() > 1) {
      double sq = 0.0;
      for (const auto* e : eps) sq += (e->rtg - row.mean) * (e->rtg - row.mean);
      row.std = std::sqrt(sq / static_cast<double>(eps.size() - 1));
    }
    std::sort(row.final_cios.begin(), row.final_cios.end());
    row.final_cios.erase(std::unique(row.final_cios.begin(), row.final_cios.end()), row.final_cios.end());
    return row;
  };

  std::vector<SummaryRow> rows;
  std::map<std::string, double> baseline_means;
  auto grouped = [&](const PolicyRun& run) {
    std::vector<std::pair<std::string, std::vector<const EpisodeOutcome*>>> groups{{"all", {}}};
    for (const auto& e : run.episodes) {
      groups.front().second.push_back(&e);
      const std::string g = group_of(e);
      auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& p) { return p.first == g; });
      if (it == groups.end()) {
        groups.emplace_back(g, std::vector<const EpisodeOutcome*>{&e});
      } else {
        it->second.push_back(&e);
      }
    }
    return groups;
  };
  if (const PolicyRun* base = find(baseline)) {
    for (const auto& [g, eps] : grouped(*base))
      if (!eps.empty()) baseline_means[g] = stats(base->policy, g, eps).mean;
  }
  for (const auto& run : runs) {
    for (const auto& [g, eps] : grouped(run)) {
      SummaryRow row = stats(run.policy, g, eps);
      const auto it = baseline_means.find(g);
      if (it != baseline_means.end() && it->second != 0.0 && row.episodes > 0) row.rgain = rgain(row.mean, it->second);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

double rgain(double mean_policy, double mean_baseline) {
  if (mean_baseline == 0.0) throw std::domain_error("rgain: baseline mean is zero");
  return 100.0 * (mean_policy - mean_baseline) / mean_baseline;
}

std::string format_rgain(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f", value);
  return buf;
}

EvalReport evaluate(const EvalSpec& spec, std::vector<NamedPolicy> policies) {
  if (spec.scenarios.empty()) throw std::invalid_argument("evaluate: empty scenario grid");
  if (spec.episodes < 1 || spec.horizon < 1) throw std::invalid_argument("evaluate: episodes and horizon must be >= 1");
  EvalReport report;
  const bool has_baseline =
      std::any_of(policies.begin(), policies.end(), [&](const NamedPolicy& p) { return p.name == report.baseline; });
  if (!has_baseline) {
    const auto weights = spec.reward.weights;
    policies.insert(policies.begin(),
                    NamedPolicy{report.baseline, [weights] { return make_behavior_policy(BehaviorKind::kMro, weights); }});
  }
  const std::size_t n_ep = static_cast<std::size_t>(spec.episodes);
  const std::size_t per_policy = spec.scenarios.size() * n_ep;
  std::vector<EpisodeOutcome> outcomes(policies.size() * per_policy);
  parallel_for(outcomes.size(), spec.threads, [&](std::size_t i) {
    const auto& np = policies[i / per_policy];
    const auto& scenario = spec.scenarios[(i % per_policy) / n_ep];
    const int episode = static_cast<int>(i % n_ep);
    const EpisodeSeeds seeds = episode_seeds(spec.base_seed, scenario, episode);
    CioEnvironment env(spec.radio, scenario, spec.reward, seeds.world_stream);
    auto policy = np.factory();
    const Trajectory t = run_episode(env, *policy, seeds.init_cio, spec.horizon, seeds.policy_seed, scenario.id());
    outcomes[i] = EpisodeOutcome{scenario.id(), scenario.load,  scenario.velocity_kmh, scenario.seed,
                                 episode,       seeds.init_cio, t.final_cio(),         t.total()};
  });
  for (std::size_t p = 0; p < policies.size(); ++p) {
    PolicyRun run{policies[p].name, {}};
    run.episodes.assign(outcomes.begin() + static_cast<std::ptrdiff_t>(p * per_policy),
                        outcomes.begin() + static_cast<std::ptrdiff_t>((p + 1) * per_policy));
    report.runs.push_back(std::move(run));
  }
  return report;
}

std::vector<int> CioSweep::finals() const {
  std::vector<int> out;
  for (const auto& p : paths) out.push_back(p.back());
  return out;
}

int CioSweep::mode() const {
  std::map<int, int> count;
  for (int f : finals()) ++count[f];
  int best = 0, best_n = -1;
  for (const auto& [cio, n] : count)
    if (n > best_n) {
      best = cio;
      best_n = n;
    }
  return best;
}

int CioSweep::spread() const {
  const auto f = finals();
  if (f.empty()) return 0;
  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  return *hi - *lo;
}

CioSweep converged_cio_sweep(const EvalSpec& spec, const NamedPolicy& policy, const radio::ScenarioConfig& scenario) {
  CioSweep sweep;
  sweep.policy = policy.name;
  sweep.scenario = scenario.id();
  const int n = mro::kCioMax - mro::kCioMin + 1;
  sweep.paths.resize(static_cast<std::size_t>(n));
  parallel_for(sweep.paths.size(), spec.threads, [&](std::size_t i) {
    const int init = mro::kCioMin + static_cast<int>(i);
    // One traffic realization shared by every initial CIO.
    const EpisodeSeeds seeds = episode_seeds(spec.base_seed, scenario, 1000);
    CioEnvironment env(spec.radio, scenario, spec.reward, seeds.world_stream);
    auto p = policy.factory();
    const Trajectory t = run_episode(env, *p, init, spec.horizon, seeds.policy_seed, scenario.id());
    std::vector<int> path{init};
    for (const auto& tr : t.transitions) path.push_back(tr.next_state.cio);
    sweep.paths[i] = std::move(path);
  });
  return sweep;
}

std::optional<int> absorbing_band(const std::vector<std::vector<int>>& paths, std::size_t tail, int width) {
  if (paths.empty() || tail == 0 || width < 1) return std::nullopt;
  int lo = mro::kCioMax, hi = mro::kCioMin;
  for (const auto& p : paths) {
    if (p.size() < tail) return std::nullopt;
    for (std::size_t i = p.size() - tail; i < p.size(); ++i) {
      lo = std::min(lo, p[i]);
      hi = std::max(hi, p[i]);
    }
  }
  if (hi - lo + 1 > width) return std::nullopt;
  return lo;
}

std::vector<CurvePoint> baseline_curves(const radio::RadioConfig& radio, const reward::RewardConfig& reward,
                                        radio::ScenarioConfig scenario, const std::vector<std::uint64_t>& seeds,
                                        int windows, unsigned threads) {
  if (seeds.empty() || windows < 1) throw std::invalid_argument("baseline_curves: need seeds and windows >= 1");
  const int n_cio = mro::kCioMax - mro::kCioMin + 1;
  struct Acc {
    double e = 0, l = 0, n = 0, cost = 0;
    std::size_t windows = 0;
  };
  std::vector<Acc> acc(seeds.size() * static_cast<std::size_t>(n_cio));
  parallel_for(acc.size(), threads, [&](std::size_t i) {
    auto sc = scenario;
    sc.seed = seeds[i / n_cio];
    const int cio = mro::kCioMin + static_cast<int>(i % n_cio);
    // The same traffic realization for every CIO of a seed.
    radio::World world(radio, sc, derive_seed(sc.seed, {scenario_key(sc), 0xC0EEULL}));
    world.set_cio(cio);
    world.warm_up();
    Acc& a = acc[i];
    for (int w = 0; w < windows; ++w) {
      const auto c = world.run_window(cio).counters;
      a.e += mro::early_sum(c, reward.weights);
      a.l += mro::late_sum(c, reward.weights);
      a.n += c.n_all();
      a.cost += reward::cost(c, reward).value_or(0.0);
      ++a.windows;
    }
  });
  std::vector<CurvePoint> out;
  for (int k = 0; k < n_cio; ++k) {
    CurvePoint p;
    p.cio = mro::kCioMin + k;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const Acc& a = acc[s * n_cio + static_cast<std::size_t>(k)];
      p.early += a.e;
      p.late += a.l;
      p.n_all += a.n;
      p.cost += a.cost;
      p.windows += a.windows;
    }
    const double w = static_cast<double>(p.windows);
    p.early /= w;
    p.late /= w;
    p.n_all /= w;
    p.cost /= w;
    out.push_back(p);
  }
  return out;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length series");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

bool curves_cross(const std::vector<CurvePoint>& curve) {
  if (curve.empty()) return false;
  const double first = curve.front().early - curve.front().late;
  const double last = curve.back().early - curve.back().late;
  return (first >= 0 && last <= 0) || (first <= 0 && last >= 0);
}

Histogram histogram(const std::vector<double>& values, double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(hi >= lo)) throw std::invalid_argument("histogram: need bins >= 1 and hi >= lo");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : values) {
    std::size_t b = 0;
    if (width > 0) {
      const double pos = std::floor((v - lo) / width);
      b = pos < 0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(pos));
    }
    ++h.counts[b];
  }
  return h;
}

// ---------------------------------------------------------------------------
// Emission

std::string summary_csv(const EvalReport& report) {
  std::string out = "policy,group,episodes,mean,std,max,final_cios,rgain_pct\n";
  for (const auto& r : report.summarize()) {
    std::string cios;
    for (std::size_t i = 0; i < r.final_cios.size(); ++i) cios += (i ? ";" : "") + std::to_string(r.final_cios[i]);
    out += r.policy + "," + r.group + "," + std::to_string(r.episodes) + "," + fixed(r.mean) + "," + fixed(r.std) +
           "," + fixed(r.max) + "," + cios + "," + (r.rgain ? format_rgain(*r.rgain) : "") + "\n";
  }
  return out;
}

std::string report_to_json(const EvalReport& report) {
  json runs = json::array();
  for (const auto& r : report.runs) {
    json eps = json::array();
    for (const auto& e : r.episodes) {
      eps.push_back({{"scenario", e.scenario},
                     {"load", e.load},
                     {"velocity", e.velocity},
                     {"seed", e.seed},
                     {"episode", e.episode},
                     {"init_cio", e.init_cio},
                     {"final_cio", e.final_cio},
                     {"rtg", e.rtg}});
    }
    runs.push_back({{"policy", r.policy}, {"episodes", std::move(eps)}});
  }
  json summary = json::array();
  for (const auto& r : report.summarize()) {
    json row = {{"policy", r.policy}, {"group", r.group}, {"episodes", r.episodes}, {"mean", r.mean},
                {"std", r.std},       {"max", r.max},     {"final_cios", r.final_cios}};
    row["rgain_pct"] = r.rgain ? json(*r.rgain) : json(nullptr);
    summary.push_back(std::move(row));
  }
  return json{{"baseline", report.baseline}, {"runs", std::move(runs)}, {"summary", std::move(summary)}}.dump(1);
}

EvalReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.baseline = j.at("baseline").get<std::string>();
    for (const auto& run : j.at("runs")) {
      PolicyRun pr{run.at("policy").get<std::string>(), {}};
      for (const auto& e : run.at("episodes")) {
        pr.episodes.push_back(EpisodeOutcome{e.at("scenario").get<std::string>(), e.at("load").get<double>(),
                                             e.at("velocity").get<double>(), e.at("seed").get<std::uint64_t>(),
                                             e.at("episode").get<int>(), e.at("init_cio").get<int>(),
                                             e.at("final_cio").get<int>(), e.at("rtg").get<double>()});
      }
      r.runs.push_back(std::move(pr));
    }
    return r;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("report: ") + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void report_emit(const EvalReport& report, const std::filesystem::path& dir, std::size_t histogram_bins) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
  write_text(dir / "summary.csv", summary_csv(report));

  std::string eps = "policy,scenario,load,velocity,seed,episode,init_cio,final_cio,rtg\n";
  std::vector<double> all;
  for (const auto& r : report.runs) {
    for (const auto& e : r.episodes) {
      eps += r.policy + "," + e.scenario + "," + short_num(e.load) + "," + short_num(e.velocity) + "," +
             std::to_string(e.seed) + "," + std::to_string(e.episode) + "," + std::to_string(e.init_cio) + "," +
             std::to_string(e.final_cio) + "," + fixed(e.rtg, 6) + "\n";
      all.push_back(e.rtg);
    }
  }
  write_text(dir / "episodes.csv", eps);

  std::string hist = "policy,bin_lo,bin_hi,count\n";
  if (!all.empty()) {
    const auto [lo, hi] = std::minmax_element(all.begin(), all.end());
    for (const auto& r : report.runs) {
      std::vector<double> v;
      for (const auto& e : r.episodes) v.push_back(e.rtg);
      const Histogram h = histogram(v, *lo, *hi, histogram_bins);
      const double width = (h.hi - h.lo) / static_cast<double>(histogram_bins);
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        hist += r.policy + "," + fixed(h.lo + width * static_cast<double>(b)) + "," +
                fixed(h.lo + width * static_cast<double>(b + 1)) + "," + std::to_string(h.counts[b]) + "\n";
      }
    }
  }
  write_text(dir / "rtg_histogram.csv", hist);
  write_text(dir / "report.json", report_to_json(report) + "\n");
}

}  // namespace mrolab::eval
