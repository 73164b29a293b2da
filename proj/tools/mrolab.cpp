// mrolab command-line entry point.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mrolab/checkpoint.hpp"
#include "mrolab/config.hpp"
#include "mrolab/cql.hpp"
#include "mrolab/dataset.hpp"
#include "mrolab/dt.hpp"
#include "mrolab/eval.hpp"

namespace fs = std::filesystem;
using namespace mrolab;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string dataset;
  std::vector<std::string> checkpoints;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> filter_rtg;
  std::optional<std::size_t> context_k;
  std::optional<double> cql_alpha;
  std::optional<double> target_rtg;
  std::string grid = "train";
};

struct Setup {
  KeyValueConfig cfg;
  radio::RadioConfig radio;
  radio::ScenarioConfig scenario;
  reward::RewardConfig reward;
  mro::MroThresholds thresholds;
  unsigned threads = 0;
};

Setup load_setup(const Options& o) {
  Setup s;
  if (!o.config.empty()) s.cfg = KeyValueConfig::load(o.config);
  s.radio = radio::RadioConfig::from_config(s.cfg);
  s.scenario = radio::ScenarioConfig::from_config(s.cfg);
  s.reward = reward::RewardConfig::from_config(s.cfg);
  s.thresholds.tau_events = static_cast<int>(s.cfg.get_int("mro.tau_events", s.thresholds.tau_events));
  s.thresholds.tau_early = s.cfg.get_double("mro.tau_early", s.thresholds.tau_early);
  s.thresholds.tau_late = s.cfg.get_double("mro.tau_late", s.thresholds.tau_late);
  s.thresholds.validate();
  if (auto w = s.reward.weights.ordering_warning()) std::cerr << "warning: " << *w << "\n";
  s.threads = static_cast<unsigned>(s.cfg.get_int("run.threads", 0));
  return s;
}

eval::ScenarioGrid grid_for(const Setup& s, const std::string& name) {
  if (name == "train") return eval::ScenarioGrid::from_config(s.cfg, "grid.train", eval::ScenarioGrid::train());
  if (name == "validation") {
    return eval::ScenarioGrid::from_config(s.cfg, "grid.validation", eval::ScenarioGrid::validation());
  }
  throw UsageError("--grid must be 'train' or 'validation'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
}

std::string curve_csv(const std::vector<double>& values, const char* column) {
  std::string out = std::string("step,") + column + "\n";
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i, values[i]);
    out += buf;
  }
  return out;
}

OfflineDataset training_data(const Setup& s, const Options& o) {
  if (o.dataset.empty()) throw UsageError("--dataset is required");
  OfflineDataset d = relabel_rewards(load_dataset(o.dataset), s.reward);
  const bool zero_failures = s.cfg.get_bool("dataset.filter_zero_failures", true);
  std::optional<double> threshold = o.filter_rtg;
  if (!threshold && s.cfg.has("dataset.filter_rtg")) threshold = s.cfg.get_double("dataset.filter_rtg", 0.0);
  if (threshold) {
    const std::size_t before = d.size();
    d = filter_dataset(d, *threshold, zero_failures);
    std::cerr << "filter: kept " << d.size() << " of " << before << " trajectories\n";
  }
  return d;
}

int cmd_gen_data(const Options& o) {
  const Setup s = load_setup(o);
  GenerationConfig g;
  g.radio = s.radio;
  g.reward = s.reward;
  g.thresholds = s.thresholds;
  g.scenarios = grid_for(s, o.grid).expand(s.scenario);
  g.episodes_per_cell = static_cast<int>(s.cfg.get_int("dataset.episodes_per_cell", 4));
  g.horizon = s.scenario.horizon;
  g.base_seed = o.seed.value_or(static_cast<std::uint64_t>(s.cfg.get_int("dataset.seed", 0)));
  g.threads = s.threads;
  g.config_hash = fnv1a_hex(s.cfg.canonical());
  const auto d = generate_dataset(g);
  ensure_dir(o.out);
  save_dataset(fs::path(o.out) / "dataset.jsonl", d);
  std::cout << "wrote " << d.size() << " trajectories (T=" << g.horizon << ", max RtG " << d.max_rtg() << ") to "
            << (fs::path(o.out) / "dataset.jsonl").string() << "\n";
  return 0;
}

int cmd_train_cql(const Options& o) {
  const Setup s = load_setup(o);
  auto c = cql::CqlConfig::from_config(s.cfg);
  if (o.cql_alpha) c.alpha = *o.cql_alpha;
  if (o.seed) c.seed = *o.seed;
  c.validate();
  const OfflineDataset d = training_data(s, o);
  const auto result = cql::train_cql(d, c);
  ensure_dir(o.out);
  save_checkpoint(fs::path(o.out) / "cql.ckpt.json", cql::to_checkpoint(result.model));
  eval::write_text(fs::path(o.out) / "cql_loss.csv", curve_csv(result.loss_curve, "loss"));
  std::cout << "trained CQL (alpha " << c.alpha << ", " << c.steps << " steps, final loss "
            << result.loss_curve.back() << ")\n";
  return 0;
}

int cmd_train_dt(const Options& o) {
  const Setup s = load_setup(o);
  auto c = dt::DtConfig::from_config(s.cfg);
  if (o.context_k) c.context_k = *o.context_k;
  if (o.seed) c.seed = *o.seed;
  c.validate();
  const OfflineDataset d = training_data(s, o);
  if (c.context_k > static_cast<std::size_t>(d.meta().horizon)) {
    throw UsageError("--context-k exceeds the trajectory length " + std::to_string(d.meta().horizon));
  }
  const auto result = dt::train_dt(d, c);
  ensure_dir(o.out);
  save_checkpoint(fs::path(o.out) / "dt.ckpt.json", dt::to_checkpoint(result.model));
  eval::write_text(fs::path(o.out) / "dt_loss.csv", curve_csv(result.loss_curve, "loss"));
  std::cout << "trained DT (K " << c.context_k << ", " << c.steps << " steps, final loss " << result.loss_curve.back()
            << ")\n";
  return 0;
}

// Policies named by checkpoint file stem, e.g. runs/cql_a1/cql.ckpt.json -> "CQL[cql_a1]".
std::vector<eval::NamedPolicy> checkpoint_policies(const Setup& s, const Options& o) {
  std::vector<eval::NamedPolicy> out;
  const double multiplier = s.cfg.get_double("eval.target_multiplier", 1.0);
  for (const auto& path : o.checkpoints) {
    if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
    const Checkpoint ckpt = load_checkpoint(path);
    const std::string tag = fs::path(path).parent_path().filename().string();
    if (ckpt.kind == "cql") {
      auto model = std::make_shared<const cql::QModel>(cql::from_checkpoint(ckpt));
      const std::string name = "CQL[" + tag + "]";
      out.push_back({name, [model, name] { return cql::make_cql_policy(model, name); }});
    } else if (ckpt.kind == "dt") {
      auto model = std::make_shared<const dt::DtModel>(dt::from_checkpoint(ckpt));
      const double target = o.target_rtg.value_or(model->rtg_scale * multiplier);
      const std::string name = "DT[" + tag + "]";
      out.push_back({name, [model, target, name] { return std::make_unique<dt::DtPolicy>(model, target, name); }});
    } else {
      throw std::runtime_error("unknown checkpoint kind '" + ckpt.kind + "' in " + path);
    }
  }
  return out;
}

eval::EvalSpec eval_spec(const Setup& s, const Options& o) {
  eval::EvalSpec spec;
  spec.radio = s.radio;
  spec.reward = s.reward;
  spec.scenarios = grid_for(s, o.grid).expand(s.scenario);
  spec.episodes = static_cast<int>(s.cfg.get_int("eval.episodes_per_cell", 4));
  spec.horizon = s.scenario.horizon;
  spec.base_seed = o.seed.value_or(static_cast<std::uint64_t>(s.cfg.get_int("eval.seed", 1000)));
  spec.threads = s.threads;
  return spec;
}

int cmd_eval(const Options& o) {
  const Setup s = load_setup(o);
  auto policies = checkpoint_policies(s, o);
  if (s.cfg.get_bool("eval.include_behavior", false)) {
    for (auto kind : {BehaviorKind::kRnd, BehaviorKind::kUp, BehaviorKind::kDown}) {
      policies.push_back({to_string(kind), [kind] { return make_behavior_policy(kind); }});
    }
  }
  const auto report = eval::evaluate(eval_spec(s, o), policies);
  eval::report_emit(report, o.out);
  std::cout << eval::summary_csv(report);
  return 0;
}

int cmd_sweep_cio(const Options& o, bool whole_grid) {
  const Setup s = load_setup(o);
  auto policies = checkpoint_policies(s, o);
  const auto weights = s.reward.weights;
  const auto th = s.thresholds;
  policies.insert(policies.begin(), {"MRO", [weights, th] { return make_behavior_policy(BehaviorKind::kMro, weights, th); }});
  const auto spec = eval_spec(s, o);
  ensure_dir(o.out);
  const auto scenarios = whole_grid ? grid_for(s, o.grid).expand(s.scenario) : std::vector{s.scenario};
  std::string csv = "policy,scenario,init_cio,final_cio,path\n";
  for (const auto& p : policies) {
    for (const auto& scenario : scenarios) {
      const auto sweep = eval::converged_cio_sweep(spec, p, scenario);
      for (const auto& path : sweep.paths) {
        std::string steps;
        for (std::size_t i = 0; i < path.size(); ++i) steps += (i ? ";" : "") + std::to_string(path[i]);
        csv += p.name + "," + sweep.scenario + "," + std::to_string(path.front()) + "," + std::to_string(path.back()) +
               "," + steps + "\n";
      }
      std::cout << p.name << " " << sweep.scenario << ": mode " << sweep.mode() << ", spread " << sweep.spread()
                << " dB\n";
    }
  }
  eval::write_text(fs::path(o.out) / "cio_sweep.csv", csv);
  return 0;
}

int cmd_baseline_curves(const Options& o) {
  const Setup s = load_setup(o);
  std::vector<std::uint64_t> seeds;
  for (double v : s.cfg.get_doubles("curves.seeds", {1, 2, 3, 4})) seeds.push_back(static_cast<std::uint64_t>(v));
  if (o.seed) seeds = {*o.seed};
  const int windows = static_cast<int>(s.cfg.get_int("curves.windows", 20));
  const auto curve = eval::baseline_curves(s.radio, s.reward, s.scenario, seeds, windows, s.threads);
  ensure_dir(o.out);
  std::string csv = "cio,early_sum,late_sum,n_all,cost,windows\n";
  std::vector<double> cio, early, late;
  char buf[160];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.4f,%.6f,%zu\n", p.cio, p.early, p.late, p.n_all, p.cost, p.windows);
    csv += buf;
    cio.push_back(p.cio);
    early.push_back(p.early);
    late.push_back(p.late);
  }
  eval::write_text(fs::path(o.out) / "curves.csv", csv);
  std::cout << csv;
  std::cout << "spearman(E_sum, cio) " << eval::spearman(cio, early) << ", spearman(L_sum, cio) "
            << eval::spearman(cio, late) << ", crossing " << (eval::curves_cross(curve) ? "yes" : "no") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mrolab: mobility robustness optimization laboratory"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Key-value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Base seed (overrides the configuration)");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate an offline dataset with the behavior policies");
  common(gen);
  gen->add_option("--grid", o.grid, "Scenario grid: train or validation");

  auto* tcql = app.add_subcommand("train-cql", "Train a discrete CQL agent");
  common(tcql);
  tcql->add_option("--dataset", o.dataset, "Dataset file")->required();
  tcql->add_option("--filter-rtg", o.filter_rtg, "Drop high-RtG trajectories at or above this value");
  tcql->add_option("--cql-alpha", o.cql_alpha, "Weight of the conservative penalty")->check(CLI::NonNegativeNumber);

  auto* tdt = app.add_subcommand("train-dt", "Train a Decision Transformer");
  common(tdt);
  tdt->add_option("--dataset", o.dataset, "Dataset file")->required();
  tdt->add_option("--filter-rtg", o.filter_rtg, "Drop high-RtG trajectories at or above this value");
  tdt->add_option("--context-k", o.context_k, "Context size K")->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("eval", "Evaluate checkpoints against the rule-based baseline");
  common(ev);
  ev->add_option("--checkpoint", o.checkpoints, "Model checkpoint (repeatable)");
  ev->add_option("--target-rtg", o.target_rtg, "Target RtG for DT rollouts");
  ev->add_option("--grid", o.grid, "Scenario grid: train or validation");

  auto* sweep = app.add_subcommand("sweep-cio", "Converged CIO for every initial CIO");
  common(sweep);
  sweep->add_option("--checkpoint", o.checkpoints, "Model checkpoint (repeatable)");
  sweep->add_option("--target-rtg", o.target_rtg, "Target RtG for DT rollouts");
  auto* sweep_grid = sweep->add_option("--grid", o.grid, "Sweep every scenario of this grid instead of the default one");

  auto* curves = app.add_subcommand("baseline-curves", "Early/late issue sums over the CIO range");
  common(curves);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o);
    if (tcql->parsed()) return cmd_train_cql(o);
    if (tdt->parsed()) return cmd_train_dt(o);
    if (ev->parsed()) return cmd_eval(o);
    if (sweep->parsed()) return cmd_sweep_cio(o, sweep_grid->count() > 0);
    if (curves->parsed()) return cmd_baseline_curves(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
