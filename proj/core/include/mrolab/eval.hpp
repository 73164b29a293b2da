#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mrolab/environment.hpp"
#include "mrolab/radio.hpp"
#include "mrolab/reward.hpp"

namespace mrolab::eval {

struct ScenarioGrid {
  std::vector<double> loads;
  std::vector<double> velocities;
  std::vector<std::uint64_t> seeds;

  static ScenarioGrid train();
  static ScenarioGrid validation();
  // Reads <prefix>.loads, <prefix>.velocities and <prefix>.seeds.
  static ScenarioGrid from_config(const KeyValueConfig& cfg, const std::string& prefix, const ScenarioGrid& fallback);
  // load-major, then velocity, then seed.
  std::vector<radio::ScenarioConfig> expand(const radio::ScenarioConfig& base) const;
};

struct EvalSpec {
  radio::RadioConfig radio;
  reward::RewardConfig reward;
  std::vector<radio::ScenarioConfig> scenarios;
  int episodes = 4;
  int horizon = 17;
  std::uint64_t base_seed = 1000;
  unsigned threads = 0;
};

struct NamedPolicy {
  std::string name;
  PolicyFactory factory;
};

struct EpisodeOutcome {
  std::string scenario;
  double load = 0.0;
  double velocity = 0.0;
  std::uint64_t seed = 0;
  int episode = 0;
  int init_cio = 0;
  int final_cio = 0;
  double rtg = 0.0;
  bool operator==(const EpisodeOutcome&) const = default;
};

struct PolicyRun {
  std::string policy;
  std::vector<EpisodeOutcome> episodes;
  bool operator==(const PolicyRun&) const = default;
};

struct SummaryRow {
  std::string policy;
  std::string group;  // "all" or "l<load>_v<velocity>"
  std::size_t episodes = 0;
  double mean = 0.0;
  double std = 0.0;
  double max = 0.0;
  std::vector<int> final_cios;  // distinct final CIOs, ascending
  std::optional<double> rgain;  // percent versus the baseline's same group
};

struct EvalReport {
  std::string baseline = "MRO";
  std::vector<PolicyRun> runs;

  const PolicyRun* find(const std::string& policy) const;
  std::vector<SummaryRow> summarize() const;
  bool operator==(const EvalReport&) const = default;
};

// 100 * (mean_policy - mean_baseline) / mean_baseline.
double rgain(double mean_policy, double mean_baseline);
// One decimal with explicit sign, e.g. "+1.2".
std::string format_rgain(double value);

// Runs every policy on every scenario x episode with paired seeds. The
// rule-based baseline (named "MRO") is added when not supplied.
EvalReport evaluate(const EvalSpec& spec, std::vector<NamedPolicy> policies);

struct CioSweep {
  std::string policy;
  std::string scenario;
  std::vector<std::vector<int>> paths;  // per initial CIO -8..+8: CIO after each step, starting value first
  std::vector<int> finals() const;
  int mode() const;  // most frequent final CIO, smallest on ties
  int spread() const;  // max final - min final
};

CioSweep converged_cio_sweep(const EvalSpec& spec, const NamedPolicy& policy, const radio::ScenarioConfig& scenario);

// Smallest lo such that the last `tail` values of every path lie in
// [lo, lo + width - 1]; empty if no such band exists.
std::optional<int> absorbing_band(const std::vector<std::vector<int>>& paths, std::size_t tail, int width = 3);

struct CurvePoint {
  int cio = 0;
  double early = 0.0;
  double late = 0.0;
  double n_all = 0.0;
  double cost = 0.0;
  std::size_t windows = 0;
};

// Mean E_sum, L_sum and N_ALL per fixed CIO over `windows` windows for each seed.
std::vector<CurvePoint> baseline_curves(const radio::RadioConfig& radio, const reward::RewardConfig& reward,
                                        radio::ScenarioConfig scenario, const std::vector<std::uint64_t>& seeds,
                                        int windows, unsigned threads = 0);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);
// True when early - late changes sign (or touches zero) between the ends.
bool curves_cross(const std::vector<CurvePoint>& curve);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;
};
Histogram histogram(const std::vector<double>& values, double lo, double hi, std::size_t bins);

// summary.csv, episodes.csv, rtg_histogram.csv and report.json under `dir`.
void report_emit(const EvalReport& report, const std::filesystem::path& dir, std::size_t histogram_bins = 20);
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string summary_csv(const EvalReport& report);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mrolab::eval
