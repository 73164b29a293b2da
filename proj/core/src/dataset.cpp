#include "mrolab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mrolab {

using nlohmann::json;

StateVector Normalizer::features(const HoCounters& c) const {
  const int n = c.n_all();
  auto rate = [&](int k) { return n > 0 ? static_cast<double>(k) / n : 0.0; };
  return {static_cast<double>(c.cio) / mro::kCioMax,
          rate(c.n_suc),
          rate(c.n_fte),
          rate(c.n_ftl),
          rate(c.n_f),
          rate(c.n_pp),
          rate(c.n_se),
          rate(c.n_sl),
          rate(c.n_stf),
          rate(c.n_wc),
          rate(c.n_rc),
          static_cast<double>(n) / n_all_scale};
}

StateVector Normalizer::apply(const HoCounters& c) const {
  StateVector f = features(c);
  for (std::size_t i = 0; i < kStateDim; ++i) f[i] = (f[i] - mean[i]) / scale[i];
  return f;
}

Normalizer Normalizer::fit(std::span<const Trajectory> trajectories) {
  std::vector<const HoCounters*> states;
  for (const auto& t : trajectories) {
    for (const auto& tr : t.transitions) states.push_back(&tr.state);
    if (!t.transitions.empty()) states.push_back(&t.transitions.back().next_state);
  }
  Normalizer out;
  if (states.empty()) return out;
  double n_sum = 0.0;
  for (const auto* s : states) n_sum += s->n_all();
  out.n_all_scale = std::max(1.0, n_sum / static_cast<double>(states.size()));

  StateVector sum{}, sq{};
  for (const auto* s : states) {
    const auto f = out.features(*s);
    for (std::size_t i = 0; i < kStateDim; ++i) sum[i] += f[i];
  }
  const double count = static_cast<double>(states.size());
  for (std::size_t i = 0; i < kStateDim; ++i) out.mean[i] = sum[i] / count;
  for (const auto* s : states) {
    const auto f = out.features(*s);
    for (std::size_t i = 0; i < kStateDim; ++i) sq[i] += (f[i] - out.mean[i]) * (f[i] - out.mean[i]);
  }
  for (std::size_t i = 0; i < kStateDim; ++i) {
    const double sd = std::sqrt(sq[i] / count);
    out.scale[i] = sd > 1e-8 ? sd : 1.0;
  }
  return out;
}

OfflineDataset::OfflineDataset(std::vector<Trajectory> trajectories, DatasetMeta meta)
    : trajectories_(std::move(trajectories)), meta_(std::move(meta)) {
  for (const auto& t : trajectories_) {
    if (static_cast<int>(t.transitions.size()) != meta_.horizon || t.rtg.size() != t.transitions.size()) {
      throw std::invalid_argument("OfflineDataset: trajectory length differs from horizon " +
                                  std::to_string(meta_.horizon));
    }
    for (const auto& x : t.transitions) {
      if (x.action < -1 || x.action > 1 || x.next_state.cio != mro::clip_cio(x.state.cio + x.action)) {
        throw std::invalid_argument("OfflineDataset: transition violates the CIO clip rule in " + t.scenario);
      }
    }
  }
  normalizer_ = Normalizer::fit(trajectories_);
}

double OfflineDataset::max_rtg() const {
  if (trajectories_.empty()) throw std::logic_error("OfflineDataset: max_rtg of an empty dataset");
  double m = trajectories_.front().total();
  for (const auto& t : trajectories_) m = std::max(m, t.total());
  return m;
}

OfflineDataset generate_dataset(const GenerationConfig& cfg) {
  if (cfg.horizon < 1) throw std::invalid_argument("generate_dataset: horizon must be >= 1");
  if (cfg.episodes_per_cell < 1) throw std::invalid_argument("generate_dataset: episodes_per_cell must be >= 1");
  if (cfg.scenarios.empty() || cfg.policies.empty()) {
    throw std::invalid_argument("generate_dataset: need at least one scenario and one policy");
  }
  const std::size_t n_pol = cfg.policies.size();
  const std::size_t n_ep = static_cast<std::size_t>(cfg.episodes_per_cell);
  std::vector<Trajectory> out(cfg.scenarios.size() * n_pol * n_ep);
  parallel_for(out.size(), cfg.threads, [&](std::size_t i) {
    const auto& scenario = cfg.scenarios[i / (n_pol * n_ep)];
    const BehaviorKind kind = cfg.policies[(i / n_ep) % n_pol];
    const int episode = static_cast<int>(i % n_ep);
    const EpisodeSeeds seeds = episode_seeds(cfg.base_seed, scenario, episode);
    try {
      CioEnvironment env(cfg.radio, scenario, cfg.reward, seeds.world_stream);
      auto policy = make_behavior_policy(kind, cfg.reward.weights, cfg.thresholds);
      out[i] = run_episode(env, *policy, seeds.init_cio, cfg.horizon, seeds.policy_seed, scenario.id());
    } catch (const std::exception& e) {
      throw std::runtime_error("scenario " + scenario.id() + ", policy " + to_string(kind) + ", episode " +
                               std::to_string(episode) + ": " + e.what());
    }
  });
  DatasetMeta meta;
  meta.config_hash = cfg.config_hash;
  meta.horizon = cfg.horizon;
  meta.base_seed = cfg.base_seed;
  meta.reward_variant = reward::to_string(cfg.reward.variant);
  return OfflineDataset(std::move(out), meta);
}

OfflineDataset filter_dataset(const OfflineDataset& d, double rtg_threshold, bool require_zero_failures) {
  std::vector<Trajectory> kept;
  for (const auto& t : d.trajectories()) {
    const bool high = t.total() >= rtg_threshold;
    const bool drop = high && (!require_zero_failures || t.failure_count() == 0);
    if (!drop) kept.push_back(t);
  }
  if (kept.empty()) {
    std::ostringstream os;
    os << "filter removed all " << d.size() << " trajectories (threshold " << rtg_threshold << ")";
    throw OverFilterError(os.str());
  }
  return OfflineDataset(std::move(kept), d.meta());
}

OfflineDataset relabel_rewards(const OfflineDataset& d, const reward::RewardConfig& cfg) {
  cfg.validate();
  std::vector<Trajectory> out = d.trajectories();
  for (auto& t : out) {
    std::vector<double> rewards;
    for (auto& tr : t.transitions) {
      const auto r = reward::reward(tr.next_state, cfg);
      tr.reward = r.value;
      tr.empty_window = r.empty_window;
      rewards.push_back(r.value);
    }
    t.rtg = reward::rtg(rewards);
  }
  DatasetMeta meta = d.meta();
  meta.reward_variant = reward::to_string(cfg.variant);
  return OfflineDataset(std::move(out), meta);
}

// ---------------------------------------------------------------------------
// JSON lines

namespace {

json counters_json(const HoCounters& c) {
  return json::array({c.cio, c.n_suc, c.n_fte, c.n_ftl, c.n_f, c.n_pp, c.n_se, c.n_sl, c.n_stf, c.n_wc, c.n_rc});
}

HoCounters counters_from(const json& j) {
  if (!j.is_array() || j.size() != events::kFeatureCount) {
    throw std::runtime_error("dataset: state must be an array of 11 integers");
  }
  std::array<int, 11> v{};
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = j.at(i).get<int>();
  return HoCounters{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
}

}  // namespace

std::string dataset_to_jsonl(const OfflineDataset& d) {
  const auto& norm = d.normalizer();
  json meta = {{"type", "metadata"},
               {"version", d.meta().version},
               {"config_hash", d.meta().config_hash},
               {"T", d.meta().horizon},
               {"base_seed", d.meta().base_seed},
               {"reward_variant", d.meta().reward_variant},
               {"trajectories", d.size()},
               {"normalization",
                {{"n_all_scale", norm.n_all_scale},
                 {"mean", std::vector<double>(norm.mean.begin(), norm.mean.end())},
                 {"scale", std::vector<double>(norm.scale.begin(), norm.scale.end())}}}};
  std::string out = meta.dump() + "\n";
  for (const auto& t : d.trajectories()) {
    json tr = json::array();
    for (const auto& x : t.transitions) {
      tr.push_back({{"state", counters_json(x.state)},
                    {"action", x.action},
                    {"reward", x.reward},
                    {"next_state", counters_json(x.next_state)},
                    {"empty_window", x.empty_window},
                    {"terminal", x.terminal}});
    }
    json rec = {{"type", "trajectory"},
                {"scenario", t.scenario},
                {"policy", t.policy},
                {"init_cio", t.init_cio},
                {"transitions", std::move(tr)},
                {"rtg", t.rtg}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

OfflineDataset dataset_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  DatasetMeta meta;
  bool have_meta = false;
  std::size_t expected = 0;
  std::vector<Trajectory> trajectories;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "metadata") {
        if (have_meta) throw std::runtime_error("duplicate metadata record");
        meta.version = j.at("version").get<int>();
        if (meta.version != 1) throw std::runtime_error("unsupported version " + std::to_string(meta.version));
        meta.config_hash = j.at("config_hash").get<std::string>();
        meta.horizon = j.at("T").get<int>();
        meta.base_seed = j.at("base_seed").get<std::uint64_t>();
        meta.reward_variant = j.value("reward_variant", std::string("plain"));
        expected = j.at("trajectories").get<std::size_t>();
        have_meta = true;
      } else if (type == "trajectory") {
        if (!have_meta) throw std::runtime_error("trajectory before metadata record");
        Trajectory t;
        t.scenario = j.at("scenario").get<std::string>();
        t.policy = j.at("policy").get<std::string>();
        t.init_cio = j.at("init_cio").get<int>();
        for (const auto& x : j.at("transitions")) {
          t.transitions.push_back(Transition{counters_from(x.at("state")), x.at("action").get<int>(),
                                             x.at("reward").get<double>(), counters_from(x.at("next_state")),
                                             x.at("empty_window").get<bool>(), x.at("terminal").get<bool>()});
        }
        t.rtg = j.at("rtg").get<std::vector<double>>();
        trajectories.push_back(std::move(t));
      } else {
        throw std::runtime_error("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_meta) throw std::runtime_error("dataset: missing metadata record");
  if (trajectories.size() != expected) {
    throw std::runtime_error("dataset: metadata announces " + std::to_string(expected) + " trajectories, found " +
                             std::to_string(trajectories.size()));
  }
  return OfflineDataset(std::move(trajectories), meta);
}

void save_dataset(const std::filesystem::path& path, const OfflineDataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  out << dataset_to_jsonl(d);
  if (!out) throw std::runtime_error("failed writing dataset " + path.string());
}

OfflineDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read dataset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return dataset_from_jsonl(ss.str());
}

}  // namespace mrolab
