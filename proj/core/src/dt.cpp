#include "mrolab/dt.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mrolab/cql.hpp"

namespace mrolab::dt {

using tensor::Tensor;

void DtConfig::validate() const {
  if (d_model == 0 || blocks == 0 || heads == 0 || d_model % heads != 0) {
    throw std::invalid_argument("DtConfig: d_model must be a positive multiple of heads");
  }
  if (context_k == 0) throw std::invalid_argument("DtConfig: context_k must be >= 1");
  if (max_timestep == 0) throw std::invalid_argument("DtConfig: max_timestep must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("DtConfig: learning_rate must be > 0");
  if (batch_size == 0) throw std::invalid_argument("DtConfig: batch_size must be >= 1");
}

DtConfig DtConfig::from_config(const KeyValueConfig& cfg) {
  DtConfig c;
  auto get = [&](const char* key, std::size_t v) {
    return static_cast<std::size_t>(cfg.get_int(std::string("dt.") + key, static_cast<long>(v)));
  };
  c.d_model = get("d_model", c.d_model);
  c.blocks = get("blocks", c.blocks);
  c.heads = get("heads", c.heads);
  c.context_k = get("context_k", c.context_k);
  c.max_timestep = get("max_timestep", c.max_timestep);
  c.learning_rate = cfg.get_double("dt.learning_rate", c.learning_rate);
  c.batch_size = get("batch_size", c.batch_size);
  c.steps = get("steps", c.steps);
  c.grad_clip = cfg.get_double("dt.grad_clip", c.grad_clip);
  c.seed = static_cast<std::uint64_t>(cfg.get_int("dt.seed", static_cast<long>(c.seed)));
  c.validate();
  return c;
}

DtModel DtModel::create(std::size_t state_dim, double rtg_scale, const DtConfig& config, Rng& rng) {
  config.validate();
  if (!(rtg_scale > 0) || !std::isfinite(rtg_scale)) throw std::invalid_argument("DtModel: rtg_scale must be > 0");
  DtModel m;
  m.config = config;
  m.state_dim = state_dim;
  m.rtg_scale = rtg_scale;
  const std::size_t d = config.d_model;
  auto& p = m.params;
  nn::Dense::create(p, "embed.rtg", 1, d, rng);
  nn::Dense::create(p, "embed.state", state_dim, d, rng);
  nn::Dense::create(p, "embed.action", kActionCount, d, rng);
  p.add("embed.time", nn::normal_init({config.max_timestep, d}, 0.02, rng));
  nn::LayerNorm::create(p, "embed.ln", d);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    const std::string n = "block" + std::to_string(b);
    nn::LayerNorm::create(p, n + ".ln1", d);
    nn::Dense::create(p, n + ".q", d, d, rng);
    nn::Dense::create(p, n + ".k", d, d, rng);
    nn::Dense::create(p, n + ".v", d, d, rng);
    nn::Dense::create(p, n + ".proj", d, d, rng);
    nn::LayerNorm::create(p, n + ".ln2", d);
    nn::Dense::create(p, n + ".fc1", d, 4 * d, rng);
    nn::Dense::create(p, n + ".fc2", 4 * d, d, rng);
  }
  nn::LayerNorm::create(p, "final.ln", d);
  nn::Dense::create(p, "head", d, kActionCount, rng);
  return m;
}

Tensor dt_forward(const DtModel& model, std::span<const DtContext> batch) {
  if (batch.empty()) throw std::invalid_argument("dt_forward: empty batch");
  const std::size_t len = batch.front().size();
  if (len == 0) throw std::invalid_argument("dt_forward: empty context");
  if (len > model.config.context_k) {
    throw std::invalid_argument("dt_forward: context of " + std::to_string(len) + " steps exceeds K = " +
                                std::to_string(model.config.context_k));
  }
  const std::size_t rows = batch.size() * len;
  const std::size_t sd = model.state_dim;
  std::vector<double> r(rows), s(rows * sd), a(rows * kActionCount, 0.0);
  std::vector<std::size_t> ts(rows);
  std::size_t i = 0;
  for (const auto& ctx : batch) {
    if (ctx.size() != len) throw std::invalid_argument("dt_forward: contexts in a batch must share one length");
    for (const auto& step : ctx) {
      if (step.state.size() != sd) throw tensor::ShapeError("dt_forward: state has wrong dimension");
      r[i] = step.rtg / model.rtg_scale;
      std::copy(step.state.begin(), step.state.end(), s.begin() + static_cast<std::ptrdiff_t>(i * sd));
      if (step.action) {
        if (*step.action >= kActionCount) throw std::invalid_argument("dt_forward: action index out of range");
        a[i * kActionCount + *step.action] = 1.0;
      }
      ts[i] = std::min(step.timestep, model.config.max_timestep - 1);
      ++i;
    }
  }
  const auto& p = model.params;
  const Tensor time = tensor::embedding(p.get("embed.time"), ts);
  const Tensor er = tensor::add(nn::Dense::bind(p, "embed.rtg")(Tensor::from({rows, 1}, std::move(r))), time);
  const Tensor es = tensor::add(nn::Dense::bind(p, "embed.state")(Tensor::from({rows, sd}, std::move(s))), time);
  const Tensor ea =
      tensor::add(nn::Dense::bind(p, "embed.action")(Tensor::from({rows, kActionCount}, std::move(a))), time);
  const std::array<Tensor, 3> parts{er, es, ea};
  Tensor x = nn::LayerNorm::bind(p, "embed.ln")(tensor::interleave_rows(parts));

  const std::size_t seq = 3 * len;
  for (std::size_t b = 0; b < model.config.blocks; ++b) {
    const std::string n = "block" + std::to_string(b);
    const Tensor h = nn::LayerNorm::bind(p, n + ".ln1")(x);
    const Tensor att = tensor::causal_attention(nn::Dense::bind(p, n + ".q")(h), nn::Dense::bind(p, n + ".k")(h),
                                                nn::Dense::bind(p, n + ".v")(h), seq, model.config.heads);
    x = tensor::add(x, nn::Dense::bind(p, n + ".proj")(att));
    const Tensor h2 = nn::LayerNorm::bind(p, n + ".ln2")(x);
    x = tensor::add(x, nn::Dense::bind(p, n + ".fc2")(tensor::gelu(nn::Dense::bind(p, n + ".fc1")(h2))));
  }
  x = nn::LayerNorm::bind(p, "final.ln")(x);
  std::vector<std::size_t> state_rows(rows);
  for (std::size_t k = 0; k < rows; ++k) state_rows[k] = 3 * k + 1;
  return nn::Dense::bind(p, "head")(tensor::select_rows(x, state_rows));
}

std::vector<Episode> episodes_from_dataset(const OfflineDataset& d) {
  const auto& norm = d.normalizer();
  std::vector<Episode> out;
  for (const auto& t : d.trajectories()) {
    Episode e;
    for (const auto& tr : t.transitions) {
      const auto s = norm.apply(tr.state);
      e.states.emplace_back(s.begin(), s.end());
      e.actions.push_back(action_index(tr.action));
    }
    e.rtg = t.rtg;
    out.push_back(std::move(e));
  }
  return out;
}

TrainResult train_dt(std::span<const Episode> episodes, std::size_t state_dim, double rtg_scale,
                     const DtConfig& config) {
  if (episodes.empty()) throw std::invalid_argument("train_dt: empty dataset");
  config.validate();
  const std::size_t k = config.context_k;
  for (const auto& e : episodes) {
    if (e.states.size() != e.actions.size() || e.rtg.size() != e.actions.size()) {
      throw std::invalid_argument("train_dt: episode arrays differ in length");
    }
    if (e.actions.size() < k) {
      throw std::invalid_argument("train_dt: K = " + std::to_string(k) + " exceeds trajectory length " +
                                  std::to_string(e.actions.size()));
    }
  }
  Rng rng = make_rng(config.seed, {0xD7ULL});
  TrainResult result{DtModel::create(state_dim, rtg_scale, config, rng), {}};
  auto& model = result.model;
  std::uniform_int_distribution<std::size_t> pick(0, episodes.size() - 1);
  std::vector<DtContext> batch(config.batch_size);
  std::vector<std::size_t> targets(config.batch_size * k);
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Episode& e = episodes[pick(rng)];
      const std::size_t start = std::uniform_int_distribution<std::size_t>(0, e.actions.size() - k)(rng);
      auto& ctx = batch[b];
      ctx.resize(k);
      for (std::size_t j = 0; j < k; ++j) {
        ctx[j] = DtStep{e.rtg[start + j], e.states[start + j], e.actions[start + j], start + j};
        targets[b * k + j] = e.actions[start + j];
      }
    }
    const Tensor loss = tensor::cross_entropy(dt_forward(model, batch), targets);
    if (!std::isfinite(loss.item())) throw std::runtime_error("train_dt: non-finite loss at step " + std::to_string(step));
    loss.backward();
    if (config.grad_clip > 0) nn::clip_grad_norm(model.params, config.grad_clip);
    nn::adam_step(model.params, config.learning_rate, 0.9, 0.999, 1e-8);
    result.loss_curve.push_back(loss.item());
  }
  return result;
}

TrainResult train_dt(const OfflineDataset& d, const DtConfig& config) {
  if (d.empty()) throw std::invalid_argument("train_dt: empty dataset");
  DtConfig c = config;
  c.max_timestep = std::max<std::size_t>(c.max_timestep, static_cast<std::size_t>(d.meta().horizon));
  const auto episodes = episodes_from_dataset(d);
  auto result = train_dt(episodes, kStateDim, std::max(d.max_rtg(), 1e-9), c);
  result.model.normalizer = d.normalizer();
  return result;
}

DtPolicy::DtPolicy(std::shared_ptr<const DtModel> model, double target_rtg, std::string name)
    : model_(std::move(model)), target_(target_rtg), name_(std::move(name)) {
  if (!std::isfinite(target_rtg)) throw std::invalid_argument("DtPolicy: target RtG must be finite");
}

void DtPolicy::begin_episode(std::uint64_t) {
  current_ = target_;
  t_ = 0;
  history_.clear();
  rtg_inputs_.clear();
}

int DtPolicy::act(const HoCounters& state) {
  const auto s = model_->normalizer.apply(state);
  history_.push_back(DtStep{current_, std::vector<double>(s.begin(), s.end()), std::nullopt, t_});
  rtg_inputs_.push_back(current_);
  const std::size_t k = model_->config.context_k;
  const std::size_t from = history_.size() > k ? history_.size() - k : 0;
  const DtContext ctx(history_.begin() + static_cast<std::ptrdiff_t>(from), history_.end());
  const Tensor logits = dt_forward(*model_, std::span<const DtContext>(&ctx, 1));
  const auto v = logits.values();
  const std::size_t last = (ctx.size() - 1) * kActionCount;
  return mro::clip_action(state.cio, cql::greedy_action({v[last], v[last + 1], v[last + 2]}));
}

void DtPolicy::observe(int applied_action, double reward, const HoCounters&) {
  if (history_.empty()) throw std::logic_error("DtPolicy: observe() before act()");
  history_.back().action = action_index(applied_action);
  current_ -= reward;
  ++t_;
  // Only the last K steps are ever read.
  if (history_.size() > model_->config.context_k) history_.erase(history_.begin());
}

Trajectory dt_rollout(std::shared_ptr<const DtModel> model, Environment& env, double target_rtg, int init_cio,
                      int horizon, const std::string& scenario_id) {
  DtPolicy policy(std::move(model), target_rtg);
  return run_episode(env, policy, init_cio, horizon, 0, scenario_id);
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Checkpoint to_checkpoint(const DtModel& model) {
  Checkpoint c;
  c.kind = "dt";
  const auto& k = model.config;
  c.config = {{"d_model", std::to_string(k.d_model)},
              {"blocks", std::to_string(k.blocks)},
              {"heads", std::to_string(k.heads)},
              {"context_k", std::to_string(k.context_k)},
              {"max_timestep", std::to_string(k.max_timestep)},
              {"learning_rate", num(k.learning_rate)},
              {"batch_size", std::to_string(k.batch_size)},
              {"steps", std::to_string(k.steps)},
              {"grad_clip", num(k.grad_clip)},
              {"seed", std::to_string(k.seed)},
              {"state_dim", std::to_string(model.state_dim)}};
  c.arrays["rtg_scale"] = {model.rtg_scale};
  c.arrays["normalizer.n_all_scale"] = {model.normalizer.n_all_scale};
  c.arrays["normalizer.mean"] = std::vector<double>(model.normalizer.mean.begin(), model.normalizer.mean.end());
  c.arrays["normalizer.scale"] = std::vector<double>(model.normalizer.scale.begin(), model.normalizer.scale.end());
  c.params = model.params.clone();
  return c;
}

DtModel from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "dt") throw std::runtime_error("checkpoint holds a '" + ckpt.kind + "' model, expected 'dt'");
  KeyValueConfig kv;
  for (const auto& [key, v] : ckpt.config) kv.set("dt." + key, v);
  DtModel m;
  m.config = DtConfig::from_config(kv);
  m.state_dim = static_cast<std::size_t>(kv.get_int("dt.state_dim", static_cast<long>(kStateDim)));
  m.rtg_scale = ckpt.arrays.at("rtg_scale").at(0);
  m.params = ckpt.params.clone();
  const auto& mean = ckpt.arrays.at("normalizer.mean");
  const auto& scale = ckpt.arrays.at("normalizer.scale");
  if (mean.size() != kStateDim || scale.size() != kStateDim) throw std::runtime_error("checkpoint: bad normalizer");
  m.normalizer.n_all_scale = ckpt.arrays.at("normalizer.n_all_scale").at(0);
  std::copy(mean.begin(), mean.end(), m.normalizer.mean.begin());
  std::copy(scale.begin(), scale.end(), m.normalizer.scale.begin());
  if (!m.params.contains("head.weight")) throw std::runtime_error("checkpoint: missing parameter head.weight");
  return m;
}

}  // namespace mrolab::dt
