#include "mrolab/cql.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mrolab::cql {

using tensor::Tensor;

void CqlConfig::validate() const {
  if (hidden == 0 || batch_size == 0 || target_sync == 0) {
    throw std::invalid_argument("CqlConfig: hidden, batch_size and target_sync must be positive");
  }
  if (!(gamma >= 0 && gamma <= 1)) throw std::invalid_argument("CqlConfig: gamma must lie in [0,1]");
  if (alpha < 0) throw std::invalid_argument("CqlConfig: alpha must be >= 0");
  if (!(learning_rate > 0)) throw std::invalid_argument("CqlConfig: learning_rate must be > 0");
  if (!(huber_delta > 0)) throw std::invalid_argument("CqlConfig: huber_delta must be > 0");
}

CqlConfig CqlConfig::from_config(const KeyValueConfig& cfg) {
  CqlConfig c;
  c.hidden = static_cast<std::size_t>(cfg.get_int("cql.hidden", static_cast<long>(c.hidden)));
  c.gamma = cfg.get_double("cql.gamma", c.gamma);
  c.alpha = cfg.get_double("cql.alpha", c.alpha);
  c.learning_rate = cfg.get_double("cql.learning_rate", c.learning_rate);
  c.batch_size = static_cast<std::size_t>(cfg.get_int("cql.batch_size", static_cast<long>(c.batch_size)));
  c.steps = static_cast<std::size_t>(cfg.get_int("cql.steps", static_cast<long>(c.steps)));
  c.target_sync = static_cast<std::size_t>(cfg.get_int("cql.target_sync", static_cast<long>(c.target_sync)));
  c.huber_delta = cfg.get_double("cql.huber_delta", c.huber_delta);
  c.grad_clip = cfg.get_double("cql.grad_clip", c.grad_clip);
  c.seed = static_cast<std::uint64_t>(cfg.get_int("cql.seed", static_cast<long>(c.seed)));
  c.validate();
  return c;
}

namespace {

Tensor mlp(const nn::ParamSet& p, const Tensor& x) {
  auto h = tensor::gelu(nn::Dense::bind(p, "q.l0")(x));
  h = tensor::gelu(nn::Dense::bind(p, "q.l1")(h));
  return nn::Dense::bind(p, "q.out")(h);
}

Tensor stack(std::span<const Sample> batch, bool next, std::size_t dim) {
  std::vector<double> v;
  v.reserve(batch.size() * dim);
  for (const auto& s : batch) {
    const auto& x = next ? s.next_state : s.state;
    if (x.size() != dim) throw tensor::ShapeError("cql: state has wrong dimension");
    v.insert(v.end(), x.begin(), x.end());
  }
  return Tensor::from({batch.size(), dim}, std::move(v));
}

}  // namespace

QModel QModel::create(std::size_t input_dim, const CqlConfig& config, Rng& rng) {
  config.validate();
  QModel m;
  m.input_dim = input_dim;
  m.config = config;
  nn::Dense::create(m.online, "q.l0", input_dim, config.hidden, rng);
  nn::Dense::create(m.online, "q.l1", config.hidden, config.hidden, rng);
  nn::Dense::create(m.online, "q.out", config.hidden, kActionCount, rng);
  m.target = m.online.clone();
  return m;
}

Tensor QModel::q_values(const Tensor& states, bool use_target) const {
  return mlp(use_target ? target : online, states);
}

std::array<double, 3> QModel::q(std::span<const double> state) const {
  const auto out = q_values(Tensor::from({1, state.size()}, std::vector<double>(state.begin(), state.end())));
  return {out.values()[0], out.values()[1], out.values()[2]};
}

std::vector<Sample> samples_from_dataset(const OfflineDataset& d) {
  const auto& norm = d.normalizer();
  std::vector<Sample> out;
  for (const auto& t : d.trajectories()) {
    for (const auto& tr : t.transitions) {
      const auto s = norm.apply(tr.state);
      const auto n = norm.apply(tr.next_state);
      out.push_back(Sample{std::vector<double>(s.begin(), s.end()), action_index(tr.action), tr.reward,
                           std::vector<double>(n.begin(), n.end()), tr.terminal});
    }
  }
  return out;
}

LossParts cql_loss(const QModel& model, std::span<const Sample> batch, double alpha) {
  if (batch.empty()) throw std::invalid_argument("cql_loss: empty batch");
  const std::size_t b = batch.size();
  const Tensor next = stack(batch, true, model.input_dim);
  const Tensor next_online = model.q_values(next, false);
  const Tensor next_target = model.q_values(next, true);
  const auto q_next_online = next_online.values();
  const auto q_next_target = next_target.values();
  std::vector<double> y(b);
  std::vector<std::size_t> actions(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& s = batch[i];
    actions[i] = s.action;
    if (s.action >= kActionCount) throw std::invalid_argument("cql_loss: action index out of range");
    double bootstrap = 0.0;
    if (!s.terminal) {
      const std::array<double, 3> qo{q_next_online[3 * i], q_next_online[3 * i + 1], q_next_online[3 * i + 2]};
      const auto a_star = action_index(greedy_action(qo));
      bootstrap = model.config.gamma * q_next_target[3 * i + a_star];
    }
    y[i] = s.reward + bootstrap;
  }

  const Tensor q = model.q_values(stack(batch, false, model.input_dim));
  const Tensor q_data = tensor::gather(q, actions);
  const Tensor td = tensor::huber(q_data, Tensor::from({b}, std::move(y)), model.config.huber_delta);
  const Tensor gap = tensor::mean(tensor::sub(tensor::logsumexp(q), q_data));
  LossParts out;
  out.td = td.item();
  out.penalty = gap.item();
  out.total = alpha == 0.0 ? td : tensor::add(td, tensor::scale(gap, alpha));
  if (!std::isfinite(out.total.item())) {
    std::ostringstream os;
    os << "cql_loss: non-finite loss (td " << out.td << ", penalty " << out.penalty << ")";
    throw TrainingError(os.str());
  }
  return out;
}

TrainResult train_cql(std::span<const Sample> samples, std::size_t input_dim, const CqlConfig& config) {
  if (samples.empty()) throw std::invalid_argument("train_cql: empty dataset");
  config.validate();
  Rng rng = make_rng(config.seed, {0xC01ULL});
  TrainResult result{QModel::create(input_dim, config, rng), {}, {}};
  QModel& model = result.model;
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  std::vector<Sample> batch(std::min(config.batch_size, samples.size()));
  std::size_t bad = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (auto& s : batch) s = samples[pick(rng)];
    const LossParts loss = cql_loss(model, batch, config.alpha);
    loss.total.backward();
    if (config.grad_clip > 0) nn::clip_grad_norm(model.online, config.grad_clip);
    nn::adam_step(model.online, config.learning_rate, 0.9, 0.999, 1e-8);
    if ((step + 1) % config.target_sync == 0) model.sync_target();
    const double value = loss.total.item();
    result.loss_curve.push_back(value);
    result.penalty_curve.push_back(loss.penalty);
    bad = value > config.divergence_threshold ? bad + 1 : 0;
    if (bad >= config.divergence_patience) {
      std::ostringstream os;
      os << "train_cql: loss above " << config.divergence_threshold << " for " << bad << " steps (step " << step
         << ", loss " << value << ", td " << loss.td << ", penalty " << loss.penalty << ")";
      throw TrainingError(os.str());
    }
  }
  return result;
}

TrainResult train_cql(const OfflineDataset& d, const CqlConfig& config) {
  if (d.empty()) throw std::invalid_argument("train_cql: empty dataset");
  const auto samples = samples_from_dataset(d);
  auto result = train_cql(samples, kStateDim, config);
  result.model.normalizer = d.normalizer();
  return result;
}

int greedy_action(const std::array<double, 3>& q) {
  // Preference order on ties: keep (0), then -1, then +1.
  int best = 0;
  for (int a : {-1, 1})
    if (q[action_index(a)] > q[action_index(best)]) best = a;
  return best;
}

int cql_policy(const QModel& model, const HoCounters& state) {
  const auto s = model.normalizer.apply(state);
  return mro::clip_action(state.cio, greedy_action(model.q(s)));
}

namespace {

class CqlPolicy final : public Policy {
 public:
  CqlPolicy(std::shared_ptr<const QModel> model, std::string name) : model_(std::move(model)), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  int act(const HoCounters& state) override { return cql_policy(*model_, state); }

 private:
  std::shared_ptr<const QModel> model_;
  std::string name_;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::unique_ptr<Policy> make_cql_policy(std::shared_ptr<const QModel> model, std::string name) {
  return std::make_unique<CqlPolicy>(std::move(model), std::move(name));
}

Checkpoint to_checkpoint(const QModel& model) {
  Checkpoint c;
  c.kind = "cql";
  const auto& k = model.config;
  c.config = {{"hidden", std::to_string(k.hidden)},       {"gamma", num(k.gamma)},
              {"alpha", num(k.alpha)},                    {"learning_rate", num(k.learning_rate)},
              {"batch_size", std::to_string(k.batch_size)}, {"steps", std::to_string(k.steps)},
              {"target_sync", std::to_string(k.target_sync)}, {"huber_delta", num(k.huber_delta)},
              {"grad_clip", num(k.grad_clip)},            {"seed", std::to_string(k.seed)},
              {"input_dim", std::to_string(model.input_dim)}};
  c.arrays["normalizer.n_all_scale"] = {model.normalizer.n_all_scale};
  c.arrays["normalizer.mean"] = std::vector<double>(model.normalizer.mean.begin(), model.normalizer.mean.end());
  c.arrays["normalizer.scale"] = std::vector<double>(model.normalizer.scale.begin(), model.normalizer.scale.end());
  c.params = model.online.clone();
  return c;
}

QModel from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "cql") throw std::runtime_error("checkpoint holds a '" + ckpt.kind + "' model, expected 'cql'");
  KeyValueConfig kv;
  for (const auto& [k, v] : ckpt.config) kv.set("cql." + k, v);
  QModel m;
  m.config = CqlConfig::from_config(kv);
  m.input_dim = static_cast<std::size_t>(kv.get_int("cql.input_dim", static_cast<long>(kStateDim)));
  m.online = ckpt.params.clone();
  m.target = m.online.clone();
  const auto& mean = ckpt.arrays.at("normalizer.mean");
  const auto& scale = ckpt.arrays.at("normalizer.scale");
  if (mean.size() != kStateDim || scale.size() != kStateDim) throw std::runtime_error("checkpoint: bad normalizer");
  m.normalizer.n_all_scale = ckpt.arrays.at("normalizer.n_all_scale").at(0);
  std::copy(mean.begin(), mean.end(), m.normalizer.mean.begin());
  std::copy(scale.begin(), scale.end(), m.normalizer.scale.begin());
  for (const char* name : {"q.l0.weight", "q.l0.bias", "q.l1.weight", "q.l1.bias", "q.out.weight", "q.out.bias"}) {
    if (!m.online.contains(name)) throw std::runtime_error(std::string("checkpoint: missing parameter ") + name);
  }
  return m;
}

}  // namespace mrolab::cql
