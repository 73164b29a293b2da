#include "mrolab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mrolab::nn {

Tensor ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("ParamSet: duplicate parameter '" + name + "'");
  auto t = Tensor::from(value.shape(), std::vector<double>(value.values().begin(), value.values().end()), true);
  const std::size_t n = t.size();
  entries_.push_back(Entry{std::move(name), t, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
  return t;
}

const Tensor& ParamSet::get(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw std::out_of_range("ParamSet: no parameter named '" + std::string(name) + "'");
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

std::size_t ParamSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamSet::set_step(long step) {
  if (step < 0) throw std::invalid_argument("ParamSet: step counter must be non-negative");
  step_ = step;
}

void ParamSet::clear_grads() {
  for (auto& e : entries_) e.value.clear_grad();
}

void ParamSet::copy_values_from(const ParamSet& other) {
  if (other.entries_.size() != entries_.size()) throw std::invalid_argument("ParamSet: layout mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& src = other.entries_[i];
    auto& dst = entries_[i];
    if (src.name != dst.name || src.value.shape() != dst.value.shape()) {
      throw std::invalid_argument("ParamSet: layout mismatch at '" + dst.name + "'");
    }
    std::copy(src.value.values().begin(), src.value.values().end(), dst.value.mutable_values().begin());
  }
}

ParamSet ParamSet::clone() const {
  ParamSet out;
  for (const auto& e : entries_) {
    out.entries_.push_back(Entry{e.name,
                                 Tensor::from(e.value.shape(),
                                              std::vector<double>(e.value.values().begin(), e.value.values().end()),
                                              true),
                                 e.first_moment, e.second_moment});
  }
  out.step_ = step_;
  return out;
}

void adam_step(ParamSet& params, double learning_rate, double beta1, double beta2, double epsilon) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("adam_step: betas must lie in (0,1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("adam_step: epsilon must be positive");
  for (const auto& e : params.entries_) {
    if (!e.value.has_grad()) throw std::logic_error("adam_step: parameter '" + e.name + "' has no gradient");
  }
  params.step_ += 1;
  const double t = static_cast<double>(params.step_);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (auto& e : params.entries_) {
    auto values = e.value.mutable_values();
    const auto grad = e.value.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      e.first_moment[i] = beta1 * e.first_moment[i] + (1.0 - beta1) * g;
      e.second_moment[i] = beta2 * e.second_moment[i] + (1.0 - beta2) * g * g;
      const double m_hat = e.first_moment[i] / c1;
      const double v_hat = e.second_moment[i] / c2;
      values[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + epsilon);
    }
    e.value.clear_grad();
  }
}

double clip_grad_norm(ParamSet& params, double max_norm) {
  double sq = 0.0;
  for (const auto& e : params.entries())
    for (double g : e.value.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto& e : params.entries())
      if (e.value.has_grad())
        for (double& g : e.value.mutable_grad()) g *= f;
  }
  return norm;
}

double grad_check(const std::function<Tensor()>& loss, ParamSet& params, const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  params.clear_grads();
  const Tensor root = loss();
  if (!std::isfinite(root.item())) throw std::domain_error("grad_check: loss is not finite");
  root.backward();

  auto evaluate = [&]() {
    const double v = loss().item();
    if (!std::isfinite(v)) throw std::domain_error("grad_check: perturbed loss is not finite");
    return v;
  };

  double worst = 0.0;
  for (auto& e : params.entries()) {
    const std::size_t n = e.value.size();
    std::vector<double> analytic(n, 0.0);
    if (e.value.has_grad()) std::copy(e.value.grad().begin(), e.value.grad().end(), analytic.begin());
    const std::size_t count =
        options.max_coords_per_param == 0 ? n : std::min(n, options.max_coords_per_param);
    auto values = e.value.mutable_values();
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t i = count == n ? c : (c * n) / count;
      const double saved = values[i];
      values[i] = saved + options.step;
      const double plus = evaluate();
      values[i] = saved - options.step;
      const double minus = evaluate();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.abs_floor});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  params.clear_grads();
  return worst;
}

Tensor uniform_init(Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(tensor::shape_size(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor normal_init(Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(tensor::shape_size(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

Dense Dense::create(ParamSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Dense d;
  d.weight = params.add(name + ".weight", uniform_init({in, out}, bound, rng));
  d.bias = params.add(name + ".bias", Tensor::zeros({out}));
  return d;
}

Dense Dense::bind(const ParamSet& params, const std::string& name) {
  return Dense{params.get(name + ".weight"), params.get(name + ".bias")};
}

Tensor Dense::operator()(const Tensor& x) const { return tensor::add(tensor::matmul(x, weight), bias); }

LayerNorm LayerNorm::create(ParamSet& params, const std::string& name, std::size_t width) {
  LayerNorm ln;
  ln.gamma = params.add(name + ".gamma", Tensor::full({width}, 1.0));
  ln.beta = params.add(name + ".beta", Tensor::zeros({width}));
  return ln;
}

LayerNorm LayerNorm::bind(const ParamSet& params, const std::string& name) {
  return LayerNorm{params.get(name + ".gamma"), params.get(name + ".beta")};
}

Tensor LayerNorm::operator()(const Tensor& x) const { return tensor::layer_norm(x, gamma, beta); }

}  // namespace mrolab::nn
