#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "mrolab/random.hpp"
#include "mrolab/tensor.hpp"

namespace mrolab::nn {

using tensor::Shape;
using tensor::Tensor;

// Named trainable tensors plus the Adam state that goes with them.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
  };

  // Registers `value` (marked trainable) under a unique name and returns it.
  Tensor add(std::string name, Tensor value);
  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t parameter_count() const;

  long step() const { return step_; }
  void set_step(long step);

  void clear_grads();
  // Copies values (not optimizer state) from a set with identical names/shapes.
  void copy_values_from(const ParamSet& other);
  // Deep copy; copying a ParamSet object shares storage.
  ParamSet clone() const;

 private:
  std::vector<Entry> entries_;
  long step_ = 0;

  friend void adam_step(ParamSet&, double, double, double, double);
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. Every parameter must carry a gradient; gradients are
// cleared afterwards.
void adam_step(ParamSet& params, double learning_rate, double beta1, double beta2, double epsilon);
inline void adam_step(ParamSet& params, const AdamConfig& cfg) {
  adam_step(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
}

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(ParamSet& params, double max_norm);

// Max over all checked coordinates of |autodiff - central difference| /
// max(|autodiff|, |central difference|, abs_floor). `loss` must rebuild the
// graph from the current parameter values on every call.
struct GradCheckOptions {
  double step = 1e-5;
  double abs_floor = 1e-6;
  std::size_t max_coords_per_param = 0;  // 0 checks every coordinate
};
double grad_check(const std::function<Tensor()>& loss, ParamSet& params, const GradCheckOptions& options = {});
inline double grad_check(const std::function<Tensor()>& loss, ParamSet& params, double step) {
  return grad_check(loss, params, GradCheckOptions{.step = step});
}

// ---------------------------------------------------------------------------
// Initializers and layers

Tensor uniform_init(Shape shape, double bound, Rng& rng);
Tensor normal_init(Shape shape, double stddev, Rng& rng);

// y = x W + b with W ~ U(-1/sqrt(in), 1/sqrt(in)) and b = 0.
struct Dense {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Dense create(ParamSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  static Dense bind(const ParamSet& params, const std::string& name);
  Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  static LayerNorm create(ParamSet& params, const std::string& name, std::size_t width);
  static LayerNorm bind(const ParamSet& params, const std::string& name);
  Tensor operator()(const Tensor& x) const;
};

}  // namespace mrolab::nn
