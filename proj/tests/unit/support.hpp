#pragma once

#include <random>
#include <vector>

#include "mrolab/random.hpp"
#include "mrolab/tensor.hpp"

namespace testing {

inline mrolab::tensor::Tensor random_tensor(mrolab::tensor::Shape shape, mrolab::Rng& rng, bool grad = false,
                                            double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(mrolab::tensor::shape_size(shape));
  for (auto& x : v) x = g(rng);
  return mrolab::tensor::Tensor::from(std::move(shape), std::move(v), grad);
}

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testing
