#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mrolab/nn.hpp"
#include "unit/support.hpp"

using namespace mrolab;
using tensor::Tensor;
using testing::random_tensor;

TEST_SUITE("nn") {

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  nn::ParamSet p;
  auto w = p.add("w", Tensor::from({2}, {0.5, -1.5}));
  std::ranges::fill(w.mutable_grad(), 0.0);
  nn::adam_step(p, 0.1, 0.9, 0.999, 1e-8);
  CHECK(w.values()[0] == 0.5);
  CHECK(w.values()[1] == -1.5);
  CHECK(p.step() == 1);
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("adam single step on a unit gradient") {
  nn::ParamSet p;
  auto w = p.add("w", Tensor::scalar(2.0));
  w.mutable_grad()[0] = 1.0;
  nn::adam_step(p, 0.1, 0.9, 0.999, 1e-8);
  // m_hat = v_hat = 1 after bias correction.
  const double expected = 2.0 - 0.1 * 1.0 / (1.0 + 1e-8);
  CHECK(w.item() == doctest::Approx(expected).epsilon(1e-15));
  CHECK(2.0 - w.item() == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("adam moves against a constant gradient") {
  for (double g : {-3.0, 0.25}) {
    nn::ParamSet p;
    auto w = p.add("w", Tensor::scalar(0.0));
    for (int i = 0; i < 50; ++i) {
      w.mutable_grad()[0] = g;
      nn::adam_step(p, 0.01, 0.9, 0.999, 1e-8);
    }
    CHECK(w.item() * g < 0.0);
    CHECK(p.step() == 50);
  }
}

TEST_CASE("adam rejects missing gradients and bad hyperparameters") {
  nn::ParamSet p;
  auto a = p.add("a", Tensor::scalar(1.0));
  p.add("b", Tensor::scalar(1.0));
  a.mutable_grad()[0] = 1.0;
  CHECK_THROWS_AS(nn::adam_step(p, 0.1, 0.9, 0.999, 1e-8), std::logic_error);
  CHECK_THROWS_AS(nn::adam_step(p, -0.1, 0.9, 0.999, 1e-8), std::invalid_argument);
  CHECK_THROWS_AS(nn::adam_step(p, 0.1, 1.0, 0.999, 1e-8), std::invalid_argument);
}

TEST_CASE("param set keeps moments aligned with values") {
  Rng rng(1);
  nn::ParamSet p;
  nn::Dense::create(p, "l", 5, 3, rng);
  CHECK(p.parameter_count() == 18);
  for (const auto& e : p.entries()) {
    CHECK(e.first_moment.size() == e.value.size());
    CHECK(e.second_moment.size() == e.value.size());
  }
  CHECK_THROWS(p.add("l.bias", Tensor::zeros({3})));
  CHECK_THROWS(p.get("missing"));
  CHECK_THROWS(p.set_step(-1));
}

TEST_CASE("clone is a deep copy and copy_values_from copies values") {
  Rng rng(2);
  nn::ParamSet p;
  nn::Dense::create(p, "l", 3, 2, rng);
  auto c = p.clone();
  c.entries()[0].value.mutable_values()[0] += 1.0;
  CHECK(c.entries()[0].value.values()[0] != p.entries()[0].value.values()[0]);
  c.copy_values_from(p);
  CHECK(c.entries()[0].value.values()[0] == p.entries()[0].value.values()[0]);
}

TEST_CASE("dense initialization bounds and zero bias") {
  Rng rng(3);
  nn::ParamSet p;
  const auto d = nn::Dense::create(p, "l", 16, 8, rng);
  for (double v : d.weight.values()) CHECK(std::abs(v) <= 0.25);
  for (double v : d.bias.values()) CHECK(v == 0.0);
  const auto e = nn::normal_init({200, 50}, 0.02, rng);
  double sq = 0;
  for (double v : e.values()) sq += v * v;
  CHECK(std::sqrt(sq / 10000.0) == doctest::Approx(0.02).epsilon(0.05));
}

TEST_CASE("grad check of a linear function is exact") {
  Rng rng(4);
  nn::ParamSet p;
  auto w = p.add("w", random_tensor({3, 2}, rng));
  const auto x = random_tensor({4, 3}, rng);
  CHECK(nn::grad_check([&] { return tensor::sum(tensor::matmul(x, w)); }, p, 1e-5) < 1e-8);
}

TEST_CASE("grad check of a two-layer gelu MLP") {
  Rng rng(5);
  nn::ParamSet p;
  const auto l1 = nn::Dense::create(p, "l1", 6, 10, rng);
  const auto l2 = nn::Dense::create(p, "l2", 10, 1, rng);
  // Non-zero biases so every path is exercised.
  for (auto& e : p.entries())
    if (e.name.ends_with("bias"))
      for (auto& v : e.value.mutable_values()) v = 0.1;
  const auto x = random_tensor({5, 6}, rng);
  CHECK(nn::grad_check([&] { return tensor::mean(l2(tensor::gelu(l1(x)))); }, p, 1e-5) < 1e-4);
}

TEST_CASE("grad check of a causal attention block") {
  Rng rng(6);
  nn::ParamSet p;
  const std::size_t d = 8, len = 4;
  const auto ln = nn::LayerNorm::create(p, "ln", d);
  const auto q = nn::Dense::create(p, "q", d, d, rng);
  const auto k = nn::Dense::create(p, "k", d, d, rng);
  const auto v = nn::Dense::create(p, "v", d, d, rng);
  const auto o = nn::Dense::create(p, "o", d, d, rng);
  const auto x = random_tensor({2 * len, d}, rng);
  const auto target = random_tensor({2 * len, d}, rng);
  auto loss = [&] {
    const auto h = ln(x);
    const auto y = tensor::add(x, o(tensor::causal_attention(q(h), k(h), v(h), len, 2)));
    return tensor::mse(y, target);
  };
  CHECK(nn::grad_check(loss, p, 1e-5) < 1e-4);
}

TEST_CASE("grad check rejects non-finite losses") {
  nn::ParamSet p;
  auto w = p.add("w", Tensor::scalar(-1.0));
  CHECK_THROWS_AS(nn::grad_check([&] { return tensor::scale(w, std::nan("")); }, p), std::domain_error);
}

TEST_CASE("clip_grad_norm rescales to the limit") {
  nn::ParamSet p;
  auto w = p.add("w", Tensor::from({2}, {0, 0}));
  w.mutable_grad()[0] = 3;
  w.mutable_grad()[1] = 4;
  CHECK(nn::clip_grad_norm(p, 1.0) == doctest::Approx(5.0));
  CHECK(w.grad()[0] == doctest::Approx(0.6));
  CHECK(w.grad()[1] == doctest::Approx(0.8));
}

}  // TEST_SUITE
