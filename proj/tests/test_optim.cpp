// SGD with momentum, weight decay, and the stepped learning-rate schedule.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "xreid/ops.hpp"
#include "xreid/optim.hpp"

using namespace xreid;

namespace {

OptimConfig plain(double lr) { return OptimConfig{lr, 0.0, 0.0, 10, 0.1}; }

}  // namespace

TEST_CASE("the schedule steps down by the decay factor every interval") {
  const OptimConfig cfg{0.01, 0.9, 5e-4, 10, 0.1};
  CHECK_EQ(lr_at_epoch(cfg, 0), doctest::Approx(0.01).epsilon(1e-12));
  CHECK_EQ(lr_at_epoch(cfg, 9), doctest::Approx(0.01).epsilon(1e-12));
  CHECK_EQ(lr_at_epoch(cfg, 10), doctest::Approx(0.001).epsilon(1e-12));
  CHECK_EQ(lr_at_epoch(cfg, 19), doctest::Approx(0.001).epsilon(1e-12));
  CHECK_EQ(lr_at_epoch(cfg, 20), doctest::Approx(0.0001).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(lr_at_epoch(cfg, -1), doctest::Contains("epoch must be >= 0"),
                       std::invalid_argument);

  SUBCASE("a unit factor keeps the rate constant") {
    const OptimConfig flat{0.05, 0.0, 0.0, 3, 1.0};
    CHECK_EQ(lr_at_epoch(flat, 0), 0.05);
    CHECK_EQ(lr_at_epoch(flat, 30), 0.05);
  }
}

TEST_CASE("a bare step is parameter minus lr times gradient") {
  TensorF p = TensorF::parameter({2}, {1.f, -2.f});
  sum_all(mul(p, p)).backward();  // grad = 2p = {2, -4}
  std::vector<std::pair<std::string, TensorF>> params{{"p", p}};
  SgdState<float> state;
  sgd_step(params, state, plain(0.25), 0);
  // v = grad, p -= 0.25 * v, reproduced in float arithmetic.
  CHECK_EQ(p.value()[0], 1.f - 0.25f * 2.f);
  CHECK_EQ(p.value()[1], -2.f - 0.25f * -4.f);
}

TEST_CASE("weight decay alone shrinks parameters geometrically") {
  TensorF p = TensorF::parameter({1}, {2.f});
  std::vector<std::pair<std::string, TensorF>> params{{"p", p}};
  SgdState<float> state;
  OptimConfig cfg = plain(0.1);
  cfg.weight_decay = 0.5;
  // No backward pass: grad_or_zeros gives 0, so v = wd * p and
  // p <- p * (1 - lr * wd) each step.
  float expect = 2.f;
  for (int i = 0; i < 3; ++i) {
    sgd_step(params, state, cfg, 0);
    expect *= 1.f - 0.1f * 0.5f;
    CHECK_EQ(p.value()[0], doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("momentum accumulates the velocity across steps") {
  TensorF p = TensorF::parameter({1}, {0.f});
  std::vector<std::pair<std::string, TensorF>> params{{"p", p}};
  SgdState<float> state;
  OptimConfig cfg = plain(1.0);
  cfg.momentum = 0.9;

  // Constant gradient of 1 via loss = p (the kink-free linear term).
  sum_all(p).backward();
  sgd_step(params, state, cfg, 0);
  CHECK_EQ(p.value()[0], doctest::Approx(-1.0).epsilon(1e-6));  // v = 1

  sum_all(p).backward();
  sgd_step(params, state, cfg, 0);
  // v = 0.9 * 1 + 1 = 1.9, p = -1 - 1.9 = -2.9.
  CHECK_EQ(p.value()[0], doctest::Approx(-2.9).epsilon(1e-6));
}

TEST_CASE("the epoch argument scales the applied step") {
  auto run_once = [](int epoch) {
    TensorF p = TensorF::parameter({1}, {1.f});
    sum_all(p).backward();
    std::vector<std::pair<std::string, TensorF>> params{{"p", p}};
    SgdState<float> state;
    sgd_step(params, state, OptimConfig{0.1, 0.0, 0.0, 10, 0.1}, epoch);
    return 1.f - p.value()[0];  // applied delta
  };
  CHECK_EQ(run_once(10), doctest::Approx(0.1 * run_once(0)).epsilon(1e-5));
}

TEST_CASE("state and gradient health are enforced") {
  TensorF a = TensorF::parameter({2}, {1.f, 2.f});
  TensorF b = TensorF::parameter({1}, {3.f});
  std::vector<std::pair<std::string, TensorF>> params{{"a", a}, {"b", b}};
  SgdState<float> state;
  sgd_step(params, state, plain(0.1), 0);  // lazily initializes two buffers

  SUBCASE("the parameter list cannot change size midway") {
    std::vector<std::pair<std::string, TensorF>> fewer{{"a", a}};
    CHECK_THROWS_WITH_AS(sgd_step(fewer, state, plain(0.1), 0),
                         doctest::Contains("state does not match parameter list"),
                         std::invalid_argument);
  }
  SUBCASE("a swapped-in tensor of another size is caught by name") {
    std::vector<std::pair<std::string, TensorF>> swapped{
        {"a", a}, {"b", TensorF::parameter({4}, {1.f, 1.f, 1.f, 1.f})}};
    CHECK_THROWS_WITH_AS(sgd_step(swapped, state, plain(0.1), 0),
                         doctest::Contains("state size mismatch for parameter b"),
                         std::invalid_argument);
  }
  SUBCASE("a non-finite gradient aborts with the parameter name") {
    sum_all(scale(b, std::numeric_limits<float>::infinity())).backward();
    CHECK_THROWS_WITH_AS(sgd_step(params, state, plain(0.1), 0),
                         doctest::Contains("non-finite gradient in parameter b"), NumericError);
  }
}

TEST_CASE("plain gradient descent contracts a quadratic monotonically") {
  TensorF p = TensorF::parameter({2}, {3.f, -4.f});
  std::vector<std::pair<std::string, TensorF>> params{{"p", p}};
  SgdState<float> state;
  double last = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 10; ++it) {
    const TensorF loss = sum_all(mul(p, p));
    const double value = loss.scalar();
    CHECK_LT(value, last);
    last = value;
    loss.backward();
    sgd_step(params, state, plain(0.25), 0);
  }
  CHECK_LT(last, 1e-4);
}
