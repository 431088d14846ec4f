#include <doctest.h>

#include <cmath>

#include "certiprob/error.hpp"
#include "certiprob/optim.hpp"

using namespace certiprob;

namespace {
Parameters scalar_params(double v) { return Parameters{{Tensor({1}, std::vector<double>{v})}}; }
}  // namespace

TEST_CASE("sgd examples") {
  Parameters p = scalar_params(1.0);
  sgd_step(p, scalar_params(1.0), 0.1, 0.0);
  CHECK(p.tensors[0][0] == doctest::Approx(0.9).epsilon(1e-15));

  p = scalar_params(1.0);
  sgd_step(p, scalar_params(0.0), 0.1, 0.0);
  CHECK(p.tensors[0][0] == 1.0);

  p = scalar_params(2.0);
  sgd_step(p, scalar_params(1.0), 0.01, 3.5e-3);
  CHECK(p.tensors[0][0] == doctest::Approx(2.0 - 0.01 * (1.0 + 3.5e-3 * 2.0)).epsilon(1e-15));
  CHECK(std::abs(p.tensors[0][0] - 1.98993) < 1e-12);

  Parameters two{{Tensor({2})}};
  CHECK_THROWS_AS(sgd_step(p, two, 0.1, 0.0), Error);
  CHECK_THROWS_AS(sgd_step(p, scalar_params(1.0), 0.0, 0.0), Error);
  CHECK_THROWS_AS(sgd_step(p, scalar_params(1.0), 0.1, -1.0), Error);
}

TEST_CASE("adadelta examples") {
  SUBCASE("zero gradient leaves everything at zero") {
    Parameters p = scalar_params(1.5);
    AdadeltaState s = AdadeltaState::for_params(p);
    adadelta_step(p, scalar_params(0.0), s, 0.9, 1e-6, 1.0);
    CHECK(p.tensors[0][0] == 1.5);
    CHECK(s.sq_grad[0][0] == 0.0);
    CHECK(s.sq_delta[0][0] == 0.0);
  }
  SUBCASE("first unit-gradient step") {
    Parameters p = scalar_params(0.0);
    AdadeltaState s = AdadeltaState::for_params(p);
    adadelta_step(p, scalar_params(1.0), s, 0.9, 1e-6, 1.0);
    // E[g^2] = 0.1; delta = -sqrt(0 + eps) / sqrt(0.1 + eps) * g
    const double expected = -std::sqrt(1e-6 / (0.1 + 1e-6));
    CHECK(p.tensors[0][0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::abs(p.tensors[0][0] + 3.1623e-3) < 1e-7);
    CHECK(s.sq_grad[0][0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.sq_delta[0][0] == doctest::Approx(0.1 * expected * expected).epsilon(1e-14));
  }
  SUBCASE("repeated runs are deterministic") {
    Parameters a = scalar_params(0.3), b = scalar_params(0.3);
    AdadeltaState sa = AdadeltaState::for_params(a), sb = AdadeltaState::for_params(b);
    for (int i = 0; i < 5; ++i) {
      adadelta_step(a, scalar_params(0.7 - 0.1 * i), sa, 0.9, 1e-6, 1.0);
      adadelta_step(b, scalar_params(0.7 - 0.1 * i), sb, 0.9, 1e-6, 1.0);
    }
    CHECK(a == b);
  }
  SUBCASE("uninitialized state and bad hyperparameters are rejected") {
    Parameters p = scalar_params(0.0);
    AdadeltaState s;
    CHECK_THROWS_AS(adadelta_step(p, scalar_params(1.0), s, 0.9, 1e-6, 1.0), Error);
    s = AdadeltaState::for_params(p);
    CHECK_THROWS_AS(adadelta_step(p, scalar_params(1.0), s, 1.0, 1e-6, 1.0), Error);
    CHECK_THROWS_AS(adadelta_step(p, scalar_params(1.0), s, 0.9, 0.0, 1.0), Error);
  }
}

TEST_CASE("milestone schedule decays after each milestone epoch") {
  const int ms[] = {55, 75, 90};
  CHECK(milestone_lr(0.01, ms, 0.1, 1) == 0.01);
  CHECK(milestone_lr(0.01, ms, 0.1, 55) == 0.01);
  CHECK(milestone_lr(0.01, ms, 0.1, 56) == doctest::Approx(1e-3));
  CHECK(milestone_lr(0.01, ms, 0.1, 80) == doctest::Approx(1e-4));
  CHECK(milestone_lr(0.01, ms, 0.1, 150) == doctest::Approx(1e-5));
}
