#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dubrec/errors.hpp"
#include "dubrec/loss.hpp"
#include "dubrec/rng.hpp"

#include <cmath>
#include <vector>

using namespace dubrec;

TEST_CASE("pointwise loss values") {
  LossKind bce{LossType::BinaryCrossEntropy, 1e-7};
  CHECK(eval_loss(bce, 1.0, 0.5) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK(eval_loss(bce, 1.0, 0.9) == doctest::Approx(0.10536051565782628).epsilon(1e-12));
  // Generalized targets use the same formula and may go negative.
  CHECK(eval_loss(bce, -0.5, 0.9) ==
        doctest::Approx(-(-0.5 * std::log(0.9) + 1.5 * std::log(0.1))).epsilon(1e-12));

  LossKind l1{LossType::L1, 1e-7};
  CHECK(eval_loss(l1, 0.2, 0.2) == 0.0);
  LossKind mse{LossType::SquaredError, 1e-7};
  CHECK(eval_loss(mse, 1.0, 0.75) == doctest::Approx(0.0625));
  LossKind zo{LossType::ZeroOne, 1e-7};
  CHECK(eval_loss(zo, 1.0, 0.8) == 0.0);
  CHECK(eval_loss(zo, 0.0, 0.8) == 1.0);
  CHECK_THROWS_AS((void)eval_loss(zo, 0.4, 0.8), std::domain_error);
}

TEST_CASE("loss upper bounds") {
  CHECK(max_value({LossType::ZeroOne, 1e-7}) == 1.0);
  CHECK(max_value({LossType::L1, 1e-7}) == 1.0);
  CHECK(max_value({LossType::SquaredError, 1e-7}) == 1.0);
  CHECK(max_value({LossType::BinaryCrossEntropy, 1e-7}) ==
        doctest::Approx(16.11809565095832).epsilon(1e-12));
}

TEST_CASE("loss never exceeds its bound on binary targets") {
  Rng rng(7);
  const LossKind kinds[] = {{LossType::BinaryCrossEntropy, 1e-7},
                            {LossType::L1, 1e-7},
                            {LossType::SquaredError, 1e-7},
                            {LossType::ZeroOne, 1e-7}};
  for (const LossKind& k : kinds) {
    const double bound = max_value(k);
    for (int i = 0; i < 100000; ++i) {
      const double y = rng.bernoulli(0.5) ? 1.0 : 0.0;
      const double yhat = rng.uniform(k.clamp_eps, 1.0 - k.clamp_eps);
      CHECK(eval_loss(k, y, yhat) <= bound + 1e-12);
    }
  }
}

TEST_CASE("bce is minimized at the target") {
  LossKind bce{LossType::BinaryCrossEntropy, 1e-7};
  for (double y : {0.2, 0.5, 0.8}) {
    double best_p = -1.0;
    double best_v = 1e300;
    for (double p = 0.001; p < 0.9995; p += 0.001) {
      const double v = eval_loss(bce, y, p);
      if (v < best_v) {
        best_v = v;
        best_p = p;
      }
    }
    CHECK(best_p == doctest::Approx(y).epsilon(0.01));
  }
}

TEST_CASE("partial loss arithmetic") {
  LossKind l1{LossType::L1, 1e-7};
  // Per-pair losses 0.5, 0.5, 1, 2.
  std::vector<std::pair<double, double>> pairs = {
      {0.5, 0.0}, {1.0, 0.5}, {1.0, 0.0}, {2.0, 0.0}};
  CHECK(partial_loss(l1, pairs, 64) == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(partial_loss(l1, {}, 10) == 0.0);
  CHECK(partial_loss(l1, pairs, 4) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS((void)partial_loss(l1, pairs, 0), DataError);
}

TEST_CASE("partial loss is linear in the pair multiset") {
  LossKind bce{LossType::BinaryCrossEntropy, 1e-7};
  Rng rng(3);
  std::vector<std::pair<double, double>> a, b, both;
  for (int i = 0; i < 50; ++i) {
    std::pair<double, double> p{rng.bernoulli(0.5) ? 1.0 : 0.0,
                                rng.uniform(0.01, 0.99)};
    (i % 2 == 0 ? a : b).push_back(p);
    both.push_back(p);
  }
  CHECK(partial_loss(bce, both, 997) ==
        doctest::Approx(partial_loss(bce, a, 997) + partial_loss(bce, b, 997))
            .epsilon(1e-12));
}

TEST_CASE("triangle inequality holds for l1 and zero-one") {
  for (LossType type : {LossType::L1, LossType::ZeroOne}) {
    const auto report = check_triangle({type, 1e-7}, 100000, 11);
    CHECK(report.n_samples == 100000);
    CHECK(report.n_violations == 0);
    CHECK_FALSE(report.worst.has_value());
  }
}

TEST_CASE("triangle inequality fails for bce and squared error") {
  const auto bce_report = check_triangle({LossType::BinaryCrossEntropy, 1e-7},
                                         100000, 11);
  CHECK(bce_report.n_violations > 0);
  REQUIRE(bce_report.worst.has_value());
  CHECK(bce_report.worst->gap > 0.0);

  const auto mse_report =
      check_triangle({LossType::SquaredError, 1e-7}, 100000, 11);
  CHECK(mse_report.n_violations > 0);
}

TEST_CASE("the (1, 0.9, 0.1) bce counterexample") {
  LossKind bce{LossType::BinaryCrossEntropy, 1e-7};
  const double lhs = eval_loss(bce, 1.0, 0.1);
  const double rhs = eval_loss(bce, 0.9, 0.1) + eval_loss(bce, 1.0, 0.9);
  CHECK(lhs == doctest::Approx(2.302585092994046).epsilon(1e-12));
  CHECK(eval_loss(bce, 0.9, 0.1) ==
        doctest::Approx(2.082862635260424).epsilon(1e-12));
  CHECK(lhs - rhs == doctest::Approx(0.1143619420757955).epsilon(1e-9));
}

TEST_CASE("separability holds for bce, including generalized targets") {
  const auto report =
      check_separability({LossType::BinaryCrossEntropy, 1e-7}, 100000, 5);
  CHECK(report.n_violations == 0);
}

TEST_CASE("separability closed-form spot checks") {
  LossKind bce{LossType::BinaryCrossEntropy, 1e-7};
  // c = b reduces to 0 <= -log(1 - a).
  const double a = 0.73;
  CHECK(eval_loss(bce, 0.0, a) >= 0.0);
  // a = 0.5, b = 1, c = 1: both sides evaluable in closed form.
  const double lhs = eval_loss(bce, 1.0, 0.5);
  const double rhs = eval_loss(bce, 1.0, 0.5) + eval_loss(bce, 0.0, 0.5);
  CHECK(lhs == doctest::Approx(0.6931471805599453));
  CHECK(lhs <= rhs);
}

TEST_CASE("separability is undefined for zero-one") {
  CHECK_THROWS_AS((void)check_separability({LossType::ZeroOne, 1e-7}, 10, 0),
                  std::domain_error);
}

TEST_CASE("checkers are deterministic per seed") {
  LossKind bce{LossType::BinaryCrossEntropy, 1e-7};
  const auto r1 = check_triangle(bce, 20000, 42);
  const auto r2 = check_triangle(bce, 20000, 42);
  CHECK(r1.n_violations == r2.n_violations);
  REQUIRE(r1.worst.has_value());
  CHECK(r1.worst->gap == r2.worst->gap);
  CHECK(r1.to_json() == r2.to_json());
}

TEST_CASE("report serialization mentions the fields") {
  const auto report = check_triangle({LossType::L1, 1e-7}, 100, 0);
  const std::string json = report.to_json();
  CHECK(json.find("\"kind\":\"triangle\"") != std::string::npos);
  CHECK(json.find("\"n_violations\":0") != std::string::npos);
}
