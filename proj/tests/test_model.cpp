#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dubrec/errors.hpp"
#include "dubrec/model.hpp"
#include "dubrec/rng.hpp"

#include "test_util.hpp"

#include <filesystem>
#include <vector>

using namespace dubrec;
using namespace dubrec::testing;

TEST_CASE("initialization shapes and determinism") {
  const FactorModel m = init_model(7, 5, 50, 3);
  CHECK(m.user_factors.rows() == 7);
  CHECK(m.user_factors.cols() == 50);
  CHECK(m.item_factors.rows() == 5);
  CHECK(m.user_bias.size() == 7);
  CHECK(m.global_bias == 0.0);
  const FactorModel again = init_model(7, 5, 50, 3);
  CHECK(models_identical(m, again));
  CHECK_FALSE(models_identical(m, init_model(7, 5, 50, 4)));
}

TEST_CASE("prediction values") {
  const FactorModel zero = zero_model(3, 3, 2);
  CHECK(zero.predict(0, 0) == 0.5);

  FactorModel m = zero_model(2, 2, 2);
  m.user_factors(0, 0) = 1.0;
  m.item_factors(0, 0) = 1.0;
  CHECK(m.predict(0, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-12));

  FactorModel huge = zero_model(2, 2, 2);
  huge.global_bias = 1e6;
  CHECK(huge.predict(0, 0) == 1.0 - huge.clamp_eps);
  huge.global_bias = -1e6;
  CHECK(huge.predict(1, 1) == huge.clamp_eps);

  CHECK_THROWS_AS((void)m.predict(2, 0), std::out_of_range);
  CHECK_THROWS_AS((void)m.predict(0, -1), std::out_of_range);
}

TEST_CASE("predict_items matches predict") {
  Rng rng(5);
  const FactorModel m = random_model(4, 6, 3, rng);
  const Vector row = m.predict_items(2);
  for (int i = 0; i < 6; ++i) {
    CHECK(row[i] == doctest::Approx(m.predict(2, i)).epsilon(1e-14));
  }
}

TEST_CASE("logit gradient of the zero model") {
  FactorModel m = zero_model(2, 2, 2);
  GradAccumulator grads(m);
  grads.add_example(m, {0, 0, 1.0, 1.0}, {LossType::BinaryCrossEntropy, 1e-7});
  // sigma(0) - 1 = -0.5 lands on every bias path.
  CHECK(grads.global_bias_grad() == doctest::Approx(-0.5));
  CHECK(grads.user_bias_grad()[0] == doctest::Approx(-0.5));
  CHECK(grads.item_bias_grad()[0] == doctest::Approx(-0.5));
  // Factor gradients vanish because the opposite factors are zero.
  CHECK(grads.user_grad()(0, 0) == 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(11);
  const LossKind losses[] = {{LossType::BinaryCrossEntropy, 1e-7},
                             {LossType::SquaredError, 1e-7}};
  for (int trial = 0; trial < 100; ++trial) {
    const LossKind& loss = losses[trial % 2];
    FactorModel m = random_model(3, 3, 2, rng);
    std::vector<TrainingExample> batch;
    const int n = 1 + static_cast<int>(rng.below(5));
    for (int e = 0; e < n; ++e) {
      batch.push_back({static_cast<std::int32_t>(rng.below(3)),
                       static_cast<std::int32_t>(rng.below(3)),
                       rng.uniform(-1.0, 1.0), rng.uniform(0.1, 2.0)});
    }
    const double l2 = trial % 3 == 0 ? 0.05 : 0.0;

    GradAccumulator grads(m);
    for (const auto& ex : batch) grads.add_example(m, ex, loss);
    grads.add_l2_touched(m, l2);

    auto objective = [&]() {
      double j = 0.0;
      for (const auto& ex : batch) {
        j += ex.weight * eval_loss(loss, ex.target, m.predict(ex.user, ex.item));
      }
      if (l2 > 0.0) {
        // The l2 coefficient is the gradient scale, so the matching value
        // term is coeff/2 * ||theta||^2 over touched parameters.
        for (const ParamRef& r : all_params(m)) {
          if (param_touched(grads, r)) {
            const double theta = param_at(m, r);
            j += 0.5 * l2 * theta * theta;
          }
        }
      }
      return j;
    };

    for (const ParamRef& r : all_params(m)) {
      if (!param_touched(grads, r)) continue;
      const double fd = central_difference(m, r, objective);
      const double analytic = grad_at(grads, r);
      CHECK(rel_error(analytic, fd) < 1e-4);
    }
  }
}

TEST_CASE("zero-weight batches only shrink via l2") {
  Rng rng(2);
  FactorModel m = random_model(3, 3, 2, rng);
  const FactorModel before = m;
  OptimizerState opt = OptimizerState::for_model(m);
  std::vector<TrainingExample> batch = {{0, 0, 1.0, 0.0}, {1, 2, 0.0, 0.0}};

  SUBCASE("no l2: bitwise unchanged") {
    grad_step(m, opt, batch, {LossType::BinaryCrossEntropy, 1e-7}, 0.0);
    CHECK(models_identical(m, before));
  }
  SUBCASE("with l2: touched parameters move toward zero") {
    grad_step(m, opt, batch, {LossType::BinaryCrossEntropy, 1e-7}, 0.1);
    CHECK(std::abs(m.user_factors(0, 0)) < std::abs(before.user_factors(0, 0)));
    // Untouched user row 2 must not move.
    CHECK(m.user_factors.row(2) == before.user_factors.row(2));
  }
}

TEST_CASE("training steps are bitwise deterministic") {
  const LossKind loss{LossType::BinaryCrossEntropy, 1e-7};
  auto run = [&]() {
    FactorModel m = init_model(4, 4, 3, 17);
    OptimizerState opt = OptimizerState::for_model(m);
    Rng rng(23);
    for (int step = 0; step < 50; ++step) {
      std::vector<TrainingExample> batch;
      for (int e = 0; e < 4; ++e) {
        batch.push_back({static_cast<std::int32_t>(rng.below(4)),
                         static_cast<std::int32_t>(rng.below(4)),
                         rng.bernoulli(0.5) ? 1.0 : 0.0, 1.0});
      }
      grad_step(m, opt, batch, loss, 1e-4);
    }
    return m;
  };
  CHECK(models_identical(run(), run()));
}

TEST_CASE("full-batch descent is monotone at a small learning rate") {
  const LossKind loss{LossType::BinaryCrossEntropy, 1e-7};
  FactorModel m = init_model(3, 3, 2, 5);
  OptimizerState opt =
      OptimizerState::for_model(m, AdamConfig{.learning_rate = 1e-4});
  const std::vector<TrainingExample> batch = {
      {0, 0, 1.0, 1.0}, {0, 1, 0.0, 1.0}, {1, 2, 1.0, 1.0}, {2, 0, 0.0, 1.0}};
  auto total = [&]() {
    double j = 0.0;
    for (const auto& ex : batch) {
      j += eval_loss(loss, ex.target, m.predict(ex.user, ex.item));
    }
    return j;
  };
  double prev = total();
  for (int step = 0; step < 100; ++step) {
    grad_step(m, opt, batch, loss, 0.0);
    const double now = total();
    CHECK(now <= prev + 1e-8);
    prev = now;
  }
}

TEST_CASE("non-finite gradients abort") {
  FactorModel m = zero_model(2, 2, 2);
  OptimizerState opt = OptimizerState::for_model(m);
  std::vector<TrainingExample> batch = {
      {0, 0, 1.0, std::numeric_limits<double>::infinity()}};
  CHECK_THROWS_AS(
      grad_step(m, opt, batch, {LossType::BinaryCrossEntropy, 1e-7}, 0.0),
      NumericError);
}

TEST_CASE("regularization value") {
  const FactorModel zero = zero_model(2, 2, 2);
  CHECK(regularization_value(zero, 0.3) == 0.0);
  FactorModel m = zero_model(2, 2, 2);
  m.user_factors(0, 0) = 2.0;
  CHECK(regularization_value(m, 0.1) == doctest::Approx(0.4).epsilon(1e-12));
  FactorModel doubled = m;
  doubled.user_factors *= 2.0;
  CHECK(regularization_value(doubled, 0.1) ==
        doctest::Approx(4.0 * regularization_value(m, 0.1)).epsilon(1e-12));
}

TEST_CASE("parameter distance") {
  Rng rng(8);
  const FactorModel a = random_model(3, 4, 2, rng);
  CHECK(param_distance(a, a) == 0.0);
  FactorModel b = a;
  b.item_bias[1] += 3.0;
  CHECK(param_distance(a, b) == doctest::Approx(3.0).epsilon(1e-12));
  const FactorModel other = zero_model(3, 4, 3);
  CHECK_THROWS_AS((void)param_distance(a, other), DataError);
}

TEST_CASE("frobenius pull matches the distance gradient") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    FactorModel a = random_model(2, 3, 2, rng);
    const FactorModel b = random_model(2, 3, 2, rng);
    GradAccumulator grads(a);
    grads.add_frobenius_pull(a, b, 1.0);
    auto distance = [&]() { return param_distance(a, b); };
    for (const ParamRef& r : all_params(a)) {
      const double fd = central_difference(a, r, distance);
      CHECK(rel_error(grad_at(grads, r), fd) < 1e-4);
    }
  }
}

TEST_CASE("checkpoints round trip bitwise") {
  Rng rng(31);
  const FactorModel m = random_model(5, 4, 3, rng, 2.7);
  const auto dir = std::filesystem::temp_directory_path() / "dubrec_ckpt";
  std::filesystem::remove_all(dir);
  save_model(m, dir);
  const FactorModel loaded = load_model(dir);
  CHECK(models_identical(m, loaded));
  CHECK(loaded.rank == m.rank);
  CHECK(loaded.clamp_eps == m.clamp_eps);
  std::filesystem::remove_all(dir);
}
