#pragma once

#include "dubrec/loss.hpp"
#include "dubrec/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dubrec {

// Matrix factorization with per-user/item biases and a sigmoid output.
// Predictions are clamped into (0, 1) so cross-entropy stays finite.
struct FactorModel {
  Matrix user_factors;  // n_users x rank
  Matrix item_factors;  // n_items x rank
  Vector user_bias;
  Vector item_bias;
  double global_bias = 0.0;
  std::int32_t rank = 0;
  double clamp_eps = 1e-7;

  std::int32_t n_users() const { return static_cast<std::int32_t>(user_factors.rows()); }
  std::int32_t n_items() const { return static_cast<std::int32_t>(item_factors.rows()); }

  double logit(std::int32_t u, std::int32_t i) const;
  // Clamped sigmoid score; throws std::out_of_range on bad indices.
  double predict(std::int32_t u, std::int32_t i) const;
  // Clamped scores of every item for one user.
  Vector predict_items(std::int32_t u) const;

  bool all_finite() const;
};

// Factors i.i.d. normal with standard deviation 0.01, biases zero.
FactorModel init_model(std::int32_t n_users, std::int32_t n_items,
                       std::int32_t rank, std::uint64_t seed);

// All-zero parameters; predicts 0.5 everywhere.
FactorModel zero_model(std::int32_t n_users, std::int32_t n_items,
                       std::int32_t rank);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment state, one slot per parameter. Rows untouched by a batch
// keep their moments (lazy update); the step count is global.
struct OptimizerState {
  Matrix m_user, v_user, m_item, v_item;
  Vector m_user_bias, v_user_bias, m_item_bias, v_item_bias;
  double m_global = 0.0, v_global = 0.0;
  std::int64_t step_count = 0;
  AdamConfig config;

  static OptimizerState for_model(const FactorModel& model, AdamConfig cfg = {});
};

struct TrainingExample {
  std::int32_t user = 0;
  std::int32_t item = 0;
  double target = 0.0;  // any real in [-1, 1]; difference targets allowed
  double weight = 1.0;
};

// Accumulates objective gradients for one model across examples and
// parameter-space terms, then feeds one optimizer step.
class GradAccumulator {
 public:
  explicit GradAccumulator(const FactorModel& model);

  void reset();
  // Chain rule through weight * loss(target, predict(u, i)).
  void add_example(const FactorModel& model, const TrainingExample& ex,
                   const LossKind& loss);
  // coeff * theta on every row touched so far (plus the global bias).
  void add_l2_touched(const FactorModel& model, double coeff);
  // coeff * theta on all parameters.
  void add_l2_all(const FactorModel& model, double coeff);
  // coeff * (self - other) / ||self - other||_F on all parameters; no-op at
  // zero distance.
  void add_frobenius_pull(const FactorModel& self, const FactorModel& other,
                          double coeff);

  const Matrix& user_grad() const { return g_user_; }
  const Matrix& item_grad() const { return g_item_; }
  const Vector& user_bias_grad() const { return g_user_bias_; }
  const Vector& item_bias_grad() const { return g_item_bias_; }
  double global_bias_grad() const { return g_global_; }
  const std::vector<char>& touched_users() const { return touched_user_; }
  const std::vector<char>& touched_items() const { return touched_item_; }
  bool anything_touched() const { return any_; }

 private:
  Matrix g_user_, g_item_;
  Vector g_user_bias_, g_item_bias_;
  double g_global_ = 0.0;
  std::vector<char> touched_user_, touched_item_;
  bool any_ = false;

  void touch_all();
};

// One Adam update from accumulated gradients; only touched rows move.
// Non-finite gradients raise NumericError with a diagnostic.
void adam_step(FactorModel& model, OptimizerState& opt,
               const GradAccumulator& grads);

// Convenience step: accumulate the batch, add l2 * theta on touched
// parameters, apply one Adam update.
void grad_step(FactorModel& model, OptimizerState& opt,
               std::span<const TrainingExample> batch, const LossKind& loss,
               double l2);

// lambda times the squared Frobenius norm of all parameter blocks.
double regularization_value(const FactorModel& model, double lambda);

// Frobenius norm of elementwise parameter differences across all blocks;
// shape mismatch raises DataError.
double param_distance(const FactorModel& a, const FactorModel& b);

// Checkpoint directory: `meta` plus one CSV per parameter block; values are
// printed with 17 significant digits so reloads are bit-exact.
void save_model(const FactorModel& model, const std::filesystem::path& dir);
FactorModel load_model(const std::filesystem::path& dir);

}  // namespace dubrec
