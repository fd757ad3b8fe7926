#pragma once

#include "dubrec/data.hpp"
#include "dubrec/loss.hpp"
#include "dubrec/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dubrec {

enum class Method {
  Naive,
  Unif,
  Combine,
  Ips,
  CausE,
  Bridge,
  DubTriangle,
  DubSeparability
};

Method parse_method(const std::string& name);
std::string method_name(Method m);
// True for methods that train an auxiliary model on the randomized data.
bool uses_model_t(Method m);

struct MethodConfig {
  Method method = Method::DubSeparability;
  double gamma = 0.0;     // weight of the prediction-alignment term
  double lambda_c = 0.0;  // regularization of the main model
  double lambda_t = 0.0;  // regularization of the auxiliary model
  double gamma_tc = 0.0;  // parameter-alignment weight (CausE only)
  LossKind loss{};
  double propensity_floor = 0.01;  // lower clip for IPS propensities
  // Ablation switches: drop the randomized supervision term and/or the
  // S_t-side correction term from the refinement objective.
  bool drop_term_a = false;
  bool drop_term_e = false;
  // Use the plain S_a batch mean for the alignment term instead of scaling
  // it by |S_u|/|D|.
  bool alignment_plain_mean = false;
};

struct TrainConfig {
  std::int32_t rank = 50;
  double learning_rate = 1e-3;
  std::int32_t max_epochs = 40;
  std::int32_t patience = 5;
  std::int32_t batch_size = 1024;
  std::int32_t pretrain_epochs = 40;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::int32_t epoch = 0;
  // Weighted contributions; their sum is the objective.
  double term_a = 0.0;
  double term_c = 0.0;
  double term_d = 0.0;
  double term_e = 0.0;
  double reg_c = 0.0;
  double reg_t = 0.0;
  double align = 0.0;  // gamma_tc * parameter distance
  double objective = 0.0;
  double val_auc = 0.0;

  static std::string csv_header();
  std::string csv_row() const;
};

struct TrainResult {
  FactorModel model_c;
  std::optional<FactorModel> model_t;
  std::vector<EpochRecord> history;
  std::int32_t best_epoch = 0;  // argmax of validation AUC, first max wins
};

// Per-label propensities (p0, p1) from the naive Bayes estimator:
//   p_y = P(Y=y | O=1) * P(O=1) / P(Y=y)
// with the conditional from S_c, P(O=1) = |S_c| / d_size and the prior from
// S_t. A label missing from S_t raises DataError. Both values are clipped
// below at `floor`.
std::pair<double, double> naive_bayes_propensity(const Dataset& s_c,
                                                 const Dataset& s_t,
                                                 std::int64_t d_size,
                                                 double floor = 0.01);

// One early-stopped run of the plain (optionally per-example weighted)
// average loss with L2. `weights` must be empty or match `train` in length;
// `denominator` defaults to |train| and is the loss normalizer.
FactorModel pretrain(const Dataset& train, const Dataset& val,
                     const TrainConfig& cfg, const LossKind& loss,
                     double lambda, std::vector<EpochRecord>* history = nullptr,
                     std::span<const double> weights = {},
                     std::int64_t denominator = 0);

// Shared scale information for one refinement step.
struct StepScales {
  std::int64_t d_size = 0;   // |D|
  std::int64_t sc_size = 0;  // training-set size behind the s_c batches
  std::int64_t st_size = 0;  // |S_t|
  std::int64_t sa_size = 0;  // size of the epoch's auxiliary sample
  std::int64_t su_size = 0;  // |D| - |S_c| - |S_t|
  double p0 = 1.0, p1 = 1.0;  // IPS propensities
};

struct StepBatches {
  std::span<const Interaction> s_c;
  std::span<const Interaction> s_t;
  std::span<const Interaction> s_a;  // labels unused
};

struct StepTerms {
  double a = 0.0;
  double c = 0.0;
  double d = 0.0;      // gamma-weighted alignment value
  double e = 0.0;
  double reg_c = 0.0;  // lambda_c * ||W_c||_F^2 (all parameters)
  double reg_t = 0.0;
  double align = 0.0;  // gamma_tc * ||W_t - W_c||_F
  double objective() const { return a + c + d + e + reg_c + reg_t + align; }
};

// Assembles the method's step objective on the given batches: term values
// plus, when accumulators are passed, the routed gradients. model_t may be
// null only for methods that do not use it.
StepTerms objective_terms(const MethodConfig& cfg, const FactorModel& model_c,
                          const FactorModel* model_t,
                          const StepBatches& batches, const StepScales& scales,
                          GradAccumulator* grad_c = nullptr,
                          GradAccumulator* grad_t = nullptr);

// Full training pipeline: pretraining (and for the joint methods a
// refinement phase over resampled auxiliary sets), with early stopping on
// validation AUC. Returns the best-epoch snapshot.
TrainResult train(const MethodConfig& mcfg, const TrainConfig& tcfg,
                  const Dataset& s_c, const Dataset& s_t, const Dataset& s_va);

struct GridRanges {
  std::vector<std::int32_t> ranks{50, 100, 200};
  std::vector<double> lambdas{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<double> gammas{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
};

struct GridCell {
  MethodConfig method_cfg;
  TrainConfig train_cfg;
  double metric = 0.0;
};

struct GridResult {
  GridCell best;
  std::vector<GridCell> cells;
};

// Cells in deterministic rank-major order.
std::vector<GridCell> enumerate_grid(const MethodConfig& base_m,
                                     const TrainConfig& base_t,
                                     const GridRanges& ranges);

// Exhaustive evaluation; `evaluate` maps a finished run to the model-selection
// metric (defaults to the best validation AUC). Ties keep the first cell in
// grid order. `jobs` > 1 runs cells concurrently; each cell derives its own
// seed from the base seed and the cell index, so results do not depend on
// scheduling.
GridResult grid_search(
    const MethodConfig& base_m, const TrainConfig& base_t,
    const GridRanges& ranges, const Dataset& s_c, const Dataset& s_t,
    const Dataset& s_va,
    const std::function<double(const TrainResult&)>& evaluate = {},
    int jobs = 1);

}  // namespace dubrec
