#pragma once

#include "dubrec/data.hpp"
#include "dubrec/loss.hpp"
#include "dubrec/model.hpp"
#include "dubrec/world.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <string>

namespace dubrec {

enum class BoundVariant { Triangle, Separability };

struct BoundConfig {
  double delta = 1.0;                 // loss bound
  std::int64_t hypothesis_count = 1;  // |H|
  double eta = 0.05;                  // failure probability
  // When positive, the expectation inside the bias term is additionally
  // estimated by averaging over this many fresh uniform draws of S_t.
  int n_bias_resamples = 0;
  std::uint64_t resample_seed = 0;

  void validate() const;
};

// Average loss of the model against the complete uniform-policy feedback,
// over every pair of the world.
double ideal_loss(const SyntheticWorld& world, const FactorModel& model_c,
                  const LossKind& loss);

// The five right-hand-side partial losses of the plain decomposition, in
// order. Triangle:
//   L^{St}(Rt, Pc), L^{Sc}(Rt, Rc), L^{Sc}(Rc, Pc),
//   L^{Su}(Rt, Pt), L^{Su}(Pt, Pc)
// Separability:
//   L^{St}(Rt, Pc), L^{Sc}(Rt - Rc, Pc), L^{Sc}(Rc, Pc),
//   L^{Su}(Rt - Pt, Pc), L^{Su}(Pt, Pc)
// All use |D| as the denominator. For the zero-one loss a prediction entering
// the target slot is rounded to a label; the separability variant is not
// defined for it and throws std::domain_error.
struct PropositionTerms {
  std::array<double, 5> values{};
  double sum() const {
    return values[0] + values[1] + values[2] + values[3] + values[4];
  }
};

PropositionTerms proposition_terms(BoundVariant variant,
                                   const SyntheticWorld& world,
                                   const FactorModel& model_c,
                                   const FactorModel& model_t,
                                   const Dataset& s_c, const Dataset& s_t,
                                   const LossKind& loss);

// (delta / |S_t|) * sqrt(|D|/2 * log(2|H| / eta))
double hoeffding_term(const BoundConfig& cfg, std::int64_t s_t_size,
                      std::int64_t d_size);

struct BoundReport {
  BoundVariant variant = BoundVariant::Triangle;
  double lhs_ideal = 0.0;
  double term_a = 0.0;  // L^{St}(Rt, Pc)
  double term_b = 0.0;  // policy-difference term on S_c
  double term_c = 0.0;  // L^{Sc}(Rc, Pc)
  double term_d = 0.0;  // L^{Su}(Pt, Pc)
  double term_e = 0.0;  // S_t average, variant-specific
  double bias_term = 0.0;        // L^{Su}(.) minus the realized S_t average
  double confidence_term = 0.0;  // Hoeffding deviation
  double rhs_total = 0.0;        // a+b+c+d+e+bias+confidence
  bool holds = false;            // lhs <= rhs_total + 1e-9

  // Bias with the expectation estimated by resampling S_t; NaN when no
  // resamples were requested.
  double bias_term_resampled = std::numeric_limits<double>::quiet_NaN();
  double rhs_resampled() const;
  bool holds_resampled() const;

  std::string csv_row() const;
  static std::string csv_header();
};

BoundReport theorem_report(BoundVariant variant, const SyntheticWorld& world,
                           const FactorModel& model_c,
                           const FactorModel& model_t, const Dataset& s_c,
                           const Dataset& s_t, const LossKind& loss,
                           const BoundConfig& cfg);

}  // namespace dubrec
