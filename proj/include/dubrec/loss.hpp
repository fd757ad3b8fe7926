#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>

namespace dubrec {

enum class LossType { BinaryCrossEntropy, L1, SquaredError, ZeroOne };

// A pointwise loss selection. clamp_eps is the probability floor applied to
// the prediction slot of the cross-entropy loss so that its values stay
// finite; it must satisfy 0 < clamp_eps < 0.5.
struct LossKind {
  LossType type = LossType::BinaryCrossEntropy;
  double clamp_eps = 1e-7;
};

LossKind parse_loss(const std::string& name);
std::string loss_name(const LossKind& k);

// Pointwise loss value.
//   BinaryCrossEntropy: -[y*log(p) + (1-y)*log(1-p)] with p clamped into
//     [clamp_eps, 1-clamp_eps]. The target y may be any real value (difference
//     targets in [-1, 1] occur in the separability bound), so the result can
//     be negative for generalized targets.
//   L1: |y - p|.   SquaredError: (y - p)^2.
//   ZeroOne: 1 iff round(p) != y; y must be exactly 0 or 1, otherwise a
//     std::domain_error is thrown.
double eval_loss(const LossKind& k, double y, double yhat);

// Upper bound of the loss on binary targets and clamped predictions.
double max_value(const LossKind& k);

// Derivative of the loss with respect to the prediction logit, with
// yhat = sigmoid(logit) already clamped. Throws std::domain_error for the
// zero-one loss.
double loss_logit_gradient(const LossKind& k, double y, double yhat);

// Sum of pointwise losses over (target, prediction) pairs divided by an
// explicit denominator. denominator >= pairs.size() is expected; a zero
// denominator throws. Empty pairs give 0.
double partial_loss(const LossKind& k,
                    std::span<const std::pair<double, double>> pairs,
                    std::int64_t denominator);

struct Violation {
  std::array<double, 3> inputs;  // (a, b, c) as sampled
  double lhs = 0;
  double rhs = 0;
  double gap = 0;  // lhs - rhs, positive for a violation
};

struct ConstraintReport {
  enum class Kind { Triangle, Separability };
  Kind kind = Kind::Triangle;
  std::int64_t n_samples = 0;
  std::int64_t n_violations = 0;
  std::optional<Violation> worst;  // present iff n_violations > 0

  std::string to_json() const;
};

// Samples triples (a, b, c) from the loss's valid domain and tests the
// triangle pattern l(c,a) <= l(b,a) + l(c,b), where a plays the prediction,
// b the middle element and c the target.
ConstraintReport check_triangle(const LossKind& k,
                                std::int64_t n_samples = 1'000'000,
                                std::uint64_t seed = 0);

// Samples a in the clamped prediction range and real targets b, c in [-1, 1],
// and tests l(c,a) <= l(b,a) + l(c-b,a). Not defined for the zero-one loss
// (its targets cannot be subtracted); that case throws std::domain_error.
ConstraintReport check_separability(const LossKind& k,
                                    std::int64_t n_samples = 1'000'000,
                                    std::uint64_t seed = 0);

}  // namespace dubrec
