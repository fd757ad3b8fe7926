#include "dubrec/loss.hpp"

#include "dubrec/errors.hpp"
#include "dubrec/rng.hpp"
#include "dubrec/types.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dubrec {

LossKind parse_loss(const std::string& name) {
  LossKind k;
  if (name == "bce") {
    k.type = LossType::BinaryCrossEntropy;
  } else if (name == "l1") {
    k.type = LossType::L1;
  } else if (name == "mse") {
    k.type = LossType::SquaredError;
  } else if (name == "zero-one") {
    k.type = LossType::ZeroOne;
  } else {
    throw ConfigError("unknown loss: " + name);
  }
  return k;
}

std::string loss_name(const LossKind& k) {
  switch (k.type) {
    case LossType::BinaryCrossEntropy: return "bce";
    case LossType::L1: return "l1";
    case LossType::SquaredError: return "mse";
    case LossType::ZeroOne: return "zero-one";
  }
  return "?";
}

static bool is_binary(double y) { return y == 0.0 || y == 1.0; }

double eval_loss(const LossKind& k, double y, double yhat) {
  switch (k.type) {
    case LossType::BinaryCrossEntropy: {
      const double p = clamp_unit(yhat, k.clamp_eps);
      return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
    case LossType::L1:
      return std::abs(y - yhat);
    case LossType::SquaredError:
      return (y - yhat) * (y - yhat);
    case LossType::ZeroOne:
      if (!is_binary(y)) {
        throw std::domain_error("zero-one loss requires a binary target");
      }
      return std::round(yhat) != y ? 1.0 : 0.0;
  }
  return 0.0;
}

double max_value(const LossKind& k) {
  switch (k.type) {
    case LossType::BinaryCrossEntropy:
      return -std::log(k.clamp_eps);
    case LossType::L1:
    case LossType::SquaredError:
    case LossType::ZeroOne:
      return 1.0;
  }
  return 1.0;
}

double loss_logit_gradient(const LossKind& k, double y, double yhat) {
  switch (k.type) {
    case LossType::BinaryCrossEntropy:
      // d/dz of -[y log s(z) + (1-y) log(1-s(z))] for any real y.
      return yhat - y;
    case LossType::SquaredError:
      return 2.0 * (yhat - y) * yhat * (1.0 - yhat);
    case LossType::L1: {
      const double s = yhat > y ? 1.0 : (yhat < y ? -1.0 : 0.0);
      return s * yhat * (1.0 - yhat);
    }
    case LossType::ZeroOne:
      throw std::domain_error("zero-one loss has no usable gradient");
  }
  return 0.0;
}

double partial_loss(const LossKind& k,
                    std::span<const std::pair<double, double>> pairs,
                    std::int64_t denominator) {
  if (denominator == 0) {
    throw DataError("partial_loss: zero denominator");
  }
  double sum = 0.0;
  for (const auto& [y, yhat] : pairs) {
    sum += eval_loss(k, y, yhat);
  }
  return sum / static_cast<double>(denominator);
}

namespace {

struct Triple {
  double a, b, c;
};

void record(ConstraintReport& report, const Triple& t, double lhs, double rhs) {
  // Tiny slack so exact-equality cases are not flagged by rounding noise.
  constexpr double kTol = 1e-12;
  if (lhs <= rhs + kTol) return;
  ++report.n_violations;
  const double gap = lhs - rhs;
  if (!report.worst || gap > report.worst->gap) {
    report.worst = Violation{{t.a, t.b, t.c}, lhs, rhs, gap};
  }
}

}  // namespace

ConstraintReport check_triangle(const LossKind& k, std::int64_t n_samples,
                                std::uint64_t seed) {
  ConstraintReport report;
  report.kind = ConstraintReport::Kind::Triangle;
  report.n_samples = n_samples;
  Rng rng(derive_seed(seed, 0x7161));
  const double lo = k.clamp_eps;
  const double hi = 1.0 - k.clamp_eps;
  for (std::int64_t i = 0; i < n_samples; ++i) {
    Triple t{};
    switch (k.type) {
      case LossType::BinaryCrossEntropy:
        // a, b prediction-like, c a binary label; matches the pattern where
        // the middle element is itself an estimate.
        t = {rng.uniform(lo, hi), rng.uniform(lo, hi),
             rng.bernoulli(0.5) ? 1.0 : 0.0};
        break;
      case LossType::L1:
      case LossType::SquaredError:
        t = {rng.uniform(), rng.uniform(), rng.uniform()};
        break;
      case LossType::ZeroOne:
        // The middle element appears in the target slot, so it must be
        // binary to stay inside the loss's domain.
        t = {rng.uniform(), rng.bernoulli(0.5) ? 1.0 : 0.0,
             rng.bernoulli(0.5) ? 1.0 : 0.0};
        break;
    }
    const double lhs = eval_loss(k, t.c, t.a);
    const double rhs = eval_loss(k, t.b, t.a) + eval_loss(k, t.c, t.b);
    record(report, t, lhs, rhs);
  }
  return report;
}

ConstraintReport check_separability(const LossKind& k, std::int64_t n_samples,
                                    std::uint64_t seed) {
  if (k.type == LossType::ZeroOne) {
    throw std::domain_error(
        "separability is not defined for the zero-one loss");
  }
  ConstraintReport report;
  report.kind = ConstraintReport::Kind::Separability;
  report.n_samples = n_samples;
  Rng rng(derive_seed(seed, 0x5e7a));
  const double lo = k.clamp_eps;
  const double hi = 1.0 - k.clamp_eps;
  for (std::int64_t i = 0; i < n_samples; ++i) {
    const Triple t{rng.uniform(lo, hi), rng.uniform(-1.0, 1.0),
                   rng.uniform(-1.0, 1.0)};
    const double lhs = eval_loss(k, t.c, t.a);
    const double rhs = eval_loss(k, t.b, t.a) + eval_loss(k, t.c - t.b, t.a);
    record(report, t, lhs, rhs);
  }
  return report;
}

std::string ConstraintReport::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"kind\":\""
     << (kind == Kind::Triangle ? "triangle" : "separability") << "\""
     << ",\"n_samples\":" << n_samples << ",\"n_violations\":" << n_violations;
  if (worst) {
    os << ",\"worst\":{\"inputs\":[" << worst->inputs[0] << ","
       << worst->inputs[1] << "," << worst->inputs[2] << "]"
       << ",\"lhs\":" << worst->lhs << ",\"rhs\":" << worst->rhs
       << ",\"gap\":" << worst->gap << "}";
  }
  os << "}";
  return os.str();
}

}  // namespace dubrec
