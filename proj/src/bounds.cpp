#include "dubrec/bounds.hpp"

#include "dubrec/errors.hpp"
#include "dubrec/rng.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_set>
#include <vector>

namespace dubrec {

void BoundConfig::validate() const {
  if (delta <= 0.0) throw ConfigError("bound config: delta must be positive");
  if (hypothesis_count < 1) {
    throw ConfigError("bound config: hypothesis count must be >= 1");
  }
  if (eta <= 0.0 || eta >= 1.0) {
    throw ConfigError("bound config: eta must be in (0, 1)");
  }
}

namespace {

Matrix prediction_matrix(const SyntheticWorld& world, const FactorModel& m) {
  if (m.n_users() != world.n_users || m.n_items() != world.n_items) {
    throw DataError("model dimensions do not match the world");
  }
  Matrix pred(world.n_users, world.n_items);
  for (std::int32_t u = 0; u < world.n_users; ++u) {
    pred.row(u) = m.predict_items(u).transpose();
  }
  return pred;
}

// Predictions standing in the target slot are treated as labels under the
// zero-one loss.
double as_target(const LossKind& loss, double prediction) {
  return loss.type == LossType::ZeroOne ? std::round(prediction) : prediction;
}

struct IndexSets {
  std::vector<std::int64_t> s_c, s_t, s_u;
};

IndexSets build_index_sets(const SyntheticWorld& world, const Dataset& s_c,
                           const Dataset& s_t) {
  if (s_c.n_users() != world.n_users || s_c.n_items() != world.n_items ||
      s_t.n_users() != world.n_users || s_t.n_items() != world.n_items) {
    throw DataError("dataset dimensions do not match the world");
  }
  IndexSets sets;
  std::unordered_set<std::int64_t> observed;
  observed.reserve((s_c.size() + s_t.size()) * 2);
  for (const Interaction& x : s_c.interactions()) {
    const std::int64_t key = s_c.pair_key(x);
    sets.s_c.push_back(key);
    if (!observed.insert(key).second) {
      throw DataError("S_c and S_t index sets must be disjoint");
    }
  }
  for (const Interaction& x : s_t.interactions()) {
    const std::int64_t key = s_t.pair_key(x);
    sets.s_t.push_back(key);
    if (!observed.insert(key).second) {
      throw DataError("S_c and S_t index sets must be disjoint");
    }
  }
  const std::int64_t space = world.pair_space();
  sets.s_u.reserve(space - static_cast<std::int64_t>(observed.size()));
  for (std::int64_t key = 0; key < space; ++key) {
    if (!observed.count(key)) sets.s_u.push_back(key);
  }
  return sets;
}

template <typename F>
double sum_over(const std::vector<std::int64_t>& keys, std::int32_t n_items,
                F&& f) {
  double sum = 0.0;
  for (std::int64_t key : keys) {
    const std::int32_t u = static_cast<std::int32_t>(key / n_items);
    const std::int32_t i = static_cast<std::int32_t>(key % n_items);
    sum += f(u, i);
  }
  return sum;
}

}  // namespace

double ideal_loss(const SyntheticWorld& world, const FactorModel& model_c,
                  const LossKind& loss) {
  const Matrix pred_c = prediction_matrix(world, model_c);
  double sum = 0.0;
  for (std::int32_t u = 0; u < world.n_users; ++u) {
    for (std::int32_t i = 0; i < world.n_items; ++i) {
      sum += eval_loss(loss, world.r_t(u, i), pred_c(u, i));
    }
  }
  return sum / static_cast<double>(world.pair_space());
}

PropositionTerms proposition_terms(BoundVariant variant,
                                   const SyntheticWorld& world,
                                   const FactorModel& model_c,
                                   const FactorModel& model_t,
                                   const Dataset& s_c, const Dataset& s_t,
                                   const LossKind& loss) {
  if (variant == BoundVariant::Separability &&
      loss.type == LossType::ZeroOne) {
    throw std::domain_error(
        "the separability decomposition is undefined for the zero-one loss");
  }
  const Matrix pred_c = prediction_matrix(world, model_c);
  const Matrix pred_t = prediction_matrix(world, model_t);
  const IndexSets sets = build_index_sets(world, s_c, s_t);
  const double d_size = static_cast<double>(world.pair_space());
  const std::int32_t n_items = world.n_items;

  PropositionTerms terms;
  terms.values[0] = sum_over(sets.s_t, n_items, [&](auto u, auto i) {
    return eval_loss(loss, world.r_t(u, i), pred_c(u, i));
  }) / d_size;
  terms.values[2] = sum_over(sets.s_c, n_items, [&](auto u, auto i) {
    return eval_loss(loss, world.r_c(u, i), pred_c(u, i));
  }) / d_size;
  terms.values[4] = sum_over(sets.s_u, n_items, [&](auto u, auto i) {
    return eval_loss(loss, as_target(loss, pred_t(u, i)), pred_c(u, i));
  }) / d_size;
  if (variant == BoundVariant::Triangle) {
    terms.values[1] = sum_over(sets.s_c, n_items, [&](auto u, auto i) {
      return eval_loss(loss, world.r_t(u, i), world.r_c(u, i));
    }) / d_size;
    terms.values[3] = sum_over(sets.s_u, n_items, [&](auto u, auto i) {
      return eval_loss(loss, world.r_t(u, i), pred_t(u, i));
    }) / d_size;
  } else {
    terms.values[1] = sum_over(sets.s_c, n_items, [&](auto u, auto i) {
      return eval_loss(loss, world.r_t(u, i) - world.r_c(u, i), pred_c(u, i));
    }) / d_size;
    terms.values[3] = sum_over(sets.s_u, n_items, [&](auto u, auto i) {
      return eval_loss(loss, world.r_t(u, i) - pred_t(u, i), pred_c(u, i));
    }) / d_size;
  }
  return terms;
}

double hoeffding_term(const BoundConfig& cfg, std::int64_t s_t_size,
                      std::int64_t d_size) {
  cfg.validate();
  if (s_t_size < 1) throw ConfigError("hoeffding_term: |S_t| must be >= 1");
  const double log_arg =
      std::log(2.0 * static_cast<double>(cfg.hypothesis_count) / cfg.eta);
  return cfg.delta / static_cast<double>(s_t_size) *
         std::sqrt(static_cast<double>(d_size) / 2.0 * log_arg);
}

BoundReport theorem_report(BoundVariant variant, const SyntheticWorld& world,
                           const FactorModel& model_c,
                           const FactorModel& model_t, const Dataset& s_c,
                           const Dataset& s_t, const LossKind& loss,
                           const BoundConfig& cfg) {
  cfg.validate();
  if (s_t.size() == 0) throw DataError("theorem_report: S_t is empty");
  const Matrix pred_c = prediction_matrix(world, model_c);
  const Matrix pred_t = prediction_matrix(world, model_t);
  const IndexSets sets = build_index_sets(world, s_c, s_t);
  const std::int32_t n_items = world.n_items;

  // Pointwise loss behind term (e) / the bias term, per variant.
  auto e_loss = [&](std::int32_t u, std::int32_t i) {
    if (variant == BoundVariant::Triangle) {
      return eval_loss(loss, world.r_t(u, i), pred_t(u, i));
    }
    return eval_loss(loss, world.r_t(u, i) - pred_t(u, i), pred_c(u, i));
  };

  const PropositionTerms prop =
      proposition_terms(variant, world, model_c, model_t, s_c, s_t, loss);

  BoundReport report;
  report.variant = variant;
  report.lhs_ideal = ideal_loss(world, model_c, loss);
  report.term_a = prop.values[0];
  report.term_b = prop.values[1];
  report.term_c = prop.values[2];
  report.term_d = prop.values[4];
  report.term_e =
      sum_over(sets.s_t, n_items, e_loss) / static_cast<double>(s_t.size());
  const double s_u_term = prop.values[3];  // L^{Su} of the replaced quantity
  report.bias_term = s_u_term - report.term_e;
  report.confidence_term = hoeffding_term(cfg, s_t.size(), world.pair_space());
  report.rhs_total = report.term_a + report.term_b + report.term_c +
                     report.term_d + report.term_e + report.bias_term +
                     report.confidence_term;
  report.holds = report.lhs_ideal <= report.rhs_total + 1e-9;

  if (cfg.n_bias_resamples > 0) {
    // Estimate E[L_{|St|}^{St}] over the S_t sampling by fresh uniform draws
    // of the same size from the full pair space.
    const std::int64_t space = world.pair_space();
    const std::int64_t st_size = s_t.size();
    Rng rng(derive_seed(cfg.resample_seed, 0xb1a5));
    std::vector<std::int64_t> pool(space);
    for (std::int64_t k = 0; k < space; ++k) pool[k] = k;
    double mean_of_means = 0.0;
    for (int r = 0; r < cfg.n_bias_resamples; ++r) {
      for (std::int64_t i = 0; i < st_size; ++i) {
        const std::int64_t j =
            i + static_cast<std::int64_t>(
                    rng.below(static_cast<std::uint64_t>(space - i)));
        std::swap(pool[i], pool[j]);
      }
      double sum = 0.0;
      for (std::int64_t i = 0; i < st_size; ++i) {
        const std::int64_t key = pool[i];
        sum += e_loss(static_cast<std::int32_t>(key / n_items),
                      static_cast<std::int32_t>(key % n_items));
      }
      mean_of_means += sum / static_cast<double>(st_size);
    }
    mean_of_means /= cfg.n_bias_resamples;
    report.bias_term_resampled = s_u_term - mean_of_means;
  }
  return report;
}

double BoundReport::rhs_resampled() const {
  return term_a + term_b + term_c + term_d + term_e + bias_term_resampled +
         confidence_term;
}

bool BoundReport::holds_resampled() const {
  return lhs_ideal <= rhs_resampled() + 1e-9;
}

std::string BoundReport::csv_header() {
  return "variant,lhs_ideal,term_a,term_b,term_c,term_d,term_e,bias_term,"
         "bias_term_resampled,confidence_term,rhs_total,holds,holds_resampled";
}

std::string BoundReport::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  os << (variant == BoundVariant::Triangle ? "triangle" : "separability")
     << ',' << lhs_ideal << ',' << term_a << ',' << term_b << ',' << term_c
     << ',' << term_d << ',' << term_e << ',' << bias_term << ','
     << bias_term_resampled << ',' << confidence_term << ',' << rhs_total
     << ',' << (holds ? 1 : 0) << ','
     << (std::isnan(bias_term_resampled) ? (holds ? 1 : 0)
                                         : (holds_resampled() ? 1 : 0));
  return os.str();
}

}  // namespace dubrec
