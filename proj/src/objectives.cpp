#include "dubrec/objectives.hpp"

#include "dubrec/errors.hpp"
#include "dubrec/metrics.hpp"
#include "dubrec/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace dubrec {

Method parse_method(const std::string& name) {
  if (name == "naive") return Method::Naive;
  if (name == "unif") return Method::Unif;
  if (name == "combine") return Method::Combine;
  if (name == "ips") return Method::Ips;
  if (name == "cause") return Method::CausE;
  if (name == "bridge") return Method::Bridge;
  if (name == "dub-ti") return Method::DubTriangle;
  if (name == "dub-sep") return Method::DubSeparability;
  throw ConfigError("unknown method: " + name);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Naive: return "naive";
    case Method::Unif: return "unif";
    case Method::Combine: return "combine";
    case Method::Ips: return "ips";
    case Method::CausE: return "cause";
    case Method::Bridge: return "bridge";
    case Method::DubTriangle: return "dub-ti";
    case Method::DubSeparability: return "dub-sep";
  }
  return "?";
}

bool uses_model_t(Method m) {
  switch (m) {
    case Method::CausE:
    case Method::Bridge:
    case Method::DubTriangle:
    case Method::DubSeparability:
      return true;
    default:
      return false;
  }
}

std::string EpochRecord::csv_header() {
  return "epoch,term_a,term_c,term_d,term_e,reg_c,reg_t,align,objective,"
         "val_auc";
}

std::string EpochRecord::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  os << epoch << ',' << term_a << ',' << term_c << ',' << term_d << ','
     << term_e << ',' << reg_c << ',' << reg_t << ',' << align << ','
     << objective << ',' << val_auc;
  return os.str();
}

std::pair<double, double> naive_bayes_propensity(const Dataset& s_c,
                                                 const Dataset& s_t,
                                                 std::int64_t d_size,
                                                 double floor) {
  if (s_c.size() == 0 || s_t.size() == 0) {
    throw DataError("naive_bayes_propensity: empty input");
  }
  const double p_o = static_cast<double>(s_c.size()) / static_cast<double>(d_size);
  const double p_y1_given_o = s_c.positive_rate();
  const double p_y1 = s_t.positive_rate();
  if (p_y1 == 0.0 || p_y1 == 1.0) {
    throw DataError(
        "naive_bayes_propensity: S_t must contain both labels");
  }
  const double p1 = p_y1_given_o * p_o / p_y1;
  const double p0 = (1.0 - p_y1_given_o) * p_o / (1.0 - p_y1);
  return {std::max(p0, floor), std::max(p1, floor)};
}

namespace {

// Validation AUC used for model selection; a degenerate single-class
// validation set scores 0.5 instead of failing the run.
double validation_auc(const FactorModel& m, const Dataset& val) {
  const std::int64_t pos = val.positives();
  if (pos == 0 || pos == val.size()) return 0.5;
  return auc_global(m, val);
}

std::vector<std::int64_t> identity_order(std::int64_t n) {
  std::vector<std::int64_t> order(n);
  for (std::int64_t i = 0; i < n; ++i) order[i] = i;
  return order;
}

}  // namespace

FactorModel pretrain(const Dataset& train, const Dataset& val,
                     const TrainConfig& cfg, const LossKind& loss,
                     double lambda, std::vector<EpochRecord>* history,
                     std::span<const double> weights,
                     std::int64_t denominator) {
  if (train.size() == 0) throw DataError("pretrain: empty training data");
  if (!weights.empty() &&
      static_cast<std::int64_t>(weights.size()) != train.size()) {
    throw DataError("pretrain: weight vector length mismatch");
  }
  const double denom = static_cast<double>(
      denominator > 0 ? denominator : train.size());

  FactorModel model =
      init_model(train.n_users(), train.n_items(), cfg.rank,
                 derive_seed(cfg.seed, 0x101));
  OptimizerState opt =
      OptimizerState::for_model(model, AdamConfig{.learning_rate = cfg.learning_rate});

  auto data_term = [&](const FactorModel& m) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < train.size(); ++i) {
      const Interaction& x = train.interactions()[i];
      const double w = weights.empty() ? 1.0 : weights[i];
      sum += w * eval_loss(loss, x.label, m.predict(x.user, x.item));
    }
    return sum / denom;
  };
  auto record = [&](std::int32_t epoch, double val_auc) {
    if (!history) return;
    EpochRecord r;
    r.epoch = epoch;
    r.term_c = data_term(model);
    r.reg_c = regularization_value(model, lambda);
    r.objective = r.term_c + r.reg_c;
    r.val_auc = val_auc;
    history->push_back(r);
  };

  FactorModel best = model;
  double best_auc = validation_auc(model, val);
  std::int32_t best_epoch = 0;
  record(0, best_auc);
  std::int32_t since_best = 0;

  auto order = identity_order(train.size());
  GradAccumulator grads(model);
  for (std::int32_t epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, 0x200 + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    for (std::int64_t start = 0; start < train.size();
         start += cfg.batch_size) {
      const std::int64_t end =
          std::min<std::int64_t>(start + cfg.batch_size, train.size());
      grads.reset();
      for (std::int64_t k = start; k < end; ++k) {
        const Interaction& x = train.interactions()[order[k]];
        const double w = weights.empty() ? 1.0 : weights[order[k]];
        grads.add_example(
            model, {x.user, x.item, static_cast<double>(x.label), w / denom},
            loss);
      }
      grads.add_l2_touched(model, 2.0 * lambda);
      adam_step(model, opt, grads);
    }
    const double auc = validation_auc(model, val);
    record(epoch, auc);
    if (auc > best_auc) {
      best_auc = auc;
      best = model;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  (void)best_epoch;
  return best;
}

namespace {

void add_supervised(const FactorModel& model, const LossKind& loss,
                    std::span<const Interaction> batch, double weight,
                    double& value, GradAccumulator* grads) {
  for (const Interaction& x : batch) {
    const double target = static_cast<double>(x.label);
    value += weight * eval_loss(loss, target, model.predict(x.user, x.item));
    if (grads) {
      grads->add_example(model, {x.user, x.item, target, weight}, loss);
    }
  }
}

}  // namespace

StepTerms objective_terms(const MethodConfig& cfg, const FactorModel& model_c,
                          const FactorModel* model_t,
                          const StepBatches& batches, const StepScales& scales,
                          GradAccumulator* grad_c, GradAccumulator* grad_t) {
  if (uses_model_t(cfg.method) && model_t == nullptr) {
    throw DataError("objective_terms: method " + method_name(cfg.method) +
                    " needs the auxiliary model");
  }
  StepTerms t;
  const LossKind& loss = cfg.loss;
  const double d_size = static_cast<double>(scales.d_size);

  switch (cfg.method) {
    case Method::Naive:
    case Method::Unif:
    case Method::Combine: {
      // batches.s_c carries the method's training batch.
      add_supervised(model_c, loss, batches.s_c,
                     1.0 / static_cast<double>(scales.sc_size), t.c, grad_c);
      t.reg_c = regularization_value(model_c, cfg.lambda_c);
      if (grad_c) grad_c->add_l2_touched(model_c, 2.0 * cfg.lambda_c);
      return t;
    }
    case Method::Ips: {
      for (const Interaction& x : batches.s_c) {
        const double p = x.label == 1 ? scales.p1 : scales.p0;
        const double w = 1.0 / (p * d_size);
        const double target = static_cast<double>(x.label);
        t.c += w * eval_loss(loss, target, model_c.predict(x.user, x.item));
        if (grad_c) {
          grad_c->add_example(model_c, {x.user, x.item, target, w}, loss);
        }
      }
      t.reg_c = regularization_value(model_c, cfg.lambda_c);
      if (grad_c) grad_c->add_l2_touched(model_c, 2.0 * cfg.lambda_c);
      return t;
    }
    default:
      break;
  }

  // Joint methods. Term (c) on the non-randomized batch, |D| denominator.
  add_supervised(model_c, loss, batches.s_c, 1.0 / d_size, t.c, grad_c);

  const bool is_dub = cfg.method == Method::DubTriangle ||
                      cfg.method == Method::DubSeparability;
  if (is_dub && !cfg.drop_term_a) {
    add_supervised(model_c, loss, batches.s_t, 1.0 / d_size, t.a, grad_c);
  }

  if (!cfg.drop_term_e) {
    const double w_e = 1.0 / static_cast<double>(scales.st_size);
    if (cfg.method == Method::DubSeparability) {
      // S_t-side correction: the difference target R^t - Rhat^t scored by
      // the main model.
      for (const Interaction& x : batches.s_t) {
        const double target =
            static_cast<double>(x.label) - model_t->predict(x.user, x.item);
        t.e += w_e *
               eval_loss(loss, target, model_c.predict(x.user, x.item));
        if (grad_c) {
          grad_c->add_example(model_c, {x.user, x.item, target, w_e}, loss);
        }
      }
    } else {
      // Supervised loss of the auxiliary model on its own data.
      add_supervised(*model_t, loss, batches.s_t, w_e, t.e, grad_t);
    }
  }

  const bool has_alignment_term = cfg.method != Method::CausE;
  if (has_alignment_term && cfg.gamma > 0.0 && scales.sa_size > 0) {
    const double scale = cfg.alignment_plain_mean
                             ? 1.0
                             : static_cast<double>(scales.su_size) / d_size;
    const double w_d = cfg.gamma * scale / static_cast<double>(scales.sa_size);
    for (const Interaction& x : batches.s_a) {
      // Teacher-to-student: the auxiliary prediction is the target.
      const double target = model_t->predict(x.user, x.item);
      t.d += w_d * eval_loss(loss, target, model_c.predict(x.user, x.item));
      if (grad_c) {
        grad_c->add_example(model_c, {x.user, x.item, target, w_d}, loss);
      }
    }
  }

  t.reg_c = regularization_value(model_c, cfg.lambda_c);
  if (grad_c) grad_c->add_l2_touched(model_c, 2.0 * cfg.lambda_c);
  const bool trains_model_t = cfg.method != Method::DubSeparability;
  if (trains_model_t) {
    t.reg_t = regularization_value(*model_t, cfg.lambda_t);
    if (grad_t) grad_t->add_l2_touched(*model_t, 2.0 * cfg.lambda_t);
  }
  if (cfg.method == Method::CausE && cfg.gamma_tc > 0.0) {
    t.align = cfg.gamma_tc * param_distance(model_c, *model_t);
    if (grad_c) grad_c->add_frobenius_pull(model_c, *model_t, cfg.gamma_tc);
    if (grad_t) grad_t->add_frobenius_pull(*model_t, model_c, cfg.gamma_tc);
  }
  return t;
}

TrainResult train(const MethodConfig& mcfg, const TrainConfig& tcfg,
                  const Dataset& s_c, const Dataset& s_t,
                  const Dataset& s_va) {
  if (s_va.size() == 0) {
    throw DataError("train: validation data required for early stopping");
  }
  if (s_c.n_users() != s_t.n_users() || s_c.n_items() != s_t.n_items()) {
    throw DataError("train: S_c and S_t dimensions differ");
  }
  TrainResult result;

  switch (mcfg.method) {
    case Method::Naive:
      result.model_c = pretrain(s_c, s_va, tcfg, mcfg.loss, mcfg.lambda_c,
                                &result.history);
      break;
    case Method::Unif:
      result.model_c = pretrain(s_t, s_va, tcfg, mcfg.loss, mcfg.lambda_c,
                                &result.history);
      break;
    case Method::Combine: {
      const Dataset both = concat(s_c, s_t, Regime::NonRandomized);
      result.model_c =
          pretrain(both, s_va, tcfg, mcfg.loss, mcfg.lambda_c, &result.history);
      break;
    }
    case Method::Ips: {
      const auto [p0, p1] = naive_bayes_propensity(s_c, s_t, s_c.pair_space(),
                                                   mcfg.propensity_floor);
      std::vector<double> weights(s_c.size());
      for (std::int64_t i = 0; i < s_c.size(); ++i) {
        weights[i] = 1.0 / (s_c.interactions()[i].label == 1 ? p1 : p0);
      }
      result.model_c = pretrain(s_c, s_va, tcfg, mcfg.loss, mcfg.lambda_c,
                                &result.history, weights, s_c.pair_space());
      break;
    }
    case Method::CausE:
    case Method::Bridge:
    case Method::DubTriangle:
    case Method::DubSeparability: {
      TrainConfig cfg_c = tcfg;
      cfg_c.seed = derive_seed(tcfg.seed, 0xc0);
      TrainConfig cfg_t = tcfg;
      cfg_t.seed = derive_seed(tcfg.seed, 0xc1);
      FactorModel model_c =
          pretrain(s_c, s_va, cfg_c, mcfg.loss, mcfg.lambda_c);
      FactorModel model_t =
          pretrain(s_t, s_va, cfg_t, mcfg.loss, mcfg.lambda_t);

      StepScales scales;
      scales.d_size = s_c.pair_space();
      scales.sc_size = s_c.size();
      scales.st_size = std::max<std::int64_t>(s_t.size(), 1);
      scales.su_size = scales.d_size - s_c.size() - s_t.size();

      const bool needs_s_a = mcfg.method != Method::CausE;
      // |S_a| matches the per-epoch training sample, capped by what is left
      // unobserved.
      const std::int64_t sa_target =
          needs_s_a ? std::min(s_c.size(), scales.su_size) : 0;

      OptimizerState opt_c = OptimizerState::for_model(
          model_c, AdamConfig{.learning_rate = tcfg.learning_rate});
      OptimizerState opt_t = OptimizerState::for_model(
          model_t, AdamConfig{.learning_rate = tcfg.learning_rate});
      const bool update_t = mcfg.method != Method::DubSeparability;

      auto sample_aux = [&](std::int32_t epoch) {
        if (sa_target <= 0) {
          return Dataset(std::vector<Interaction>{}, s_c.n_users(),
                         s_c.n_items(), Regime::Auxiliary);
        }
        return sample_unobserved(s_c, s_t, sa_target,
                                 derive_seed(tcfg.seed, 0xa000 + epoch));
      };
      auto full_record = [&](std::int32_t epoch, const Dataset& s_a,
                             double val_auc) {
        StepScales full_scales = scales;
        full_scales.sa_size = s_a.size();
        StepTerms t = objective_terms(
            mcfg, model_c, &model_t,
            {s_c.interactions(), s_t.interactions(), s_a.interactions()},
            full_scales);
        EpochRecord r;
        r.epoch = epoch;
        r.term_a = t.a;
        r.term_c = t.c;
        r.term_d = t.d;
        r.term_e = t.e;
        r.reg_c = t.reg_c;
        r.reg_t = t.reg_t;
        r.align = t.align;
        r.objective = t.objective();
        r.val_auc = val_auc;
        result.history.push_back(r);
      };

      FactorModel best_c = model_c;
      FactorModel best_t = model_t;
      double best_auc = validation_auc(model_c, s_va);
      full_record(0, sample_aux(0), best_auc);
      std::int32_t since_best = 0;

      auto order_c = identity_order(s_c.size());
      auto order_t = identity_order(s_t.size());
      GradAccumulator grad_c(model_c);
      GradAccumulator grad_t(model_t);
      std::vector<Interaction> batch_c, batch_t, batch_a;

      for (std::int32_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        const Dataset s_a = sample_aux(epoch);
        StepScales epoch_scales = scales;
        epoch_scales.sa_size = s_a.size();
        Rng rng(derive_seed(tcfg.seed, 0x300 + static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order_c);
        rng.shuffle(order_t);

        const std::int64_t n_c = s_c.size();
        const std::int64_t n_t = s_t.size();
        const std::int64_t n_batches =
            (n_c + tcfg.batch_size - 1) / tcfg.batch_size;
        for (std::int64_t b = 0; b < n_batches; ++b) {
          const std::int64_t c_lo = b * tcfg.batch_size;
          const std::int64_t c_hi = std::min(c_lo + tcfg.batch_size, n_c);
          // The randomized data is spread proportionally over the epoch's
          // batches so each example is seen exactly once per epoch.
          const std::int64_t t_lo = b * n_t / n_batches;
          const std::int64_t t_hi = (b + 1) * n_t / n_batches;

          batch_c.clear();
          for (std::int64_t k = c_lo; k < c_hi; ++k) {
            batch_c.push_back(s_c.interactions()[order_c[k]]);
          }
          batch_t.clear();
          for (std::int64_t k = t_lo; k < t_hi; ++k) {
            batch_t.push_back(s_t.interactions()[order_t[k]]);
          }
          batch_a.clear();
          for (std::int64_t k = c_lo; k < c_hi && k < s_a.size(); ++k) {
            batch_a.push_back(s_a.interactions()[k]);
          }

          grad_c.reset();
          grad_t.reset();
          objective_terms(mcfg, model_c, &model_t,
                          {batch_c, batch_t, batch_a}, epoch_scales, &grad_c,
                          update_t ? &grad_t : nullptr);
          adam_step(model_c, opt_c, grad_c);
          if (update_t) adam_step(model_t, opt_t, grad_t);
        }

        const double auc = validation_auc(model_c, s_va);
        full_record(epoch, s_a, auc);
        if (auc > best_auc) {
          best_auc = auc;
          best_c = model_c;
          best_t = model_t;
          since_best = 0;
        } else if (++since_best >= tcfg.patience) {
          break;
        }
      }
      result.model_c = std::move(best_c);
      result.model_t = std::move(best_t);
      break;
    }
  }

  // best_epoch: argmax of validation AUC, first maximum wins.
  result.best_epoch = 0;
  for (std::size_t i = 1; i < result.history.size(); ++i) {
    if (result.history[i].val_auc >
        result.history[result.best_epoch].val_auc) {
      result.best_epoch = static_cast<std::int32_t>(i);
    }
  }
  return result;
}

std::vector<GridCell> enumerate_grid(const MethodConfig& base_m,
                                     const TrainConfig& base_t,
                                     const GridRanges& ranges) {
  if (ranges.ranks.empty() || ranges.lambdas.empty() || ranges.gammas.empty()) {
    throw ConfigError("grid ranges must be non-empty");
  }
  std::vector<GridCell> cells;
  cells.reserve(ranges.ranks.size() * ranges.lambdas.size() *
                ranges.gammas.size());
  for (std::int32_t rank : ranges.ranks) {
    for (double lambda : ranges.lambdas) {
      for (double gamma : ranges.gammas) {
        GridCell cell;
        cell.method_cfg = base_m;
        cell.method_cfg.lambda_c = lambda;
        cell.method_cfg.lambda_t = lambda;
        if (base_m.method == Method::CausE) {
          cell.method_cfg.gamma_tc = gamma;
        } else {
          cell.method_cfg.gamma = gamma;
        }
        cell.train_cfg = base_t;
        cell.train_cfg.rank = rank;
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

GridResult grid_search(const MethodConfig& base_m, const TrainConfig& base_t,
                       const GridRanges& ranges, const Dataset& s_c,
                       const Dataset& s_t, const Dataset& s_va,
                       const std::function<double(const TrainResult&)>& evaluate,
                       int jobs) {
  auto cells = enumerate_grid(base_m, base_t, ranges);
  const auto eval_fn =
      evaluate ? evaluate : [](const TrainResult& r) {
        return r.history.empty() ? 0.0 : r.history[r.best_epoch].val_auc;
      };

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) break;
      GridCell& cell = cells[i];
      cell.train_cfg.seed = derive_seed(base_t.seed, i);
      const TrainResult r = train(cell.method_cfg, cell.train_cfg, s_c, s_t, s_va);
      cell.metric = eval_fn(r);
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  GridResult result;
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i].metric > cells[best].metric) best = i;
  }
  result.best = cells[best];
  result.cells = std::move(cells);
  return result;
}

}  // namespace dubrec
