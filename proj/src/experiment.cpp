#include "dubrec/experiment.hpp"

#include "dubrec/errors.hpp"
#include "dubrec/rng.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dubrec {

DataBundle prepare_synthetic_data(const SyntheticWorld& world,
                                  std::int64_t impressions_c,
                                  std::int64_t impressions_t,
                                  std::array<double, 3> ratios,
                                  std::uint64_t seed) {
  DataBundle bundle;
  const Dataset s_c_raw = log_feedback(world, LogPolicy::Stochastic,
                                       impressions_c, derive_seed(seed, 0x5c));
  const Dataset uniform = log_feedback(world, LogPolicy::Uniform,
                                       impressions_t, derive_seed(seed, 0x57));
  auto [s_t, s_va, s_te] =
      split_randomized(uniform, ratios, derive_seed(seed, 0x5b));
  bundle.s_c = remove_overlap(s_c_raw, uniform);
  bundle.s_t = std::move(s_t);
  bundle.s_va = std::move(s_va);
  bundle.s_te = std::move(s_te);
  return bundle;
}

DataBundle prepare_general_eval_data(const Dataset& s_c, const Dataset& s_t,
                                     std::uint64_t seed) {
  DataBundle bundle;
  auto [train, val, test] = split_general(s_c, derive_seed(seed, 0x9e));
  bundle.s_c = std::move(train);
  bundle.s_t = remove_overlap(s_t, bundle.s_c);
  bundle.s_va = std::move(val);
  bundle.s_te = std::move(test);
  return bundle;
}

std::string config_hash(const std::string& canonical) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

std::string canonical_config(const MethodConfig& m, const TrainConfig& t) {
  std::ostringstream os;
  os.precision(17);
  os << "method=" << method_name(m.method) << ";gamma=" << m.gamma
     << ";lambda_c=" << m.lambda_c << ";lambda_t=" << m.lambda_t
     << ";gamma_tc=" << m.gamma_tc << ";loss=" << loss_name(m.loss)
     << ";clamp_eps=" << m.loss.clamp_eps
     << ";propensity_floor=" << m.propensity_floor
     << ";drop_a=" << m.drop_term_a << ";drop_e=" << m.drop_term_e
     << ";plain_mean=" << m.alignment_plain_mean << ";rank=" << t.rank
     << ";lr=" << t.learning_rate << ";max_epochs=" << t.max_epochs
     << ";patience=" << t.patience << ";batch_size=" << t.batch_size
     << ";pretrain_epochs=" << t.pretrain_epochs << ";seed=" << t.seed;
  return os.str();
}

std::string ResultRow::csv_header() {
  return "method,seed,config_hash,best_epoch,val_auc,test_auc,test_ndcg,"
         "p_at_5,p_at_10,r_at_5,r_at_10,n_users_evaluated";
}

std::string ResultRow::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  auto at = [](const std::map<int, double>& m, int k) {
    const auto it = m.find(k);
    return it == m.end() ? 0.0 : it->second;
  };
  os << method << ',' << seed << ',' << config_hash << ',' << best_epoch << ','
     << val_auc << ',' << test_metrics.auc << ',' << test_metrics.ndcg << ','
     << at(test_metrics.precision_at, 5) << ','
     << at(test_metrics.precision_at, 10) << ','
     << at(test_metrics.recall_at, 5) << ',' << at(test_metrics.recall_at, 10)
     << ',' << test_metrics.n_users_evaluated;
  return os.str();
}

ResultRow run_method(const MethodConfig& mcfg, const TrainConfig& tcfg,
                     const DataBundle& data) {
  const TrainResult result = train(mcfg, tcfg, data.s_c, data.s_t, data.s_va);
  ResultRow row;
  row.method = method_name(mcfg.method);
  row.seed = tcfg.seed;
  row.config_hash = config_hash(canonical_config(mcfg, tcfg));
  row.best_epoch = result.best_epoch;
  row.val_auc = result.history.empty()
                    ? 0.0
                    : result.history[result.best_epoch].val_auc;
  const Dataset* trains[] = {&data.s_c, &data.s_t};
  const int ks[] = {5, 10};
  row.test_metrics = evaluate_model(result.model_c, trains, data.s_te, ks);
  return row;
}

void append_csv(const std::filesystem::path& file, const std::string& header,
                const std::string& row) {
  const bool fresh = !std::filesystem::exists(file);
  std::ofstream out(file, std::ios::app);
  if (!out) throw DataError("cannot write " + file.string());
  if (fresh) out << header << '\n';
  out << row << '\n';
}

}  // namespace dubrec
