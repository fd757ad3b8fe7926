#pragma once

#include "dubrec/data.hpp"
#include "dubrec/metrics.hpp"
#include "dubrec/objectives.hpp"
#include "dubrec/world.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

namespace dubrec {

// The four datasets of one experiment: biased training data, randomized
// training data, validation and test.
struct DataBundle {
  Dataset s_c;
  Dataset s_t;
  Dataset s_va;
  Dataset s_te;
};

// Logs S_c under the stochastic policy and a uniform set which is split by
// `ratios` into randomized train/validation/test; pairs of the uniform log
// are removed from S_c so the index sets stay disjoint.
DataBundle prepare_synthetic_data(const SyntheticWorld& world,
                                  std::int64_t impressions_c,
                                  std::int64_t impressions_t,
                                  std::array<double, 3> ratios,
                                  std::uint64_t seed);

// 5:2:3 split of the non-randomized data for the biased general evaluation;
// S_t keeps its role as the unbiased training set.
DataBundle prepare_general_eval_data(const Dataset& s_c, const Dataset& s_t,
                                     std::uint64_t seed);

// FNV-1a over the canonical config text; stable across runs and platforms.
std::string config_hash(const std::string& canonical);

// Canonical one-line description of a run configuration.
std::string canonical_config(const MethodConfig& m, const TrainConfig& t);

struct ResultRow {
  std::string method;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::int32_t best_epoch = 0;
  double val_auc = 0.0;
  MetricsReport test_metrics;

  static std::string csv_header();
  std::string csv_row() const;
};

// Trains one method on the bundle and evaluates the best snapshot on the
// test set (candidates exclude both training sets).
ResultRow run_method(const MethodConfig& mcfg, const TrainConfig& tcfg,
                     const DataBundle& data);

// Appends a row to a CSV file, writing the header first if the file is new.
void append_csv(const std::filesystem::path& file, const std::string& header,
                const std::string& row);

}  // namespace dubrec
