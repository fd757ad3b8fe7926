#pragma once

#include "dubrec/data.hpp"
#include "dubrec/model.hpp"
#include "dubrec/types.hpp"

#include <map>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

namespace dubrec {

struct MetricsReport {
  double auc = 0.0;
  double ndcg = 0.0;
  std::map<int, double> precision_at;  // K -> P@K
  std::map<int, double> recall_at;     // K -> R@K
  std::int64_t n_users_evaluated = 0;
};

// Probability that a uniformly random positive outranks a uniformly random
// negative; ties count one half. Throws DataError when only one class is
// present.
double auc_score(std::span<const double> scores, std::span<const int> labels);

// Pointwise AUC over all test interactions under a model.
double auc_global(const FactorModel& model, const Dataset& test);

// Per-user-averaged AUC over users with both classes in the test set.
double auc_per_user(const FactorModel& model, const Dataset& test);

// All items the user has not interacted with in any provided training set,
// ascending item order.
std::vector<std::int32_t> candidate_items(
    std::int32_t user, std::span<const Dataset* const> train_sets,
    std::int32_t n_items);

// One user's candidate ranking (best first) plus their test positives.
struct UserRanking {
  std::int32_t user = 0;
  std::vector<std::int32_t> ranking;
  std::unordered_set<std::int32_t> positives;
};

// P@K, R@K over the given cutoffs and full-list nDCG with binary gains
// (optionally truncated at ndcg_cutoff), averaged over users with at least
// one test positive.
MetricsReport topk_metrics(std::span<const UserRanking> users,
                           std::span<const int> ks,
                           std::optional<int> ndcg_cutoff = std::nullopt);

// Rank the candidates of every test-positive user under the model; ties break
// by ascending item id.
std::vector<UserRanking> rank_users(const FactorModel& model,
                                    std::span<const Dataset* const> train_sets,
                                    const Dataset& test);

// Global AUC plus ranking metrics in one report.
MetricsReport evaluate_model(const FactorModel& model,
                             std::span<const Dataset* const> train_sets,
                             const Dataset& test,
                             std::span<const int> ks,
                             std::optional<int> ndcg_cutoff = std::nullopt);

struct GroupStats {
  double rec_share = 0.0;  // fraction of recommendation slots
  double hit_share = 0.0;  // fraction of hits
  double utility = 0.0;    // hit probability / recommendation probability
};

struct PopularityReport {
  std::vector<std::int32_t> popular_items;  // top 20% by training frequency
  GroupStats popular;
  GroupStats unpopular;
};

// Splits items into popular (top 20% by S_c frequency) and the rest, then
// aggregates recommendation-slot shares, hit shares and utilities over
// top-`list_len` lists.
PopularityReport popularity_report(const FactorModel& model,
                                   const Dataset& s_c, const Dataset& test,
                                   int list_len);

// Cumulative sum over ascending user index of each user's top-`list_len` hit
// probability (hits / list length); monotone non-decreasing.
std::vector<double> cumulative_hits(const FactorModel& model,
                                    std::span<const Dataset* const> train_sets,
                                    const Dataset& test, int list_len);

}  // namespace dubrec
