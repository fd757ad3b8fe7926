#include "dubrec/metrics.hpp"

#include "dubrec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace dubrec {

double auc_score(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DataError("auc_score: size mismatch");
  }
  const std::int64_t n = static_cast<std::int64_t>(scores.size());
  std::int64_t n_pos = 0;
  for (int y : labels) n_pos += y == 1;
  const std::int64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw DataError("auc_score: both classes must be present");
  }
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    return scores[a] < scores[b];
  });
  // Rank-sum with midranks for ties.
  double pos_rank_sum = 0.0;
  std::int64_t i = 0;
  while (i < n) {
    std::int64_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::int64_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) pos_rank_sum += mid_rank;
    }
    i = j;
  }
  const double n_pos_d = static_cast<double>(n_pos);
  return (pos_rank_sum - n_pos_d * (n_pos_d + 1.0) / 2.0) /
         (n_pos_d * static_cast<double>(n_neg));
}

double auc_global(const FactorModel& model, const Dataset& test) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(test.size());
  labels.reserve(test.size());
  for (const Interaction& x : test.interactions()) {
    scores.push_back(model.predict(x.user, x.item));
    labels.push_back(x.label);
  }
  return auc_score(scores, labels);
}

double auc_per_user(const FactorModel& model, const Dataset& test) {
  std::unordered_map<std::int32_t, std::pair<std::vector<double>, std::vector<int>>>
      per_user;
  for (const Interaction& x : test.interactions()) {
    auto& [scores, labels] = per_user[x.user];
    scores.push_back(model.predict(x.user, x.item));
    labels.push_back(x.label);
  }
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& [user, data] : per_user) {
    const auto& [scores, labels] = data;
    const bool has_pos = std::count(labels.begin(), labels.end(), 1) > 0;
    const bool has_neg = std::count(labels.begin(), labels.end(), 0) > 0;
    if (!has_pos || !has_neg) continue;
    sum += auc_score(scores, labels);
    ++n;
  }
  if (n == 0) throw DataError("auc_per_user: no user has both classes");
  return sum / static_cast<double>(n);
}

std::vector<std::int32_t> candidate_items(
    std::int32_t user, std::span<const Dataset* const> train_sets,
    std::int32_t n_items) {
  std::vector<char> seen(n_items, 0);
  for (const Dataset* d : train_sets) {
    for (const Interaction& x : d->interactions()) {
      if (x.user == user) seen[x.item] = 1;
    }
  }
  std::vector<std::int32_t> out;
  for (std::int32_t i = 0; i < n_items; ++i) {
    if (!seen[i]) out.push_back(i);
  }
  return out;
}

MetricsReport topk_metrics(std::span<const UserRanking> users,
                           std::span<const int> ks,
                           std::optional<int> ndcg_cutoff) {
  MetricsReport report;
  std::map<int, double> hits_at;
  std::map<int, double> recall_at;
  for (int k : ks) {
    hits_at[k] = 0.0;
    recall_at[k] = 0.0;
  }
  double ndcg_sum = 0.0;
  std::int64_t evaluated = 0;
  for (const UserRanking& u : users) {
    if (u.positives.empty() || u.ranking.empty()) continue;
    ++evaluated;
    for (int k : ks) {
      std::int64_t hits = 0;
      const int limit = std::min<int>(k, static_cast<int>(u.ranking.size()));
      for (int r = 0; r < limit; ++r) {
        hits += u.positives.count(u.ranking[r]) > 0;
      }
      hits_at[k] += static_cast<double>(hits) / k;
      recall_at[k] +=
          static_cast<double>(hits) / static_cast<double>(u.positives.size());
    }
    const std::size_t depth =
        ndcg_cutoff ? std::min<std::size_t>(*ndcg_cutoff, u.ranking.size())
                    : u.ranking.size();
    double dcg = 0.0;
    for (std::size_t r = 0; r < depth; ++r) {
      if (u.positives.count(u.ranking[r])) {
        dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
      }
    }
    const std::size_t ideal_depth = std::min<std::size_t>(u.positives.size(), depth);
    double idcg = 0.0;
    for (std::size_t r = 0; r < ideal_depth; ++r) {
      idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
    if (idcg > 0.0) ndcg_sum += dcg / idcg;
  }
  report.n_users_evaluated = evaluated;
  if (evaluated > 0) {
    for (int k : ks) {
      report.precision_at[k] = hits_at[k] / static_cast<double>(evaluated);
      report.recall_at[k] = recall_at[k] / static_cast<double>(evaluated);
    }
    report.ndcg = ndcg_sum / static_cast<double>(evaluated);
  }
  return report;
}

std::vector<UserRanking> rank_users(const FactorModel& model,
                                    std::span<const Dataset* const> train_sets,
                                    const Dataset& test) {
  std::unordered_map<std::int32_t, std::unordered_set<std::int32_t>> positives;
  for (const Interaction& x : test.interactions()) {
    if (x.label == 1) positives[x.user].insert(x.item);
  }
  std::vector<std::int32_t> users;
  users.reserve(positives.size());
  for (const auto& [user, items] : positives) users.push_back(user);
  std::sort(users.begin(), users.end());

  std::vector<UserRanking> out;
  out.reserve(users.size());
  for (std::int32_t user : users) {
    UserRanking r;
    r.user = user;
    r.positives = positives[user];
    r.ranking = candidate_items(user, train_sets, test.n_items());
    const Vector scores = model.predict_items(user);
    std::stable_sort(r.ranking.begin(), r.ranking.end(),
                     [&](std::int32_t a, std::int32_t b) {
                       if (scores[a] != scores[b]) return scores[a] > scores[b];
                       return a < b;
                     });
    out.push_back(std::move(r));
  }
  return out;
}

MetricsReport evaluate_model(const FactorModel& model,
                             std::span<const Dataset* const> train_sets,
                             const Dataset& test, std::span<const int> ks,
                             std::optional<int> ndcg_cutoff) {
  const auto rankings = rank_users(model, train_sets, test);
  MetricsReport report = topk_metrics(rankings, ks, ndcg_cutoff);
  report.auc = auc_global(model, test);
  return report;
}

PopularityReport popularity_report(const FactorModel& model,
                                   const Dataset& s_c, const Dataset& test,
                                   int list_len) {
  const std::int32_t n_items = s_c.n_items();
  std::vector<std::int64_t> freq(n_items, 0);
  for (const Interaction& x : s_c.interactions()) ++freq[x.item];
  std::vector<std::int32_t> by_freq(n_items);
  std::iota(by_freq.begin(), by_freq.end(), 0);
  std::sort(by_freq.begin(), by_freq.end(), [&](std::int32_t a, std::int32_t b) {
    if (freq[a] != freq[b]) return freq[a] > freq[b];
    return a < b;
  });
  const std::int32_t n_popular = std::max<std::int32_t>(1, n_items / 5);

  PopularityReport report;
  report.popular_items.assign(by_freq.begin(), by_freq.begin() + n_popular);
  std::vector<char> is_popular(n_items, 0);
  for (std::int32_t i : report.popular_items) is_popular[i] = 1;

  const Dataset* trains[] = {&s_c};
  const auto rankings = rank_users(model, trains, test);
  std::int64_t slots[2] = {0, 0};
  std::int64_t hits[2] = {0, 0};
  for (const UserRanking& u : rankings) {
    const int limit = std::min<int>(list_len, static_cast<int>(u.ranking.size()));
    for (int r = 0; r < limit; ++r) {
      const std::int32_t item = u.ranking[r];
      const int g = is_popular[item] ? 0 : 1;
      ++slots[g];
      hits[g] += u.positives.count(item) > 0;
    }
  }
  const std::int64_t total_slots = slots[0] + slots[1];
  const std::int64_t total_hits = hits[0] + hits[1];
  auto fill = [&](int g, GroupStats& stats) {
    stats.rec_share = total_slots > 0
                          ? static_cast<double>(slots[g]) / total_slots
                          : 0.0;
    stats.hit_share =
        total_hits > 0 ? static_cast<double>(hits[g]) / total_hits : 0.0;
    stats.utility =
        slots[g] > 0 ? static_cast<double>(hits[g]) / slots[g] : 0.0;
  };
  fill(0, report.popular);
  fill(1, report.unpopular);
  return report;
}

std::vector<double> cumulative_hits(const FactorModel& model,
                                    std::span<const Dataset* const> train_sets,
                                    const Dataset& test, int list_len) {
  const auto rankings = rank_users(model, train_sets, test);
  std::unordered_map<std::int32_t, double> per_user;
  for (const UserRanking& r : rankings) {
    const int limit = std::min<int>(list_len, static_cast<int>(r.ranking.size()));
    std::int64_t hits = 0;
    for (int k = 0; k < limit; ++k) {
      hits += r.positives.count(r.ranking[k]) > 0;
    }
    per_user[r.user] = list_len > 0 ? static_cast<double>(hits) / list_len : 0.0;
  }
  std::vector<double> curve(test.n_users(), 0.0);
  double running = 0.0;
  for (std::int32_t u = 0; u < test.n_users(); ++u) {
    const auto it = per_user.find(u);
    if (it != per_user.end()) running += it->second;
    curve[u] = running;
  }
  return curve;
}

}  // namespace dubrec
