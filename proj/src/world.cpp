#include "dubrec/world.hpp"

#include "dubrec/errors.hpp"
#include "dubrec/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

namespace dubrec {

namespace {

// Gain applied to the low-rank logits so preferences spread over (0, 1)
// instead of piling up near 0.5.
constexpr double kLogitGain = 2.0;
// Per-item intercept column, normal with a negative mean: most items are
// broadly disliked and a tail of items is broadly liked. Without it every
// item's mean preference sits at 0.5, so there is neither scarcity of
// positives nor any popularity to skew.
constexpr double kItemInterceptMean = -1.2;
constexpr double kItemInterceptScale = 2.0;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void WorldSpec::validate() const {
  if (n_users <= 0 || n_items <= 0 || rank_true <= 0) {
    throw ConfigError("world spec: counts must be positive");
  }
  if (popularity_skew < 0.0) {
    throw ConfigError("world spec: popularity_skew must be >= 0");
  }
  if (positivity_boost < 1.0) {
    throw ConfigError("world spec: positivity_boost must be >= 1");
  }
  const std::int64_t space = static_cast<std::int64_t>(n_users) * n_items;
  if (impressions_c <= 0 || impressions_t <= 0 || impressions_c > space ||
      impressions_t > space) {
    throw ConfigError("world spec: impressions must be in (0, |D|]");
  }
  if (impressions_t > impressions_c) {
    throw ConfigError("world spec: impressions_t must not exceed impressions_c");
  }
}

SyntheticWorld generate_world(const WorldSpec& spec) {
  spec.validate();
  SyntheticWorld w;
  w.n_users = spec.n_users;
  w.n_items = spec.n_items;
  w.spec = spec;

  Rng rng_factors(derive_seed(spec.seed, 1));
  Matrix user_factors(spec.n_users, spec.rank_true);
  Matrix item_factors(spec.n_items, spec.rank_true);
  for (std::int32_t u = 0; u < spec.n_users; ++u) {
    for (std::int32_t k = 0; k < spec.rank_true; ++k) {
      user_factors(u, k) = rng_factors.normal();
    }
  }
  for (std::int32_t i = 0; i < spec.n_items; ++i) {
    for (std::int32_t k = 0; k < spec.rank_true; ++k) {
      item_factors(i, k) = rng_factors.normal();
    }
  }

  // The intercept column makes the generating model rank_true + 1: a
  // constant user factor times a per-item bias.
  Vector item_intercept(spec.n_items);
  for (std::int32_t i = 0; i < spec.n_items; ++i) {
    item_intercept[i] =
        kItemInterceptMean + kItemInterceptScale * rng_factors.normal();
  }

  const double scale = kLogitGain / std::sqrt(static_cast<double>(spec.rank_true));
  Matrix logits = (user_factors * item_factors.transpose()) * scale;
  logits.rowwise() += item_intercept.transpose();
  w.preference = logits.unaryExpr([](double z) { return sigmoid(z); });

  // Item popularity = mean preference across users; the coupling uses its
  // percentile so boost has a comparable effect at every scale.
  Vector popularity = w.preference.colwise().mean();
  std::vector<std::int32_t> by_pop(spec.n_items);
  std::iota(by_pop.begin(), by_pop.end(), 0);
  std::sort(by_pop.begin(), by_pop.end(), [&](std::int32_t a, std::int32_t b) {
    if (popularity[a] != popularity[b]) return popularity[a] < popularity[b];
    return a < b;
  });
  Vector pop_percentile(spec.n_items);
  for (std::int32_t r = 0; r < spec.n_items; ++r) {
    pop_percentile[by_pop[r]] =
        spec.n_items > 1 ? static_cast<double>(r) / (spec.n_items - 1) : 0.5;
  }

  Rng rng_rt(derive_seed(spec.seed, 2));
  w.r_t.resize(spec.n_users, spec.n_items);
  for (std::int32_t u = 0; u < spec.n_users; ++u) {
    for (std::int32_t i = 0; i < spec.n_items; ++i) {
      w.r_t(u, i) = rng_rt.bernoulli(w.preference(u, i)) ? 1.0 : 0.0;
    }
  }

  // Under the stochastic policy the display context shifts apparent
  // preference toward system-favored (popular) items and away from the rest,
  // which is what creates pseudo-negative feedback.
  const double log_boost = std::log(spec.positivity_boost);
  Rng rng_rc(derive_seed(spec.seed, 3));
  w.r_c.resize(spec.n_users, spec.n_items);
  for (std::int32_t u = 0; u < spec.n_users; ++u) {
    for (std::int32_t i = 0; i < spec.n_items; ++i) {
      const double shifted =
          sigmoid(logits(u, i) + log_boost * (2.0 * pop_percentile[i] - 1.0));
      w.r_c(u, i) = rng_rc.bernoulli(shifted) ? 1.0 : 0.0;
    }
  }

  // Exposure weights: popularity^alpha * boost^score, water-filled per user
  // so the row sums to the per-user impression budget with entries <= 1.
  const double budget =
      static_cast<double>(spec.impressions_c) / spec.n_users;
  w.exposure_c.resize(spec.n_users, spec.n_items);
  std::vector<double> weight(spec.n_items);
  for (std::int32_t u = 0; u < spec.n_users; ++u) {
    for (std::int32_t i = 0; i < spec.n_items; ++i) {
      weight[i] = std::pow(popularity[i] + 1e-9, spec.popularity_skew) *
                  std::pow(spec.positivity_boost, w.preference(u, i));
    }
    std::vector<bool> capped(spec.n_items, false);
    double remaining = budget;
    for (std::int32_t round = 0; round < spec.n_items; ++round) {
      double free_weight = 0.0;
      for (std::int32_t i = 0; i < spec.n_items; ++i) {
        if (!capped[i]) free_weight += weight[i];
      }
      if (free_weight <= 0.0) break;
      bool newly_capped = false;
      for (std::int32_t i = 0; i < spec.n_items; ++i) {
        if (capped[i]) continue;
        const double p = weight[i] / free_weight * remaining;
        if (p >= 1.0) {
          w.exposure_c(u, i) = 1.0;
          capped[i] = true;
          remaining -= 1.0;
          newly_capped = true;
        } else {
          w.exposure_c(u, i) = p;
        }
      }
      if (!newly_capped) break;
    }
  }

  w.exposure_t = static_cast<double>(spec.impressions_t) /
                 static_cast<double>(w.pair_space());
  return w;
}

Dataset log_feedback(const SyntheticWorld& w, LogPolicy policy,
                     std::int64_t n_impressions, std::uint64_t seed) {
  const std::int64_t space = w.pair_space();
  if (n_impressions > space) {
    throw DataError("log_feedback: " + std::to_string(n_impressions) +
                    " impressions exceed the pair space " +
                    std::to_string(space));
  }
  Rng rng(derive_seed(seed, policy == LogPolicy::Uniform ? 0x11 : 0x22));

  // Weighted sampling without replacement via exponential keys: the n pairs
  // with the largest log(u)/w are a weighted draw; uniform weights reduce it
  // to a plain uniform draw.
  std::vector<std::pair<double, std::int64_t>> keyed(space);
  for (std::int64_t key = 0; key < space; ++key) {
    const std::int32_t u = static_cast<std::int32_t>(key / w.n_items);
    const std::int32_t i = static_cast<std::int32_t>(key % w.n_items);
    const double weight =
        policy == LogPolicy::Uniform
            ? 1.0
            : std::max(w.exposure_c(u, i), 1e-12);
    double r = rng.uniform();
    while (r <= 0.0) r = rng.uniform();
    keyed[key] = {std::log(r) / weight, key};
  }
  std::nth_element(keyed.begin(), keyed.begin() + n_impressions, keyed.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::int64_t> chosen(n_impressions);
  for (std::int64_t j = 0; j < n_impressions; ++j) chosen[j] = keyed[j].second;
  std::sort(chosen.begin(), chosen.end());

  const Matrix& labels = policy == LogPolicy::Uniform ? w.r_t : w.r_c;
  std::vector<Interaction> out;
  out.reserve(n_impressions);
  for (std::int64_t key : chosen) {
    Interaction x;
    x.user = static_cast<std::int32_t>(key / w.n_items);
    x.item = static_cast<std::int32_t>(key % w.n_items);
    x.label = static_cast<std::int8_t>(labels(x.user, x.item));
    out.push_back(x);
  }
  return Dataset(std::move(out), w.n_users, w.n_items,
                 policy == LogPolicy::Uniform ? Regime::Randomized
                                              : Regime::NonRandomized);
}

namespace {

void write_binary_matrix(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << static_cast<int>(m(r, c));
    }
    out << '\n';
  }
}

Matrix read_binary_matrix(const std::filesystem::path& path,
                          std::int32_t rows, std::int32_t cols) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Matrix m(rows, cols);
  std::string line;
  for (std::int32_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) {
      throw ParseError(path.string() + ": expected " + std::to_string(rows) +
                       " rows, got " + std::to_string(r));
    }
    std::stringstream ss(line);
    std::string field;
    for (std::int32_t c = 0; c < cols; ++c) {
      if (!std::getline(ss, field, ',')) {
        throw ParseError(path.string() + ":" + std::to_string(r + 1) +
                         ": expected " + std::to_string(cols) + " columns");
      }
      m(r, c) = std::stod(field);
    }
  }
  return m;
}

}  // namespace

void save_world(const SyntheticWorld& w, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream meta(dir / "world.meta");
  if (!meta) throw DataError("cannot write " + (dir / "world.meta").string());
  meta << "n_users=" << w.spec.n_users << '\n'
       << "n_items=" << w.spec.n_items << '\n'
       << "rank_true=" << w.spec.rank_true << '\n'
       << "popularity_skew=" << format_double(w.spec.popularity_skew) << '\n'
       << "positivity_boost=" << format_double(w.spec.positivity_boost) << '\n'
       << "impressions_c=" << w.spec.impressions_c << '\n'
       << "impressions_t=" << w.spec.impressions_t << '\n'
       << "seed=" << w.spec.seed << '\n';
  meta.close();
  write_binary_matrix(w.r_c, dir / "r_c.csv");
  write_binary_matrix(w.r_t, dir / "r_t.csv");
}

SyntheticWorld load_world(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "world.meta");
  if (!meta) throw DataError("cannot open " + (dir / "world.meta").string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(meta, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto pos = line.find('=');
    if (pos == std::string::npos) {
      throw ParseError((dir / "world.meta").string() + ":" +
                       std::to_string(line_no) + ": expected key=value");
    }
    kv[line.substr(0, pos)] = line.substr(pos + 1);
  }
  WorldSpec spec;
  try {
    spec.n_users = std::stoi(kv.at("n_users"));
    spec.n_items = std::stoi(kv.at("n_items"));
    spec.rank_true = std::stoi(kv.at("rank_true"));
    spec.popularity_skew = std::stod(kv.at("popularity_skew"));
    spec.positivity_boost = std::stod(kv.at("positivity_boost"));
    spec.impressions_c = std::stoll(kv.at("impressions_c"));
    spec.impressions_t = std::stoll(kv.at("impressions_t"));
    spec.seed = std::stoull(kv.at("seed"));
  } catch (const std::out_of_range&) {
    throw ParseError((dir / "world.meta").string() + ": missing key");
  }
  SyntheticWorld w = generate_world(spec);
  const Matrix r_c = read_binary_matrix(dir / "r_c.csv", spec.n_users, spec.n_items);
  const Matrix r_t = read_binary_matrix(dir / "r_t.csv", spec.n_users, spec.n_items);
  if (r_c != w.r_c || r_t != w.r_t) {
    throw DataError(dir.string() +
                    ": stored matrices do not match the spec regeneration");
  }
  return w;
}

}  // namespace dubrec
