#include "dubrec/data.hpp"

#include "dubrec/errors.hpp"
#include "dubrec/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dubrec {

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::NonRandomized: return "non-randomized";
    case Regime::Randomized: return "randomized";
    case Regime::Validation: return "validation";
    case Regime::Test: return "test";
    case Regime::Auxiliary: return "auxiliary";
  }
  return "?";
}

Dataset::Dataset(std::vector<Interaction> interactions, std::int32_t n_users,
                 std::int32_t n_items, Regime regime)
    : interactions_(std::move(interactions)),
      n_users_(n_users),
      n_items_(n_items),
      regime_(regime) {
  if (n_users_ <= 0 || n_items_ <= 0) {
    throw DataError("dataset dimensions must be positive");
  }
  std::unordered_set<std::int64_t> seen;
  seen.reserve(interactions_.size() * 2);
  for (const Interaction& x : interactions_) {
    if (x.user < 0 || x.user >= n_users_ || x.item < 0 || x.item >= n_items_) {
      throw DataError("interaction (" + std::to_string(x.user) + "," +
                      std::to_string(x.item) + ") outside " +
                      std::to_string(n_users_) + "x" + std::to_string(n_items_));
    }
    const bool label_ok =
        regime_ == Regime::Auxiliary ? (x.label == -1 || x.label == 0 || x.label == 1)
                                     : (x.label == 0 || x.label == 1);
    if (!label_ok) {
      throw DataError("label must be 0 or 1 at pair (" +
                      std::to_string(x.user) + "," + std::to_string(x.item) + ")");
    }
    if (!seen.insert(pair_key(x)).second) {
      throw DataError("duplicate pair (" + std::to_string(x.user) + "," +
                      std::to_string(x.item) + ")");
    }
  }
}

std::int64_t Dataset::positives() const {
  std::int64_t n = 0;
  for (const Interaction& x : interactions_) n += x.label == 1;
  return n;
}

double Dataset::positive_rate() const {
  if (interactions_.empty()) return 0.0;
  return static_cast<double>(positives()) / static_cast<double>(size());
}

std::unordered_set<std::int64_t> Dataset::pair_set() const {
  std::unordered_set<std::int64_t> keys;
  keys.reserve(interactions_.size() * 2);
  for (const Interaction& x : interactions_) keys.insert(pair_key(x));
  return keys;
}

void IdMap::extend(const RawRatings& raw) {
  for (const auto& [user, item, rating] : raw.rows) {
    (void)rating;
    users.try_emplace(user, static_cast<std::int32_t>(users.size()));
    items.try_emplace(item, static_cast<std::int32_t>(items.size()));
  }
}

namespace {

bool parse_int(std::string_view field, std::int64_t& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_double(std::string_view field, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(std::string(field), &used);
    return used == field.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<std::string_view> split_fields(std::string_view line) {
  const char sep = line.find('\t') != std::string_view::npos ? '\t' : ',';
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

RawRatings read_ratings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  RawRatings raw;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split_fields(view);
    std::int64_t user = 0;
    std::int64_t item = 0;
    double rating = 0;
    if (fields.size() != 3 || !parse_int(trim(fields[0]), user) ||
        !parse_int(trim(fields[1]), item) ||
        !parse_double(trim(fields[2]), rating)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": malformed row '" + line + "'");
    }
    raw.rows.emplace_back(user, item, rating);
  }
  return raw;
}

Dataset binarize(const RawRatings& raw, double threshold, const IdMap& ids,
                 Regime regime) {
  std::vector<Interaction> interactions;
  interactions.reserve(raw.rows.size());
  for (const auto& [user, item, rating] : raw.rows) {
    Interaction x;
    x.user = ids.users.at(user);
    x.item = ids.items.at(item);
    x.label = rating > threshold ? 1 : 0;
    interactions.push_back(x);
  }
  return Dataset(std::move(interactions), ids.n_users(), ids.n_items(), regime);
}

Dataset load_explicit_ratings(const std::filesystem::path& path,
                              double threshold, Regime regime) {
  const RawRatings raw = read_ratings(path);
  if (raw.rows.empty()) {
    throw DataError(path.string() + ": no interactions");
  }
  IdMap ids;
  ids.extend(raw);
  return binarize(raw, threshold, ids, regime);
}

namespace {

std::array<Dataset, 3> split_impl(const Dataset& d, std::array<double, 3> ratios,
                                  std::uint64_t seed,
                                  std::array<Regime, 3> out_regimes) {
  if (d.size() == 0) {
    throw DataError("cannot split an empty dataset");
  }
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  std::vector<std::int64_t> order(d.size());
  for (std::int64_t i = 0; i < d.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x511));
  rng.shuffle(order);

  const std::int64_t n = d.size();
  std::int64_t n0 = std::llround(ratios[0] * static_cast<double>(n));
  std::int64_t n1 = std::llround(ratios[1] * static_cast<double>(n));
  n0 = std::clamp<std::int64_t>(n0, 0, n);
  n1 = std::clamp<std::int64_t>(n1, 0, n - n0);

  std::array<std::vector<Interaction>, 3> parts;
  for (std::int64_t i = 0; i < n; ++i) {
    const Interaction& x = d.interactions()[order[i]];
    const int slot = i < n0 ? 0 : (i < n0 + n1 ? 1 : 2);
    parts[slot].push_back(x);
  }
  return {Dataset(std::move(parts[0]), d.n_users(), d.n_items(), out_regimes[0]),
          Dataset(std::move(parts[1]), d.n_users(), d.n_items(), out_regimes[1]),
          Dataset(std::move(parts[2]), d.n_users(), d.n_items(), out_regimes[2])};
}

}  // namespace

std::array<Dataset, 3> split_randomized(const Dataset& d,
                                        std::array<double, 3> ratios,
                                        std::uint64_t seed) {
  if (d.regime() != Regime::Randomized) {
    throw DataError("split_randomized expects a randomized dataset");
  }
  return split_impl(d, ratios, seed,
                    {Regime::Randomized, Regime::Validation, Regime::Test});
}

std::array<Dataset, 3> split_general(const Dataset& d, std::uint64_t seed) {
  if (d.regime() != Regime::NonRandomized) {
    throw DataError("split_general expects a non-randomized dataset");
  }
  return split_impl(d, {0.5, 0.2, 0.3}, seed,
                    {Regime::NonRandomized, Regime::Validation, Regime::Test});
}

Dataset remove_overlap(const Dataset& s_c, const Dataset& s_t) {
  if (s_c.n_users() != s_t.n_users() || s_c.n_items() != s_t.n_items()) {
    throw DataError("remove_overlap: dimension mismatch");
  }
  const auto t_pairs = s_t.pair_set();
  std::vector<Interaction> kept;
  kept.reserve(s_c.interactions().size());
  for (const Interaction& x : s_c.interactions()) {
    if (!t_pairs.count(s_c.pair_key(x))) kept.push_back(x);
  }
  return Dataset(std::move(kept), s_c.n_users(), s_c.n_items(), s_c.regime());
}

namespace {

// First k elements of a seeded partial Fisher-Yates permutation of `pool`.
std::vector<std::int64_t> draw_without_replacement(std::vector<std::int64_t> pool,
                                                   std::int64_t k, Rng& rng) {
  const std::int64_t n = static_cast<std::int64_t>(pool.size());
  for (std::int64_t i = 0; i < k; ++i) {
    const std::int64_t j = i + static_cast<std::int64_t>(
                                   rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

Dataset subsample_positive_ratio(const Dataset& s_c, double ratio,
                                 std::int64_t total, std::uint64_t seed) {
  const std::int64_t want_pos = std::llround(ratio * static_cast<double>(total));
  const std::int64_t want_neg = total - want_pos;
  std::vector<std::int64_t> pos_idx;
  std::vector<std::int64_t> neg_idx;
  for (std::int64_t i = 0; i < s_c.size(); ++i) {
    (s_c.interactions()[i].label == 1 ? pos_idx : neg_idx).push_back(i);
  }
  if (static_cast<std::int64_t>(pos_idx.size()) < want_pos) {
    throw DataError("insufficient positives: need " + std::to_string(want_pos) +
                    ", have " + std::to_string(pos_idx.size()));
  }
  if (static_cast<std::int64_t>(neg_idx.size()) < want_neg) {
    throw DataError("insufficient negatives: need " + std::to_string(want_neg) +
                    ", have " + std::to_string(neg_idx.size()));
  }
  Rng rng(derive_seed(seed, 0xa11));
  auto chosen_pos = draw_without_replacement(std::move(pos_idx), want_pos, rng);
  auto chosen_neg = draw_without_replacement(std::move(neg_idx), want_neg, rng);
  std::vector<std::int64_t> chosen;
  chosen.reserve(total);
  chosen.insert(chosen.end(), chosen_pos.begin(), chosen_pos.end());
  chosen.insert(chosen.end(), chosen_neg.begin(), chosen_neg.end());
  rng.shuffle(chosen);
  std::vector<Interaction> out;
  out.reserve(total);
  for (std::int64_t i : chosen) out.push_back(s_c.interactions()[i]);
  return Dataset(std::move(out), s_c.n_users(), s_c.n_items(), s_c.regime());
}

Dataset subsample_fraction(const Dataset& d, double fraction,
                           std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw ConfigError("fraction must be in (0, 1]");
  }
  const std::int64_t k = std::llround(fraction * static_cast<double>(d.size()));
  std::vector<std::int64_t> idx(d.size());
  for (std::int64_t i = 0; i < d.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, 0xf7ac));
  auto chosen = draw_without_replacement(std::move(idx), k, rng);
  std::vector<Interaction> out;
  out.reserve(k);
  for (std::int64_t i : chosen) out.push_back(d.interactions()[i]);
  return Dataset(std::move(out), d.n_users(), d.n_items(), d.regime());
}

Dataset sample_unobserved(const Dataset& s_c, const Dataset& s_t,
                          std::int64_t n, std::uint64_t seed) {
  if (s_c.n_users() != s_t.n_users() || s_c.n_items() != s_t.n_items()) {
    throw DataError("sample_unobserved: dimension mismatch");
  }
  auto observed = s_c.pair_set();
  for (const Interaction& x : s_t.interactions()) observed.insert(s_t.pair_key(x));
  const std::int64_t space = s_c.pair_space();
  const std::int64_t free_pairs = space - static_cast<std::int64_t>(observed.size());
  if (n > free_pairs) {
    throw DataError("sample_unobserved: requested " + std::to_string(n) +
                    " pairs but only " + std::to_string(free_pairs) +
                    " are unobserved");
  }
  Rng rng(derive_seed(seed, 0x5a));
  std::vector<Interaction> out;
  out.reserve(n);
  const std::int32_t n_items = s_c.n_items();
  auto push_key = [&](std::int64_t key) {
    Interaction x;
    x.user = static_cast<std::int32_t>(key / n_items);
    x.item = static_cast<std::int32_t>(key % n_items);
    x.label = -1;
    out.push_back(x);
  };
  if (n * 4 >= free_pairs) {
    // Dense draw: materialize the complement.
    std::vector<std::int64_t> complement;
    complement.reserve(free_pairs);
    for (std::int64_t key = 0; key < space; ++key) {
      if (!observed.count(key)) complement.push_back(key);
    }
    for (std::int64_t key : draw_without_replacement(std::move(complement), n, rng)) {
      push_key(key);
    }
  } else {
    // Sparse draw: rejection against observed plus already-drawn pairs.
    std::unordered_set<std::int64_t> taken;
    taken.reserve(n * 2);
    while (static_cast<std::int64_t>(taken.size()) < n) {
      const std::int64_t key =
          static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(space)));
      if (observed.count(key) || !taken.insert(key).second) continue;
      push_key(key);
    }
  }
  return Dataset(std::move(out), s_c.n_users(), s_c.n_items(), Regime::Auxiliary);
}

Dataset concat(const Dataset& a, const Dataset& b, Regime regime) {
  if (a.n_users() != b.n_users() || a.n_items() != b.n_items()) {
    throw DataError("concat: dimension mismatch");
  }
  std::vector<Interaction> all(a.interactions());
  all.insert(all.end(), b.interactions().begin(), b.interactions().end());
  return Dataset(std::move(all), a.n_users(), a.n_items(), regime);
}

}  // namespace dubrec
