#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace dubrec {

// Source regime of a logged dataset.
enum class Regime { NonRandomized, Randomized, Validation, Test, Auxiliary };

std::string regime_name(Regime r);

struct Interaction {
  std::int32_t user = 0;
  std::int32_t item = 0;
  // 0 or 1; -1 marks the unset labels of auxiliary pair samples.
  std::int8_t label = 0;
};

// An immutable collection of logged interactions. Construction validates the
// index ranges, the label domain and the no-duplicate-pair invariant.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Interaction> interactions, std::int32_t n_users,
          std::int32_t n_items, Regime regime);

  const std::vector<Interaction>& interactions() const { return interactions_; }
  std::int64_t size() const { return static_cast<std::int64_t>(interactions_.size()); }
  std::int32_t n_users() const { return n_users_; }
  std::int32_t n_items() const { return n_items_; }
  Regime regime() const { return regime_; }

  // |D|: the full user-item pair space.
  std::int64_t pair_space() const {
    return static_cast<std::int64_t>(n_users_) * n_items_;
  }

  std::int64_t positives() const;
  double positive_rate() const;

  // Flat pair index, the key used for overlap and membership checks.
  std::int64_t pair_key(const Interaction& x) const {
    return static_cast<std::int64_t>(x.user) * n_items_ + x.item;
  }
  std::unordered_set<std::int64_t> pair_set() const;

 private:
  std::vector<Interaction> interactions_;
  std::int32_t n_users_ = 0;
  std::int32_t n_items_ = 0;
  Regime regime_ = Regime::NonRandomized;
};

// Raw rows of a ratings file, before id re-indexing.
struct RawRatings {
  std::vector<std::tuple<std::int64_t, std::int64_t, double>> rows;
};

// Dense re-indexing of external user/item ids, shared across files so that
// several datasets agree on one index space.
struct IdMap {
  std::unordered_map<std::int64_t, std::int32_t> users;
  std::unordered_map<std::int64_t, std::int32_t> items;

  std::int32_t n_users() const { return static_cast<std::int32_t>(users.size()); }
  std::int32_t n_items() const { return static_cast<std::int32_t>(items.size()); }
  void extend(const RawRatings& raw);
};

// Reads `user<SEP>item<SEP>rating` rows, tab- or comma-separated, '#' comment
// lines allowed. Malformed rows raise ParseError with the line number.
RawRatings read_ratings(const std::filesystem::path& path);

// Labels raw rows with 1 iff rating > threshold, mapping ids through `ids`
// (which must already cover them). Duplicate pairs raise DataError.
Dataset binarize(const RawRatings& raw, double threshold, const IdMap& ids,
                 Regime regime);

// Single-file convenience: read, densely re-index and binarize.
Dataset load_explicit_ratings(const std::filesystem::path& path,
                              double threshold,
                              Regime regime = Regime::NonRandomized);

// Disjoint exhaustive partition by uniform shuffle; requires a Randomized
// input and tags the outputs Randomized/Validation/Test.
std::array<Dataset, 3> split_randomized(const Dataset& d,
                                        std::array<double, 3> ratios,
                                        std::uint64_t seed);

// Fixed 0.5/0.2/0.3 partition of a NonRandomized dataset, outputs tagged
// NonRandomized/Validation/Test.
std::array<Dataset, 3> split_general(const Dataset& d, std::uint64_t seed);

// S_c minus every interaction whose pair appears in S_t; survivor order kept.
Dataset remove_overlap(const Dataset& s_c, const Dataset& s_t);

// `total` interactions with exactly round(total*ratio) positives, sampled
// uniformly without replacement. Shortfalls raise DataError naming the gap.
Dataset subsample_positive_ratio(const Dataset& s_c, double ratio,
                                 std::int64_t total, std::uint64_t seed);

// Uniform sample without replacement of round(fraction*|d|) interactions.
Dataset subsample_fraction(const Dataset& d, double fraction,
                           std::uint64_t seed);

// n pairs drawn uniformly without replacement from the pairs absent from both
// datasets; labels unset, regime Auxiliary.
Dataset sample_unobserved(const Dataset& s_c, const Dataset& s_t,
                          std::int64_t n, std::uint64_t seed);

// Concatenation of two datasets over the same pair space; pairs must not
// overlap.
Dataset concat(const Dataset& a, const Dataset& b, Regime regime);

}  // namespace dubrec
