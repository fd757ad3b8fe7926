#pragma once

#include "dubrec/data.hpp"
#include "dubrec/types.hpp"

#include <cstdint>
#include <filesystem>

namespace dubrec {

// Generator parameters for a synthetic feedback world with full ground truth.
struct WorldSpec {
  std::int32_t n_users = 0;
  std::int32_t n_items = 0;
  std::int32_t rank_true = 8;     // latent dimension of the generating model
  double popularity_skew = 0.0;   // alpha >= 0, exposure concentration
  double positivity_boost = 1.0;  // >= 1, system's over-exposure of liked items
  std::int64_t impressions_c = 0;
  std::int64_t impressions_t = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Complete counterfactual ground truth: feedback matrices under both logging
// policies plus the policies themselves, so every bound term is computable.
struct SyntheticWorld {
  std::int32_t n_users = 0;
  std::int32_t n_items = 0;
  Matrix r_c;          // complete 0/1 feedback under the stochastic policy
  Matrix r_t;          // complete 0/1 feedback under the uniform policy
  Matrix exposure_c;   // per-pair exposure probability; rows sum to the
                       // per-user impression budget, entries in [0, 1]
  double exposure_t = 0.0;  // single uniform exposure probability
  Matrix preference;   // latent true-preference probabilities
  WorldSpec spec;

  std::int64_t pair_space() const {
    return static_cast<std::int64_t>(n_users) * n_items;
  }
};

// Builds the world deterministically from the spec. Preferences are the
// sigmoid of a low-rank factor product; r_t is elementwise Bernoulli of the
// preference; r_c draws from the preference shifted in logit space by the
// positivity coupling, which inflates feedback on system-favored items;
// exposure_c is proportional to popularity^alpha times boost^score,
// water-filled per user so entries stay in [0, 1].
SyntheticWorld generate_world(const WorldSpec& spec);

enum class LogPolicy { Stochastic, Uniform };

// Samples n (user, item) pairs without replacement according to the policy's
// exposure weights; Stochastic copies labels from r_c (regime NonRandomized),
// Uniform from r_t (regime Randomized). Rows come out sorted by (user, item).
Dataset log_feedback(const SyntheticWorld& w, LogPolicy policy,
                     std::int64_t n_impressions, std::uint64_t seed);

// Directory layout: world.meta (key=value), r_c.csv, r_t.csv (dense 0/1 rows).
void save_world(const SyntheticWorld& w, const std::filesystem::path& dir);

// Reads world.meta, regenerates the world from its spec and checks the stored
// matrices against the regenerated ones.
SyntheticWorld load_world(const std::filesystem::path& dir);

}  // namespace dubrec
