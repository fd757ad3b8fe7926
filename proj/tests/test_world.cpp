#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dubrec/errors.hpp"
#include "dubrec/world.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

using namespace dubrec;

namespace {

WorldSpec small_spec() {
  WorldSpec spec;
  spec.n_users = 50;
  spec.n_items = 30;
  spec.rank_true = 4;
  spec.impressions_c = 600;
  spec.impressions_t = 300;
  spec.seed = 21;
  return spec;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("world shapes and value domains") {
  const SyntheticWorld w = generate_world(small_spec());
  CHECK(w.r_t.rows() == 50);
  CHECK(w.r_t.cols() == 30);
  CHECK(w.r_c.rows() == 50);
  for (int u = 0; u < w.n_users; ++u) {
    for (int i = 0; i < w.n_items; ++i) {
      CHECK((w.r_t(u, i) == 0.0 || w.r_t(u, i) == 1.0));
      CHECK((w.r_c(u, i) == 0.0 || w.r_c(u, i) == 1.0));
      CHECK(w.preference(u, i) > 0.0);
      CHECK(w.preference(u, i) < 1.0);
      CHECK(w.exposure_c(u, i) >= 0.0);
      CHECK(w.exposure_c(u, i) <= 1.0);
    }
  }
  CHECK(w.exposure_t == doctest::Approx(300.0 / 1500.0));
}

TEST_CASE("exposure rows sum to the per-user budget") {
  WorldSpec spec = small_spec();
  spec.popularity_skew = 2.0;
  spec.positivity_boost = 3.0;
  const SyntheticWorld w = generate_world(spec);
  const double budget = 600.0 / 50.0;
  for (int u = 0; u < w.n_users; ++u) {
    CHECK(w.exposure_c.row(u).sum() == doctest::Approx(budget).epsilon(1e-9));
  }
}

TEST_CASE("generation is deterministic in the seed") {
  const SyntheticWorld a = generate_world(small_spec());
  const SyntheticWorld b = generate_world(small_spec());
  CHECK(a.r_c == b.r_c);
  CHECK(a.r_t == b.r_t);
  CHECK(a.exposure_c == b.exposure_c);
  WorldSpec other = small_spec();
  other.seed = 22;
  CHECK(generate_world(other).r_t != a.r_t);
}

TEST_CASE("disabled bias mechanisms give uniform exposure") {
  WorldSpec spec = small_spec();
  spec.popularity_skew = 0.0;
  spec.positivity_boost = 1.0;
  const SyntheticWorld w = generate_world(spec);
  const double expected = 600.0 / 50.0 / 30.0;
  CHECK(w.exposure_c.maxCoeff() == doctest::Approx(expected).epsilon(1e-9));
  CHECK(w.exposure_c.minCoeff() == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("label means converge when bias is off") {
  WorldSpec spec;
  spec.n_users = 400;
  spec.n_items = 300;
  spec.rank_true = 4;
  spec.popularity_skew = 0.0;
  spec.positivity_boost = 1.0;
  spec.impressions_c = 100000;
  spec.impressions_t = 100000;
  spec.seed = 5;
  const SyntheticWorld w = generate_world(spec);
  const Dataset s_c = log_feedback(w, LogPolicy::Stochastic, 100000, 1);
  const Dataset s_t = log_feedback(w, LogPolicy::Uniform, 100000, 2);
  CHECK(std::abs(s_c.positive_rate() - s_t.positive_rate()) < 0.02);
}

TEST_CASE("popularity skew concentrates exposure") {
  WorldSpec spec;
  spec.n_users = 100;
  spec.n_items = 50;
  spec.rank_true = 4;
  spec.popularity_skew = 2.0;
  spec.positivity_boost = 1.0;
  spec.impressions_c = 500;
  spec.impressions_t = 500;

  double top_share_total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    spec.seed = 100 + seed;
    const SyntheticWorld w = generate_world(spec);
    const Dataset s_c = log_feedback(w, LogPolicy::Stochastic, 500, seed);
    std::vector<std::int64_t> count(w.n_items, 0);
    for (const Interaction& x : s_c.interactions()) ++count[x.item];
    std::vector<std::int64_t> sorted = count;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    std::int64_t top = 0, total = 0;
    const int top_k = w.n_items / 5;
    for (int i = 0; i < w.n_items; ++i) {
      total += sorted[i];
      if (i < top_k) top += sorted[i];
    }
    top_share_total += static_cast<double>(top) / static_cast<double>(total);
  }
  CHECK(top_share_total / 10.0 > 0.5);
}

TEST_CASE("the positivity boost inflates the biased log") {
  WorldSpec spec;
  spec.n_users = 100;
  spec.n_items = 60;
  spec.rank_true = 4;
  spec.popularity_skew = 1.0;
  spec.positivity_boost = 3.0;
  spec.impressions_c = 2000;
  spec.impressions_t = 1000;
  double mean_c = 0.0, mean_t = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    spec.seed = 40 + seed;
    const SyntheticWorld w = generate_world(spec);
    mean_c += log_feedback(w, LogPolicy::Stochastic, 2000, seed).positive_rate();
    mean_t += log_feedback(w, LogPolicy::Uniform, 1000, seed).positive_rate();
  }
  CHECK(mean_c / 10.0 > mean_t / 10.0 + 0.02);
}

TEST_CASE("uniform logging covers the space exhaustively") {
  const SyntheticWorld w = generate_world(small_spec());
  const Dataset d = log_feedback(w, LogPolicy::Uniform, w.pair_space(), 3);
  CHECK(d.size() == w.pair_space());
  CHECK(d.regime() == Regime::Randomized);
  for (const Interaction& x : d.interactions()) {
    CHECK(static_cast<double>(x.label) == w.r_t(x.user, x.item));
  }
}

TEST_CASE("uniform logging is balanced across items") {
  const SyntheticWorld w = generate_world(small_spec());
  std::vector<std::int64_t> count(w.n_items, 0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset d = log_feedback(w, LogPolicy::Uniform, 1000, seed);
    for (const Interaction& x : d.interactions()) ++count[x.item];
  }
  const auto [lo, hi] = std::minmax_element(count.begin(), count.end());
  CHECK(static_cast<double>(*hi) / static_cast<double>(*lo) < 2.0);
}

TEST_CASE("logging rejects oversized draws and is deterministic") {
  const SyntheticWorld w = generate_world(small_spec());
  CHECK_THROWS_AS((void)log_feedback(w, LogPolicy::Uniform, w.pair_space() + 1, 0),
                  DataError);
  const Dataset a = log_feedback(w, LogPolicy::Stochastic, 400, 9);
  const Dataset b = log_feedback(w, LogPolicy::Stochastic, 400, 9);
  REQUIRE(a.size() == b.size());
  for (std::int64_t i = 0; i < a.size(); ++i) {
    CHECK(a.interactions()[i].user == b.interactions()[i].user);
    CHECK(a.interactions()[i].item == b.interactions()[i].item);
  }
  CHECK(a.regime() == Regime::NonRandomized);
}

TEST_CASE("world directory round trip is byte identical") {
  const SyntheticWorld w = generate_world(small_spec());
  const auto dir = std::filesystem::temp_directory_path() / "dubrec_world";
  std::filesystem::remove_all(dir);
  save_world(w, dir);
  const std::string meta1 = file_bytes(dir / "world.meta");
  const std::string rc1 = file_bytes(dir / "r_c.csv");
  save_world(w, dir);
  CHECK(file_bytes(dir / "world.meta") == meta1);
  CHECK(file_bytes(dir / "r_c.csv") == rc1);

  const SyntheticWorld loaded = load_world(dir);
  CHECK(loaded.r_c == w.r_c);
  CHECK(loaded.r_t == w.r_t);
  CHECK(loaded.exposure_c == w.exposure_c);
  std::filesystem::remove_all(dir);
}

TEST_CASE("world spec validation") {
  WorldSpec spec = small_spec();
  spec.impressions_t = spec.impressions_c + 1;
  CHECK_THROWS_AS((void)generate_world(spec), ConfigError);
  spec = small_spec();
  spec.positivity_boost = 0.5;
  CHECK_THROWS_AS((void)generate_world(spec), ConfigError);
  spec = small_spec();
  spec.impressions_c = 50 * 30 + 1;
  CHECK_THROWS_AS((void)generate_world(spec), ConfigError);
}
