#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "psvi/errors.hpp"
#include "psvi/rng.hpp"
#include "psvi/scoring.hpp"

using namespace psvi;

TEST_SUITE("scoring") {

TEST_CASE("index values are weighted sums") {
  features::FeatureMatrix m;
  m.period_tag = "t";
  features::FeatureVector row;
  for (int c = 0; c < features::kFeatureCount; ++c) row[c] = 0.1 * (c + 1);
  m.fips.push_back("01001");
  m.rows.push_back(row);
  features::FeatureVector zero;
  m.fips.push_back("01003");
  m.rows.push_back(zero);

  SUBCASE("one-hot weight projects a single feature") {
    for (int j = 0; j < features::kFeatureCount; ++j) {
      explain::WeightVector w;
      w.w.assign(features::kFeatureCount, 0.0);
      w.w[static_cast<std::size_t>(j)] = 1.0;
      const auto values = scoring::psvi_values(m, w);
      CHECK(values[0] == doctest::Approx(row[j]).epsilon(1e-15));
      CHECK(values[1] == 0.0);
    }
  }
  SUBCASE("random weights match a naive accumulation oracle") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
      explain::WeightVector w;
      for (int c = 0; c < features::kFeatureCount; ++c) w.w.push_back(rng.uniform(-1.0, 1.0));
      features::FeatureMatrix mm;
      mm.fips.push_back("x");
      features::FeatureVector r;
      for (int c = 0; c < features::kFeatureCount; ++c) r[c] = rng.uniform();
      mm.rows.push_back(r);
      const auto values = scoring::psvi_values(mm, w);
      double expected = 0.0;
      for (int c = 0; c < features::kFeatureCount; ++c) expected += r[c] * w.w[static_cast<std::size_t>(c)];
      CHECK(std::fabs(values[0] - expected) < 1e-12);
    }
  }
  SUBCASE("dimension mismatch is an error") {
    explain::WeightVector w;
    w.w.assign(3, 0.1);
    CHECK_THROWS_AS(scoring::psvi_values(m, w), DomainError);
  }
}

TEST_CASE("monotonicity under non-negative weights") {
  Rng rng(14);
  explain::WeightVector w;
  for (int c = 0; c < features::kFeatureCount; ++c) w.w.push_back(rng.uniform());
  for (int probe = 0; probe < 1000; ++probe) {
    features::FeatureMatrix m;
    features::FeatureVector base;
    for (int c = 0; c < features::kFeatureCount; ++c) base[c] = rng.uniform();
    features::FeatureVector bumped = base;
    const int j = static_cast<int>(rng.uniform_int(features::kFeatureCount));
    bumped[j] = std::min(1.0, bumped[j] + rng.uniform(0.0, 0.5));
    m.fips = {"a", "b"};
    m.rows = {base, bumped};
    const auto values = scoring::psvi_values(m, w);
    CHECK(values[1] >= values[0] - 1e-15);
  }
}

TEST_CASE("percentile scores") {
  SUBCASE("rank arithmetic on three values") {
    const std::vector<double> v{1.0, 2.0, 3.0};
    const auto s = scoring::percentile_scores(v);
    CHECK(s[0] == doctest::Approx(100.0 / 3.0));
    CHECK(s[1] == doctest::Approx(200.0 / 3.0));
    CHECK(s[2] == doctest::Approx(100.0));
  }
  SUBCASE("ties share the average rank") {
    const std::vector<double> v{5.0, 5.0, 5.0, 5.0};
    const auto s = scoring::percentile_scores(v);
    for (const double x : s) CHECK(x == doctest::Approx(62.50));
  }
  SUBCASE("the published top spacing appears at n = 3022") {
    std::vector<double> v(3022);
    Rng rng(15);
    for (auto& x : v) x = rng.uniform();
    const auto s = scoring::percentile_scores(v);
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    const auto r2 = [](double x) { return std::round(x * 100.0) / 100.0; };
    CHECK(r2(sorted[3021]) == doctest::Approx(100.00));
    CHECK(r2(sorted[3020]) == doctest::Approx(99.97));
    CHECK(r2(sorted[3019]) == doctest::Approx(99.93));
  }
  SUBCASE("scores depend only on the ordering of values") {
    Rng rng(16);
    std::vector<double> v(200);
    for (auto& x : v) x = rng.uniform(-5.0, 5.0);
    const auto s1 = scoring::percentile_scores(v);
    std::vector<double> transformed(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) transformed[i] = std::exp(0.3 * v[i]) + 7.0;
    const auto s2 = scoring::percentile_scores(transformed);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-12));
  }
}

TEST_CASE("k-means ratings") {
  SUBCASE("five well-separated blobs are recovered exactly") {
    Rng rng(17);
    std::vector<double> values;
    std::vector<int> truth;
    for (int blob = 0; blob < 5; ++blob)
      for (int i = 0; i < 60; ++i) {
        values.push_back(3.0 * (blob + 1) + 0.2 * rng.normal());
        truth.push_back(blob);
      }
    const auto result = scoring::kmeans_ratings(values, 5, 42);
    CHECK(result.silhouette > 0.8);
    for (std::size_t i = 0; i < values.size(); ++i)
      CHECK(static_cast<int>(result.ratings[i]) == truth[i]);
  }
  SUBCASE("five distinct values, five clusters: one rating each, in order") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0, 5.0};
    const auto result = scoring::kmeans_ratings(v, 5, 1);
    CHECK(result.ratings[0] == scoring::Rating::kMinor);
    CHECK(result.ratings[1] == scoring::Rating::kModerate);
    CHECK(result.ratings[2] == scoring::Rating::kMajor);
    CHECK(result.ratings[3] == scoring::Rating::kSevere);
    CHECK(result.ratings[4] == scoring::Rating::kExtreme);
    CHECK(result.silhouette == doctest::Approx(0.0));  // singletons contribute 0
  }
  SUBCASE("shifting all values leaves ratings unchanged") {
    Rng rng(18);
    std::vector<double> v(300);
    for (auto& x : v) x = rng.uniform(0.0, 10.0);
    const auto base = scoring::kmeans_ratings(v, 5, 7);
    std::vector<double> shifted(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) shifted[i] = v[i] + 123.45;
    const auto moved = scoring::kmeans_ratings(shifted, 5, 7);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(base.ratings[i] == moved.ratings[i]);
  }
  SUBCASE("ratings respect value order on random inputs") {
    Rng rng(19);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> v(150);
      for (auto& x : v) x = rng.uniform(0.0, 1.0);
      const auto result = scoring::kmeans_ratings(v, 5, trial);
      for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j)
          if (v[i] < v[j]) CHECK(result.ratings[i] <= result.ratings[j]);
      CHECK(result.silhouette >= -1.0);
      CHECK(result.silhouette <= 1.0);
    }
  }
  SUBCASE("deterministic for a fixed seed") {
    Rng rng(20);
    std::vector<double> v(400);
    for (auto& x : v) x = rng.uniform();
    const auto a = scoring::kmeans_ratings(v, 5, 99, 20, 2);
    const auto b = scoring::kmeans_ratings(v, 5, 99, 20, 1);
    CHECK(a.centroids == b.centroids);
    CHECK(a.inertia == b.inertia);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(a.ratings[i] == b.ratings[i]);
  }
  SUBCASE("fewer than k distinct values is an error") {
    const std::vector<double> v{1.0, 1.0, 2.0, 2.0, 3.0, 3.0};
    CHECK_THROWS_AS(scoring::kmeans_ratings(v, 5, 1), DomainError);
  }
}

TEST_CASE("hotspot tiers") {
  using scoring::Rating;
  SUBCASE("ten high years saturate the ladder") {
    std::map<std::string, std::vector<Rating>> ratings;
    ratings["01001"] = std::vector<Rating>(10, Rating::kSevere);
    const auto flags = scoring::hotspots(ratings);
    REQUIRE(flags.size() == 1);
    CHECK(flags[0].years_high == 10);
    CHECK(flags[0].tier == "=10");
  }
  SUBCASE("a single high year is below the lowest rung") {
    std::map<std::string, std::vector<Rating>> ratings;
    std::vector<Rating> r(9, Rating::kMinor);
    r.push_back(Rating::kMajor);
    ratings["01001"] = r;
    CHECK(scoring::hotspots(ratings).empty());
  }
  SUBCASE("random rating tables match a tally oracle") {
    Rng rng(21);
    std::map<std::string, std::vector<Rating>> ratings;
    std::map<std::string, int> expected_high;
    for (int c = 0; c < 200; ++c) {
      const std::string fips = "c" + std::to_string(c);
      int high = 0;
      std::vector<Rating> r;
      for (int y = 0; y < 10; ++y) {
        const auto rating = static_cast<Rating>(rng.uniform_int(5));
        if (rating >= Rating::kMajor) ++high;
        r.push_back(rating);
      }
      ratings[fips] = r;
      expected_high[fips] = high;
    }
    const auto flags = scoring::hotspots(ratings);
    std::map<std::string, scoring::HotspotFlag> by_fips;
    for (const auto& f : flags) by_fips[f.fips] = f;
    for (const auto& [fips, high] : expected_high) {
      if (high < 2) {
        CHECK(by_fips.count(fips) == 0);
        continue;
      }
      REQUIRE(by_fips.count(fips) == 1);
      CHECK(by_fips[fips].years_high == high);
      const std::string& tier = by_fips[fips].tier;
      if (high == 10) CHECK(tier == "=10");
      else if (high >= 8) CHECK(tier == ">=8");
      else if (high >= 6) CHECK(tier == ">=6");
      else if (high >= 4) CHECK(tier == ">=4");
      else CHECK(tier == ">=2");
    }
  }
}

TEST_CASE("optional value rescale maps onto [1, 100]") {
  const std::vector<double> v{0.2, 0.6, 1.0};
  const auto scaled = scoring::rescale_values_1_100(v);
  CHECK(scaled[0] == doctest::Approx(1.0));
  CHECK(scaled[1] == doctest::Approx(50.5));
  CHECK(scaled[2] == doctest::Approx(100.0));
}

}  // TEST_SUITE
