#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "psvi/analysis.hpp"
#include "psvi/errors.hpp"
#include "psvi/rng.hpp"
#include "psvi/stats.hpp"

using namespace psvi;

TEST_SUITE("analysis") {

TEST_CASE("distribution functions match tabulated reference values") {
  // Chi-squared upper tail at the classic 95% critical values.
  CHECK(stats::chi_squared_sf(3.841, 1) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(stats::chi_squared_sf(5.991, 2) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(stats::chi_squared_sf(16.919, 9) == doctest::Approx(0.05).epsilon(1e-3));
  // Student t two-sided 5% points.
  CHECK(stats::student_t_sf(2.228, 10) == doctest::Approx(0.025).epsilon(1e-3));
  CHECK(stats::student_t_sf(1.96, 1e6) == doctest::Approx(0.025).epsilon(1e-3));
  // F distribution critical values.
  CHECK(stats::f_dist_sf(4.103, 2, 10) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(stats::f_dist_sf(3.708, 3, 12) == doctest::Approx(0.0425).epsilon(0.05));
  // Quantile inverts the CDF.
  for (const double p : {0.6, 0.9, 0.975, 0.999})
    CHECK(stats::student_t_cdf(stats::student_t_quantile(p, 7), 7) ==
          doctest::Approx(p).epsilon(1e-9));
}

TEST_CASE("pearson correlation") {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  SUBCASE("perfect correlation") {
    const auto r = analysis::pearson(x, x);
    CHECK(r.r == doctest::Approx(1.0));
    CHECK(r.p_value == doctest::Approx(0.0));
  }
  SUBCASE("perfect anticorrelation") {
    std::vector<double> y;
    for (const double v : x) y.push_back(-v);
    CHECK(analysis::pearson(x, y).r == doctest::Approx(-1.0));
  }
  SUBCASE("affine transforms give sign(a)") {
    Rng rng(3);
    std::vector<double> xs(50);
    for (auto& v : xs) v = rng.uniform();
    std::vector<double> up(50), down(50);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      up[i] = 2.5 * xs[i] + 1.0;
      down[i] = -0.3 * xs[i] + 2.0;
    }
    CHECK(analysis::pearson(xs, up).r == doctest::Approx(1.0));
    CHECK(analysis::pearson(xs, down).r == doctest::Approx(-1.0));
  }
  SUBCASE("independent samples stay near zero") {
    Rng rng(4);
    std::vector<double> a(1000), b(1000);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    CHECK(std::fabs(analysis::pearson(a, b).r) < 0.1);
  }
  SUBCASE("zero variance is an error") {
    const std::vector<double> c{2, 2, 2, 2};
    CHECK_THROWS_AS(analysis::pearson(x, c), DomainError);
  }
}

TEST_CASE("simple regression") {
  SUBCASE("noiseless line") {
    const std::vector<double> x{0, 1, 2, 3, 4};
    std::vector<double> y;
    for (const double v : x) y.push_back(2.0 * v + 1.0);
    const auto r = analysis::ols_simple(x, y);
    CHECK(r.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.intercept == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.r_squared == doctest::Approx(1.0));
  }
  SUBCASE("independent response: weak fit, large p") {
    Rng rng(5);
    std::vector<double> x(500), y(500);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.uniform();
      y[i] = rng.normal();
    }
    const auto r = analysis::ols_simple(x, y);
    CHECK(r.r_squared < 0.02);
    CHECK(r.p_value > 0.05);
  }
  SUBCASE("ten hand points match the closed-form normal equations") {
    const std::vector<double> x{1.0, 2.0, 3.5, 4.0, 5.5, 6.0, 7.2, 8.0, 9.1, 10.0};
    const std::vector<double> y{2.1, 2.9, 4.2, 4.4, 6.0, 6.2, 7.5, 8.1, 9.0, 10.2};
    const auto r = analysis::ols_simple(x, y);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sx += x[i];
      sy += y[i];
      sxx += x[i] * x[i];
      sxy += x[i] * y[i];
    }
    const double n = 10.0;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    CHECK(r.slope == doctest::Approx(slope).epsilon(1e-10));
    CHECK(r.intercept == doctest::Approx(intercept).epsilon(1e-10));
  }
  SUBCASE("r-squared equals the squared correlation") {
    Rng rng(6);
    std::vector<double> x(80), y(80);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.uniform();
      y[i] = 0.7 * x[i] + 0.4 * rng.normal();
    }
    const auto reg = analysis::ols_simple(x, y);
    const auto cor = analysis::pearson(x, y);
    CHECK(reg.r_squared == doctest::Approx(cor.r * cor.r).epsilon(1e-10));
  }
  SUBCASE("confidence band is narrowest at the mean of x") {
    Rng rng(7);
    std::vector<double> x(60), y(60);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.uniform(0.0, 10.0);
      y[i] = 1.0 + 0.5 * x[i] + rng.normal();
    }
    const auto r = analysis::ols_simple(x, y);
    const double at_mean = r.conf_band_halfwidth(r.x_mean);
    CHECK(at_mean < r.conf_band_halfwidth(r.x_mean + 3.0));
    CHECK(at_mean < r.conf_band_halfwidth(r.x_mean - 3.0));
    CHECK(at_mean > 0.0);
  }
  SUBCASE("constant x is an error") {
    const std::vector<double> x{1, 1, 1, 1};
    const std::vector<double> y{1, 2, 3, 4};
    CHECK_THROWS_AS(analysis::ols_simple(x, y), DomainError);
  }
}

TEST_CASE("kruskal-wallis") {
  SUBCASE("identical groups show no separation") {
    const std::vector<std::vector<double>> groups{{1, 2, 3, 4}, {1, 2, 3, 4}};
    const auto r = analysis::kruskal_wallis(groups);
    CHECK(r.statistic == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r.p_value > 0.99);
  }
  SUBCASE("all observations identical sets the degenerate flag") {
    const std::vector<std::vector<double>> groups{{3, 3, 3}, {3, 3, 3}};
    const auto r = analysis::kruskal_wallis(groups);
    CHECK(r.degenerate);
    CHECK(r.p_value == doctest::Approx(1.0));
  }
  SUBCASE("disjoint ranges are detected decisively") {
    Rng rng(8);
    std::vector<std::vector<double>> groups(2);
    for (int i = 0; i < 20; ++i) {
      groups[0].push_back(rng.uniform(0.0, 1.0));
      groups[1].push_back(rng.uniform(5.0, 6.0));
    }
    CHECK(analysis::kruskal_wallis(groups).p_value < 0.001);
  }
  SUBCASE("p stays close to a permutation oracle") {
    Rng rng(9);
    for (int trial = 0; trial < 3; ++trial) {
      std::vector<std::vector<double>> groups(3);
      for (int g = 0; g < 3; ++g)
        for (int i = 0; i < 25; ++i)
          groups[static_cast<std::size_t>(g)].push_back(rng.normal() + 0.3 * g);
      const auto r = analysis::kruskal_wallis(groups);
      Rng prng(trial + 100);
      const double p_perm = oracles::kw_permutation_p(groups, 10000, prng);
      CHECK(std::fabs(r.p_value - p_perm) < 0.02);
    }
  }
  SUBCASE("invariant under strictly monotone transforms") {
    Rng rng(10);
    std::vector<std::vector<double>> groups(3);
    for (int g = 0; g < 3; ++g)
      for (int i = 0; i < 15; ++i)
        groups[static_cast<std::size_t>(g)].push_back(rng.uniform(0.0, 2.0) + 0.2 * g);
    const auto base = analysis::kruskal_wallis(groups);
    auto transformed = groups;
    for (auto& g : transformed)
      for (auto& v : g) v = std::exp(v) + 3.0;
    const auto after = analysis::kruskal_wallis(transformed);
    CHECK(base.statistic == doctest::Approx(after.statistic).epsilon(1e-12));
    CHECK(base.p_value == doctest::Approx(after.p_value).epsilon(1e-12));
  }
}

TEST_CASE("one-way anova") {
  SUBCASE("identical groups give F = 0") {
    const std::vector<std::vector<double>> groups{{1, 2, 3}, {1, 2, 3}};
    CHECK(analysis::anova_oneway(groups).statistic == doctest::Approx(0.0));
  }
  SUBCASE("a five-sigma mean shift is decisive") {
    Rng rng(11);
    std::vector<std::vector<double>> groups(2);
    for (int i = 0; i < 30; ++i) {
      groups[0].push_back(rng.normal());
      groups[1].push_back(rng.normal() + 5.0);
    }
    CHECK(analysis::anova_oneway(groups).p_value < 1e-6);
  }
  SUBCASE("zero within-group variance flags degeneracy") {
    const std::vector<std::vector<double>> same{{2, 2}, {2, 2}};
    const auto r = analysis::anova_oneway(same);
    CHECK(r.degenerate);
    CHECK(r.p_value == doctest::Approx(1.0));
    const std::vector<std::vector<double>> separated{{2, 2}, {3, 3}};
    const auto r2 = analysis::anova_oneway(separated);
    CHECK(r2.degenerate);
    CHECK(r2.p_value == doctest::Approx(0.0));
  }
}

TEST_CASE("empirical cdf") {
  SUBCASE("direct counts") {
    const std::vector<double> v{1, 2, 3};
    analysis::Ecdf f(v);
    CHECK(f(2.0) == doctest::Approx(2.0 / 3.0));
    CHECK(f(0.5) == 0.0);
    CHECK(f(3.0) == 1.0);
    CHECK(f(99.0) == 1.0);
  }
  SUBCASE("uniform sample stays within the DKW band") {
    Rng rng(12);
    std::vector<double> v(1000);
    for (auto& x : v) x = rng.uniform();
    analysis::Ecdf f(v);
    double sup = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const double x = i / 1000.0;
      sup = std::max(sup, std::fabs(f(x) - x));
    }
    CHECK(sup < 1.36 / std::sqrt(1000.0));
  }
}

TEST_CASE("dissimilarity index") {
  SUBCASE("proportional tracts are perfectly even") {
    const std::vector<double> minority{10, 20, 30};
    const std::vector<double> reference{100, 200, 300};
    CHECK(analysis::dissimilarity_index(minority, reference) == doctest::Approx(0.0));
  }
  SUBCASE("complete separation") {
    const std::vector<double> minority{50, 0, 0};
    const std::vector<double> reference{0, 30, 40};
    CHECK(analysis::dissimilarity_index(minority, reference) == doctest::Approx(1.0));
  }
  SUBCASE("random counts match the direct sum") {
    Rng rng(13);
    std::vector<double> a(50), b(50);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = static_cast<double>(rng.uniform_int(1000));
      b[i] = static_cast<double>(rng.uniform_int(1000)) + 1.0;
    }
    double ta = 0, tb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ta += a[i];
      tb += b[i];
    }
    double expected = 0;
    for (std::size_t i = 0; i < a.size(); ++i) expected += std::fabs(a[i] / ta - b[i] / tb);
    expected *= 0.5;
    CHECK(std::fabs(analysis::dissimilarity_index(a, b) - expected) < 1e-12);
  }
  SUBCASE("invariant to uniform scaling of either group") {
    Rng rng(14);
    std::vector<double> a(20), b(20), a_scaled(20);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = rng.uniform(0.0, 100.0);
      b[i] = rng.uniform(1.0, 100.0);
      a_scaled[i] = 7.0 * a[i];
    }
    CHECK(analysis::dissimilarity_index(a, b) ==
          doctest::Approx(analysis::dissimilarity_index(a_scaled, b)).epsilon(1e-12));
  }
  SUBCASE("zero totals are errors") {
    const std::vector<double> z{0, 0};
    const std::vector<double> ok{1, 2};
    CHECK_THROWS_AS(analysis::dissimilarity_index(z, ok), DomainError);
  }
}

TEST_CASE("urban centrality index") {
  SUBCASE("uniform facilities are perfectly polycentric") {
    const std::vector<double> k{10, 10, 10, 10};
    Matrix d(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) d.at(i, j) = i == j ? 0.0 : 1.0;
    const auto r = analysis::urban_centrality_index(k, d, 10.0);
    CHECK(r.local_coefficient == doctest::Approx(0.0));
    CHECK(r.uci == doctest::Approx(0.0));
  }
  SUBCASE("all facilities in one of four tracts") {
    const std::vector<double> k{100, 0, 0, 0};
    Matrix d(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) d.at(i, j) = i == j ? 0.0 : 2.0;
    const auto r = analysis::urban_centrality_index(k, d, 5.0);
    CHECK(r.local_coefficient == doctest::Approx(0.75));
    CHECK(r.venables == doctest::Approx(0.0));  // mass in one tract, zero diagonal
    CHECK(r.proximity_index == doctest::Approx(1.0));
    CHECK(r.uci == doctest::Approx(0.75));
  }
  SUBCASE("random configurations recompute through the formula") {
    Rng rng(15);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 3 + rng.uniform_int(10);
      std::vector<double> counts(n);
      for (auto& c : counts) c = static_cast<double>(rng.uniform_int(50)) + 1.0;
      Matrix d(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          const double dist = rng.uniform(0.1, 3.0);
          d.at(i, j) = dist;
          d.at(j, i) = dist;
        }
      const double vmax = 10.0;
      const auto r = analysis::urban_centrality_index(counts, d, vmax);
      double total = 0;
      for (const double c : counts) total += c;
      double lc = 0;
      for (const double c : counts) lc += std::fabs(c / total - 1.0 / static_cast<double>(n));
      lc *= 0.5;
      double v = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) v += (counts[i] / total) * d.at(i, j) * (counts[j] / total);
      CHECK(std::fabs(r.local_coefficient - lc) < 1e-12);
      CHECK(std::fabs(r.venables - v) < 1e-12);
      CHECK(std::fabs(r.uci - lc * (1.0 - v / vmax)) < 1e-12);
      CHECK(r.uci >= 0.0);
      CHECK(r.uci <= 1.0);
    }
  }
  SUBCASE("a Venables index above v_max is an error") {
    const std::vector<double> k{1, 1};
    Matrix d(2, 2);
    d.at(0, 1) = d.at(1, 0) = 10.0;
    CHECK_THROWS_AS(analysis::urban_centrality_index(k, d, 0.1), DomainError);
  }
}

TEST_CASE("human mobility index") {
  SUBCASE("one visit per day on average") {
    const std::vector<double> visits{28, 28, 28};
    CHECK(analysis::human_mobility_index_raw(visits) == doctest::Approx(1.0));
  }
  SUBCASE("no visits, no mobility") {
    const std::vector<double> visits{0, 0};
    CHECK(analysis::human_mobility_index_raw(visits) == doctest::Approx(0.0));
  }
  SUBCASE("random tables match the direct mean") {
    Rng rng(16);
    std::vector<double> visits(40);
    double total = 0;
    for (auto& v : visits) {
      v = static_cast<double>(rng.uniform_int(500));
      total += v;
    }
    CHECK(analysis::human_mobility_index_raw(visits) ==
          doctest::Approx(total / (28.0 * 40.0)).epsilon(1e-12));
  }
  SUBCASE("cross-county scaling lands on [0, 1]") {
    const std::vector<double> raw{0.5, 1.0, 2.0, 4.0};
    const auto scaled = analysis::minmax_scale(raw);
    CHECK(scaled[0] == doctest::Approx(0.0));
    CHECK(scaled[3] == doctest::Approx(1.0));
  }
  SUBCASE("empty input is an error") {
    CHECK_THROWS_AS(analysis::human_mobility_index_raw(std::vector<double>{}), DomainError);
  }
}

TEST_CASE("principal components") {
  SUBCASE("rank-one data concentrates all variance in one component") {
    Rng rng(17);
    Matrix x(50, 4);
    for (std::size_t r = 0; r < 50; ++r) {
      const double t = rng.normal();
      for (std::size_t c = 0; c < 4; ++c) x.at(r, c) = t * (1.0 + static_cast<double>(c));
    }
    const auto std_x = analysis::standardize_columns(x);
    const auto p = analysis::pca(std_x, 1);
    CHECK(p.explained_ratio[0] == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("isotropic data spreads variance evenly across eight dimensions") {
    Rng rng(18);
    Matrix x(6000, 8);
    for (std::size_t r = 0; r < 6000; ++r)
      for (std::size_t c = 0; c < 8; ++c) x.at(r, c) = rng.normal();
    const auto p = analysis::pca(analysis::standardize_columns(x), 8);
    for (const double ratio : p.explained_ratio) CHECK(ratio == doctest::Approx(0.125).epsilon(0.12));
  }
  SUBCASE("loadings are orthonormal") {
    Rng rng(19);
    Matrix x(100, 6);
    for (std::size_t r = 0; r < 100; ++r) {
      const double a = rng.normal(), b = rng.normal();
      for (std::size_t c = 0; c < 6; ++c)
        x.at(r, c) = a * (c + 1.0) + b * std::cos(static_cast<double>(c)) + 0.7 * rng.normal();
    }
    const auto p = analysis::pca(analysis::standardize_columns(x), 3);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) {
        double dot = 0;
        for (std::size_t f = 0; f < 6; ++f) dot += p.loadings.at(f, a) * p.loadings.at(f, b);
        CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9).scale(1.0));
      }
    // Sign convention: the largest-magnitude loading in each column is positive.
    for (std::size_t c = 0; c < 3; ++c) {
      double best = 0.0;
      for (std::size_t f = 0; f < 6; ++f)
        if (std::fabs(p.loadings.at(f, c)) > std::fabs(best)) best = p.loadings.at(f, c);
      CHECK(best > 0.0);
    }
  }
  SUBCASE("full-rank reconstruction recovers the standardized matrix") {
    Rng rng(20);
    Matrix x(60, 5);
    for (std::size_t r = 0; r < 60; ++r)
      for (std::size_t c = 0; c < 5; ++c) x.at(r, c) = rng.uniform(-2.0, 2.0);
    const auto std_x = analysis::standardize_columns(x);
    const auto p = analysis::pca(std_x, 5);
    for (std::size_t r = 0; r < 60; ++r)
      for (std::size_t c = 0; c < 5; ++c) {
        double rebuilt = 0;
        for (std::size_t k = 0; k < 5; ++k)
          rebuilt += p.transformed.at(r, k) * p.loadings.at(c, k);
        CHECK(std::fabs(rebuilt - std_x.at(r, c)) < 1e-8);
      }
  }
  SUBCASE("rank below the requested components is an error") {
    Matrix x(10, 3);
    Rng rng(21);
    for (std::size_t r = 0; r < 10; ++r) {
      const double t = rng.normal();
      x.at(r, 0) = t;
      x.at(r, 1) = 2 * t;
      x.at(r, 2) = -t;
    }
    CHECK_THROWS_AS(analysis::pca(analysis::standardize_columns(x), 2), DomainError);
  }
}

TEST_CASE("group summaries") {
  SUBCASE("odd-length quartiles with linear interpolation") {
    const std::vector<double> v{1, 2, 3, 4, 5};
    const std::vector<std::string> labels(5, "g");
    const auto s = analysis::group_summary(v, labels);
    const auto& b = s.by_group.at("g");
    CHECK(b.median == doctest::Approx(3.0));
    CHECK(b.q1 == doctest::Approx(2.0));
    CHECK(b.q3 == doctest::Approx(4.0));
    CHECK(b.n == 5);
  }
  SUBCASE("declared but empty groups warn and are omitted") {
    const std::vector<double> v{1, 2};
    const std::vector<std::string> labels{"a", "a"};
    const std::vector<std::string> expected{"a", "b"};
    const auto s = analysis::group_summary(v, labels, expected);
    CHECK(s.by_group.size() == 1);
    REQUIRE(s.warnings.size() == 1);
    CHECK(s.warnings[0].find("'b'") != std::string::npos);
  }
  SUBCASE("random groupings match a sort-based quantile oracle") {
    Rng rng(22);
    std::vector<double> v(300);
    std::vector<std::string> labels(300);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = rng.uniform(0.0, 50.0);
      labels[i] = "g" + std::to_string(rng.uniform_int(4));
    }
    const auto s = analysis::group_summary(v, labels);
    for (const auto& [label, box] : s.by_group) {
      std::vector<double> members;
      for (std::size_t i = 0; i < v.size(); ++i)
        if (labels[i] == label) members.push_back(v[i]);
      std::sort(members.begin(), members.end());
      CHECK(box.n == members.size());
      CHECK(box.min == doctest::Approx(members.front()));
      CHECK(box.max == doctest::Approx(members.back()));
      const auto type7 = [&](double q) {
        const double h = q * static_cast<double>(members.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, members.size() - 1);
        return members[lo] + (h - lo) * (members[hi] - members[lo]);
      };
      CHECK(box.q1 == doctest::Approx(type7(0.25)).epsilon(1e-12));
      CHECK(box.median == doctest::Approx(type7(0.5)).epsilon(1e-12));
      CHECK(box.q3 == doctest::Approx(type7(0.75)).epsilon(1e-12));
    }
  }
}

}  // TEST_SUITE
