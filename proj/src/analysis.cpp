#include "psvi/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "psvi/errors.hpp"
#include "psvi/stats.hpp"

namespace psvi::analysis {

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw DomainError("pearson: needs at least 3 observations");

  const double mx = stats::mean(x);
  const double my = stats::mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson: zero variance input");

  PearsonResult out;
  out.n = n;
  out.r = sxy / std::sqrt(sxx * syy);
  out.r = std::clamp(out.r, -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  if (std::fabs(out.r) >= 1.0) {
    out.p_value = 0.0;
  } else {
    const double t = out.r * std::sqrt(df / (1.0 - out.r * out.r));
    out.p_value = 2.0 * stats::student_t_sf(std::fabs(t), df);
  }
  return out;
}

double RegressionResult::conf_band_halfwidth(double x0) const {
  const double df = static_cast<double>(n - 2);
  const double t = stats::student_t_quantile(0.975, df);
  const double se = std::sqrt(residual_var * (1.0 / static_cast<double>(n) +
                                              (x0 - x_mean) * (x0 - x_mean) / sxx));
  return t * se;
}

RegressionResult ols_simple(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("ols_simple: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw DomainError("ols_simple: needs at least 3 observations");

  const double mx = stats::mean(x);
  const double my = stats::mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw DomainError("ols_simple: constant x");

  RegressionResult out;
  out.n = n;
  out.x_mean = mx;
  out.sxx = sxx;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;

  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double resid = y[i] - out.predict(x[i]);
    sse += resid * resid;
  }
  out.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  const double df = static_cast<double>(n - 2);
  out.residual_var = sse / df;
  if (out.residual_var <= 0.0) {
    out.p_value = out.slope == 0.0 ? 1.0 : 0.0;
  } else {
    const double se_slope = std::sqrt(out.residual_var / sxx);
    const double t = out.slope / se_slope;
    out.p_value = 2.0 * stats::student_t_sf(std::fabs(t), df);
  }
  return out;
}

namespace {

// Average ranks (1-based) with ties shared; also returns the tie-correction
// term sum(t^3 - t).
std::pair<std::vector<double>, double> ranks_with_ties(const std::vector<double>& all) {
  const std::size_t n = all.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return all[a] < all[b]; });
  std::vector<double> rank(n);
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && all[order[j + 1]] == all[order[i]]) ++j;
    const double avg = static_cast<double>(i + j + 2) / 2.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    const double ties = static_cast<double>(j - i + 1);
    tie_term += ties * ties * ties - ties;
    i = j + 1;
  }
  return {std::move(rank), tie_term};
}

}  // namespace

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw DomainError("kruskal_wallis: needs at least 2 groups");
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.empty()) throw DomainError("kruskal_wallis: empty group");
    total += g.size();
  }
  if (total < 5) throw DomainError("kruskal_wallis: needs at least 5 observations");

  std::vector<double> all;
  std::vector<std::size_t> group_of;
  all.reserve(total);
  group_of.reserve(total);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (const double v : groups[g]) {
      all.push_back(v);
      group_of.push_back(g);
    }

  TestResult out;
  if (std::all_of(all.begin(), all.end(), [&](double v) { return v == all.front(); })) {
    out.degenerate = true;
    out.statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }

  const auto [rank, tie_term] = ranks_with_ties(all);
  const double nd = static_cast<double>(total);
  std::vector<double> rank_sum(groups.size(), 0.0);
  for (std::size_t i = 0; i < total; ++i) rank_sum[group_of[i]] += rank[i];

  double h = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g)
    h += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
  h = 12.0 / (nd * (nd + 1.0)) * h - 3.0 * (nd + 1.0);

  const double correction = 1.0 - tie_term / (nd * nd * nd - nd);
  if (correction > 0.0) h /= correction;

  out.statistic = h;
  out.p_value = stats::chi_squared_sf(h, static_cast<double>(groups.size() - 1));
  return out;
}

TestResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw DomainError("anova_oneway: needs at least 2 groups");
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw DomainError("anova_oneway: each group needs at least 2 observations");
    total += g.size();
  }

  double grand = 0.0;
  for (const auto& g : groups)
    for (const double v : g) grand += v;
  grand /= static_cast<double>(total);

  double ss_between = 0.0, ss_within = 0.0;
  for (const auto& g : groups) {
    const double m = stats::mean(g);
    ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (const double v : g) ss_within += (v - m) * (v - m);
  }

  const double df_between = static_cast<double>(groups.size() - 1);
  const double df_within = static_cast<double>(total - groups.size());

  TestResult out;
  if (ss_within == 0.0) {
    out.degenerate = true;
    if (ss_between == 0.0) {
      out.statistic = 0.0;
      out.p_value = 1.0;
    } else {
      out.statistic = std::numeric_limits<double>::infinity();
      out.p_value = 0.0;
    }
    return out;
  }
  out.statistic = (ss_between / df_between) / (ss_within / df_within);
  out.p_value = stats::f_dist_sf(out.statistic, df_between, df_within);
  return out;
}

Ecdf::Ecdf(std::span<const double> values) : sorted_(values.begin(), values.end()) {
  if (sorted_.empty()) throw DomainError("ecdf: empty input");
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

std::vector<std::pair<double, double>> Ecdf::table(std::span<const double> grid) const {
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (const double x : grid) out.emplace_back(x, (*this)(x));
  return out;
}

double dissimilarity_index(std::span<const double> tract_minority,
                           std::span<const double> tract_reference) {
  if (tract_minority.size() != tract_reference.size())
    throw DomainError("dissimilarity_index: tract count mismatch");
  double total_x = 0.0, total_y = 0.0;
  for (const double v : tract_minority) total_x += v;
  for (const double v : tract_reference) total_y += v;
  if (total_x <= 0.0 || total_y <= 0.0)
    throw DomainError("dissimilarity_index: group totals must be positive");

  double sum = 0.0;
  for (std::size_t i = 0; i < tract_minority.size(); ++i)
    sum += std::fabs(tract_minority[i] / total_x - tract_reference[i] / total_y);
  return 0.5 * sum;
}

UciResult urban_centrality_index(std::span<const double> tract_poi_counts,
                                 const Matrix& tract_distances, double v_max) {
  const std::size_t n = tract_poi_counts.size();
  if (n == 0) throw DomainError("urban_centrality_index: no tracts");
  if (tract_distances.rows() != n || tract_distances.cols() != n)
    throw DomainError("urban_centrality_index: distance matrix shape mismatch");
  if (v_max <= 0.0) throw DomainError("urban_centrality_index: v_max must be positive");

  double total = 0.0;
  for (const double v : tract_poi_counts) {
    if (v < 0.0) throw DomainError("urban_centrality_index: negative POI count");
    total += v;
  }
  if (total <= 0.0) throw DomainError("urban_centrality_index: no POIs");

  std::vector<double> k(n);
  for (std::size_t i = 0; i < n; ++i) k[i] = tract_poi_counts[i] / total;

  UciResult out;
  const double uniform = 1.0 / static_cast<double>(n);
  double lc = 0.0;
  for (const double ki : k) lc += std::fabs(ki - uniform);
  out.local_coefficient = 0.5 * lc;

  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) v += k[i] * tract_distances.at(i, j) * k[j];
  out.venables = v;
  if (v > v_max)
    throw DomainError("urban_centrality_index: Venables index exceeds v_max");
  out.proximity_index = 1.0 - v / v_max;
  out.uci = out.local_coefficient * out.proximity_index;
  return out;
}

double human_mobility_index_raw(std::span<const double> cbg_visit_totals, int days) {
  if (cbg_visit_totals.empty()) throw DomainError("human_mobility_index: no block groups");
  if (days < 1) throw DomainError("human_mobility_index: days must be >= 1");
  double total = 0.0;
  for (const double v : cbg_visit_totals) {
    if (v < 0.0) throw DomainError("human_mobility_index: negative visit count");
    total += v;
  }
  return total / (static_cast<double>(days) * static_cast<double>(cbg_visit_totals.size()));
}

std::vector<double> minmax_scale(std::span<const double> values) {
  if (values.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(values.size(), 0.0);
  if (hi == lo) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / (hi - lo);
  return out;
}

namespace {

// Cyclic Jacobi eigendecomposition for small symmetric matrices.
void jacobi_eigen(Matrix& a, Matrix& v) {
  const std::size_t n = a.rows();
  v = Matrix(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off < 1e-24) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a.at(p, q)) < 1e-300) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * a.at(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a.at(i, p);
          const double aiq = a.at(i, q);
          a.at(i, p) = c * aip - s * aiq;
          a.at(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a.at(p, i);
          const double aqi = a.at(q, i);
          a.at(p, i) = c * api - s * aqi;
          a.at(q, i) = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v.at(i, p);
          const double viq = v.at(i, q);
          v.at(i, p) = c * vip - s * viq;
          v.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }
}

}  // namespace

Matrix standardize_columns(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const auto col = x.column(c);
    const double m = stats::mean(col);
    double var = 0.0;
    for (const double v : col) var += (v - m) * (v - m);
    var /= static_cast<double>(col.size());
    const double sd = std::sqrt(var);
    if (sd == 0.0) throw DomainError("standardize_columns: column " + std::to_string(c) + " is constant");
    for (std::size_t r = 0; r < x.rows(); ++r) out.at(r, c) = (x.at(r, c) - m) / sd;
  }
  return out;
}

PcaResult pca(const Matrix& standardized, int n_components) {
  const std::size_t n = standardized.rows();
  const std::size_t d = standardized.cols();
  if (n_components < 1 || static_cast<std::size_t>(n_components) > d)
    throw DomainError("pca: invalid component count");
  if (n < static_cast<std::size_t>(n_components)) throw DomainError("pca: fewer rows than components");

  // Covariance of the standardized matrix (population normalization).
  Matrix cov(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += standardized.at(r, a) * standardized.at(r, b);
      s /= static_cast<double>(n);
      cov.at(a, b) = s;
      cov.at(b, a) = s;
    }

  Matrix work = cov;
  Matrix vectors;
  jacobi_eigen(work, vectors);

  std::vector<std::pair<double, std::size_t>> eigen_order(d);
  for (std::size_t i = 0; i < d; ++i) eigen_order[i] = {work.at(i, i), i};
  std::sort(eigen_order.begin(), eigen_order.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  double total_var = 0.0;
  for (const auto& [val, idx] : eigen_order) total_var += std::max(val, 0.0);

  const std::size_t m = static_cast<std::size_t>(n_components);
  std::size_t effective_rank = 0;
  for (const auto& [val, idx] : eigen_order)
    if (val > 1e-10 * std::max(1.0, total_var)) ++effective_rank;
  if (effective_rank < m) throw DomainError("pca: matrix rank below requested components");

  PcaResult out;
  out.loadings = Matrix(d, m);
  out.eigenvalues.resize(m);
  out.explained_ratio.resize(m);
  for (std::size_t c = 0; c < m; ++c) {
    const auto [val, idx] = eigen_order[c];
    out.eigenvalues[c] = std::max(val, 0.0);
    out.explained_ratio[c] = total_var > 0.0 ? out.eigenvalues[c] / total_var : 0.0;
    // Sign convention: largest-magnitude loading is positive.
    double best = 0.0;
    for (std::size_t r = 0; r < d; ++r)
      if (std::fabs(vectors.at(r, idx)) > std::fabs(best)) best = vectors.at(r, idx);
    const double sign = best < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < d; ++r) out.loadings.at(r, c) = sign * vectors.at(r, idx);
  }

  out.transformed = Matrix(n, m);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t f = 0; f < d; ++f) s += standardized.at(r, f) * out.loadings.at(f, c);
      out.transformed.at(r, c) = s;
    }
  return out;
}

GroupSummary group_summary(std::span<const double> values, std::span<const std::string> labels,
                           std::span<const std::string> expected_groups) {
  if (values.size() != labels.size()) throw DomainError("group_summary: length mismatch");
  std::map<std::string, std::vector<double>> grouped;
  for (std::size_t i = 0; i < values.size(); ++i) grouped[labels[i]].push_back(values[i]);

  GroupSummary out;
  for (const std::string& expected : expected_groups)
    if (grouped.find(expected) == grouped.end())
      out.warnings.push_back("group '" + expected + "' is empty; omitted");
  for (auto& [label, xs] : grouped) {
    std::sort(xs.begin(), xs.end());
    BoxStats b;
    b.n = xs.size();
    b.min = xs.front();
    b.max = xs.back();
    b.q1 = stats::quantile_sorted(xs, 0.25);
    b.median = stats::quantile_sorted(xs, 0.5);
    b.q3 = stats::quantile_sorted(xs, 0.75);
    b.mean = stats::mean(xs);
    out.by_group[label] = b;
  }
  return out;
}

}  // namespace psvi::analysis
