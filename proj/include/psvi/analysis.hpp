#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "psvi/matrix.hpp"

namespace psvi::analysis {

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

// Sample Pearson correlation; two-sided p from Student's t with n-2 df.
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double p_value = 1.0;  // two-sided test of slope = 0
  std::size_t n = 0;
  double x_mean = 0.0;
  double sxx = 0.0;
  double residual_var = 0.0;  // SSE / (n - 2)

  double predict(double x0) const { return intercept + slope * x0; }
  // Half-width of the pointwise 95% confidence band for the mean response.
  double conf_band_halfwidth(double x0) const;
};

RegressionResult ols_simple(std::span<const double> x, std::span<const double> y);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool degenerate = false;
};

// Rank H statistic with tie correction; p from chi-squared with k-1 df.
TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// Classic one-way F test.
TestResult anova_oneway(const std::vector<std::vector<double>>& groups);

// Right-continuous empirical CDF.
class Ecdf {
 public:
  explicit Ecdf(std::span<const double> values);

  double operator()(double x) const;
  std::vector<std::pair<double, double>> table(std::span<const double> grid) const;
  const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

// Dissimilarity index in [0, 1]: half the summed absolute share differences.
double dissimilarity_index(std::span<const double> tract_minority,
                           std::span<const double> tract_reference);

struct UciResult {
  double local_coefficient = 0.0;
  double proximity_index = 0.0;
  double venables = 0.0;
  double uci = 0.0;
};

// Monocentricity of facilities across tracts: UCI = LC * PI where
// LC = 1/2 * sum |k_i - 1/N| over POI shares and PI = 1 - V / V_max with
// Venables index V = K' D K. V_max comes from the caller's county geometry.
UciResult urban_centrality_index(std::span<const double> tract_poi_counts,
                                 const Matrix& tract_distances, double v_max);

// Average daily visits per census block group, before cross-county scaling.
double human_mobility_index_raw(std::span<const double> cbg_visit_totals, int days = 28);

std::vector<double> minmax_scale(std::span<const double> values);

struct PcaResult {
  Matrix loadings;                       // cols() = components, orthonormal columns
  std::vector<double> explained_ratio;   // descending
  std::vector<double> eigenvalues;       // descending
  Matrix transformed;                    // rows projected onto the components
};

// PCA of a standardized matrix (zero-mean, unit-variance columns). Loading
// signs follow the convention that each component's largest-magnitude loading
// is positive.
PcaResult pca(const Matrix& standardized, int n_components);

// Column-wise standardization helper (population sd), for PCA inputs.
Matrix standardize_columns(const Matrix& x);

struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
  std::size_t n = 0;
};

struct GroupSummary {
  std::map<std::string, BoxStats> by_group;
  std::vector<std::string> warnings;  // empty groups, omitted
};

// Per-group boxplot statistics. Groups declared in `expected_groups` but
// holding no values are omitted with a warning.
GroupSummary group_summary(std::span<const double> values, std::span<const std::string> labels,
                           std::span<const std::string> expected_groups = {});

}  // namespace psvi::analysis
