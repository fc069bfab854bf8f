#pragma once

#include <cstddef>
#include <span>

namespace psvi::stats {

double log_gamma(double x);

// Regularized lower incomplete gamma P(a, x).
double reg_gamma_p(double a, double x);

// Regularized incomplete beta I_x(a, b).
double reg_inc_beta(double a, double b, double x);

double normal_cdf(double z);

// Upper-tail probabilities. Degrees of freedom are doubles so the same code
// serves integer and fractional cases.
double chi_squared_sf(double x, double df);
double student_t_cdf(double t, double df);
double student_t_sf(double t, double df);
double f_dist_sf(double f, double df1, double df2);

// Inverse CDF of Student's t by bisection; p in (0, 1).
double student_t_quantile(double p, double df);

double mean(std::span<const double> xs);
double variance(std::span<const double> xs);  // sample variance, n-1 denominator

// Type-7 quantile (linear interpolation between order statistics); q in [0,1].
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace psvi::stats
