#include "psvi/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "psvi/errors.hpp"
#include "psvi/parallel.hpp"
#include "psvi/rng.hpp"

namespace psvi::scoring {

const char* rating_name(Rating r) {
  switch (r) {
    case Rating::kMinor: return "minor";
    case Rating::kModerate: return "moderate";
    case Rating::kMajor: return "major";
    case Rating::kSevere: return "severe";
    case Rating::kExtreme: return "extreme";
  }
  return "minor";
}

Rating rating_from_name(const std::string& name) {
  for (int i = 0; i < kRatingCount; ++i)
    if (name == rating_name(static_cast<Rating>(i))) return static_cast<Rating>(i);
  throw DomainError("unknown rating '" + name + "'");
}

double dot(std::span<const double> x, std::span<const double> w) {
  if (x.size() != w.size()) throw DomainError("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w[i];
  return s;
}

std::vector<double> psvi_values(const features::FeatureMatrix& normalized,
                                const explain::WeightVector& weights) {
  if (weights.w.size() != static_cast<std::size_t>(features::kFeatureCount))
    throw DomainError("psvi_values: weight vector must have 14 entries");
  std::vector<double> out;
  out.reserve(normalized.rows.size());
  for (const features::FeatureVector& row : normalized.rows)
    out.push_back(dot(std::span<const double>(row.v.data(), row.v.size()), weights.w));
  return out;
}

std::vector<double> percentile_scores(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) throw DomainError("percentile_scores: empty input");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> scores(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg_rank = static_cast<double>(i + j + 2) / 2.0;  // 1-based ranks
    const double score = avg_rank / static_cast<double>(n) * 100.0;
    for (std::size_t t = i; t <= j; ++t) scores[order[t]] = score;
    i = j + 1;
  }
  return scores;
}

namespace {

struct SingleKmeans {
  std::vector<double> centroids;
  double inertia = std::numeric_limits<double>::infinity();
};

// Lloyd's algorithm on one k-means++ initialization.
SingleKmeans kmeans_once(std::span<const double> values, int k, Rng rng) {
  const std::size_t n = values.size();
  SingleKmeans result;
  std::vector<double> centers;
  centers.reserve(static_cast<std::size_t>(k));

  // k-means++ seeding.
  centers.push_back(values[rng.uniform_int(n)]);
  std::vector<double> d2(n);
  while (centers.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const double c : centers) best = std::min(best, (values[i] - c) * (values[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // All points coincide with existing centers; place the next center on a
      // distinct value if one exists.
      double pick = centers.back();
      for (std::size_t i = 0; i < n; ++i) {
        bool used = false;
        for (const double c : centers) used = used || values[i] == c;
        if (!used) {
          pick = values[i];
          break;
        }
      }
      centers.push_back(pick);
      continue;
    }
    double target = rng.uniform() * total;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(values[chosen]);
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = std::fabs(values[i] - centers[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[static_cast<std::size_t>(assign[i])] += values[i];
      ++count[static_cast<std::size_t>(assign[i])];
    }
    for (int c = 0; c < k; ++c)
      if (count[static_cast<std::size_t>(c)] > 0)
        centers[static_cast<std::size_t>(c)] =
            sum[static_cast<std::size_t>(c)] / static_cast<double>(count[static_cast<std::size_t>(c)]);
    if (!changed && iter > 0) break;
  }

  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = values[i] - centers[static_cast<std::size_t>(assign[i])];
    inertia += d * d;
  }
  result.centroids = std::move(centers);
  result.inertia = inertia;
  return result;
}

std::vector<int> assign_to_sorted(std::span<const double> values,
                                  const std::vector<double>& centroids) {
  std::vector<int> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double d = std::fabs(values[i] - centroids[c]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    out[i] = best;
  }
  return out;
}

double mean_silhouette(std::span<const double> values, const std::vector<int>& cluster, int k) {
  const std::size_t n = values.size();
  std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
  for (const int c : cluster) ++count[static_cast<std::size_t>(c)];

  double total = 0.0;
  std::vector<double> dist_sum(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      dist_sum[static_cast<std::size_t>(cluster[j])] += std::fabs(values[i] - values[j]);

    const int own = cluster[i];
    const std::size_t own_count = count[static_cast<std::size_t>(own)];
    if (own_count <= 1) continue;  // singleton clusters contribute 0

    const double a = dist_sum[static_cast<std::size_t>(own)] / static_cast<double>(own_count - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own || count[static_cast<std::size_t>(c)] == 0) continue;
      b = std::min(b, dist_sum[static_cast<std::size_t>(c)] /
                          static_cast<double>(count[static_cast<std::size_t>(c)]));
    }
    if (std::isfinite(b) && std::max(a, b) > 0.0) total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

}  // namespace

KmeansResult kmeans_ratings(std::span<const double> values, int k, std::uint64_t seed, int n_init,
                            int threads) {
  if (k < 2) throw DomainError("kmeans_ratings: k must be >= 2");
  if (n_init < 1) throw DomainError("kmeans_ratings: n_init must be >= 1");
  const std::set<double> distinct(values.begin(), values.end());
  if (distinct.size() < static_cast<std::size_t>(k))
    throw DomainError("kmeans_ratings: needs at least k distinct values");

  Rng rng(seed);
  std::vector<SingleKmeans> runs(static_cast<std::size_t>(n_init));
  std::vector<Rng> run_rngs;
  run_rngs.reserve(static_cast<std::size_t>(n_init));
  for (int r = 0; r < n_init; ++r) run_rngs.push_back(rng.fork(static_cast<std::uint64_t>(r)));

  parallel_for(0, static_cast<std::size_t>(n_init), threads,
               [&](std::size_t r) { runs[r] = kmeans_once(values, k, run_rngs[r]); });

  // Best of n_init by inertia; ties keep the lowest restart index.
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].inertia < runs[best].inertia) best = r;

  KmeansResult out;
  out.centroids = runs[best].centroids;
  std::sort(out.centroids.begin(), out.centroids.end());
  out.cluster = assign_to_sorted(values, out.centroids);
  out.inertia = runs[best].inertia;
  out.silhouette = mean_silhouette(values, out.cluster, k);
  if (k == kRatingCount) {
    out.ratings.reserve(values.size());
    for (const int c : out.cluster) out.ratings.push_back(static_cast<Rating>(c));
  }
  return out;
}

std::vector<HotspotFlag> hotspots(
    const std::map<std::string, std::vector<Rating>>& annual_ratings) {
  std::vector<HotspotFlag> out;
  for (const auto& [fips, ratings] : annual_ratings) {
    int high = 0;
    for (const Rating r : ratings)
      if (r >= Rating::kMajor) ++high;
    if (high < 2) continue;
    HotspotFlag flag;
    flag.fips = fips;
    flag.years_high = high;
    if (high == 10)
      flag.tier = "=10";
    else if (high >= 8)
      flag.tier = ">=8";
    else if (high >= 6)
      flag.tier = ">=6";
    else if (high >= 4)
      flag.tier = ">=4";
    else
      flag.tier = ">=2";
    out.push_back(std::move(flag));
  }
  return out;
}

std::vector<double> rescale_values_1_100(std::span<const double> values) {
  if (values.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(values.size(), 1.0);
  if (hi == lo) return out;
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = 1.0 + (values[i] - lo) / (hi - lo) * 99.0;
  return out;
}

}  // namespace psvi::scoring
