#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "psvi/explain.hpp"
#include "psvi/features.hpp"

namespace psvi::scoring {

enum class Rating : int { kMinor = 0, kModerate, kMajor, kSevere, kExtreme };
inline constexpr int kRatingCount = 5;

const char* rating_name(Rating r);
Rating rating_from_name(const std::string& name);

struct PsviRow {
  std::string fips;
  double value = 0.0;   // weighted sum over normalized features
  double score = 0.0;   // percentile in (0, 100]
  Rating rating = Rating::kMinor;
  std::string period;
};

// Weighted sum per county; weights align with the matrix's feature order.
std::vector<double> psvi_values(const features::FeatureMatrix& normalized,
                                const explain::WeightVector& weights);

double dot(std::span<const double> x, std::span<const double> w);

// Percentile by average rank: score = avg_rank / n * 100, ascending.
std::vector<double> percentile_scores(std::span<const double> values);

struct KmeansResult {
  std::vector<int> cluster;             // per value, clusters ordered by centroid ascending
  std::vector<double> centroids;        // ascending
  std::vector<Rating> ratings;          // populated when k == 5
  double silhouette = 0.0;
  double inertia = 0.0;
};

// 1-D k-means with k-means++ seeding, best of n_init restarts by inertia
// (ties to the lowest restart index). Centroids map ascending onto the five
// ratings. Requires at least k distinct values.
KmeansResult kmeans_ratings(std::span<const double> values, int k, std::uint64_t seed,
                            int n_init = 20, int threads = 1);

struct HotspotFlag {
  std::string fips;
  int years_high = 0;  // years rated major, severe or extreme
  std::string tier;    // ">=2", ">=4", ">=6", ">=8" or "=10"
};

// Counties repeatedly rated high across years; the ladder reports the highest
// satisfied tier and drops counties below the >=2 rung.
std::vector<HotspotFlag> hotspots(const std::map<std::string, std::vector<Rating>>& annual_ratings);

// Optional presentation rescale of raw values onto [1, 100].
std::vector<double> rescale_values_1_100(std::span<const double> values);

}  // namespace psvi::scoring
