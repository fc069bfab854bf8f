#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "psvi/matrix.hpp"
#include "psvi/model.hpp"

namespace psvi::explain {

// Per-feature attribution of one prediction, in log-odds units.
// base + sum(shap) equals the predicted margin (local accuracy).
struct Attribution {
  std::vector<double> shap;
  double base = 0.0;  // cover-weighted expected margin of the ensemble
};

// Path-dependent Shapley attribution: conditional expectations descend the
// tree, weighting unfollowed branches by cover fractions. Exact, polynomial
// in tree size.
Attribution tree_shap(const model::TreeEnsemble& ensemble, std::span<const double> x);

// Cover-weighted expected margin; the attribution base value.
double expected_margin(const model::TreeEnsemble& ensemble);

struct ImportanceTable {
  std::vector<std::string> feature_names;
  std::vector<std::string> dimensions;   // one per feature; may be empty labels
  std::vector<double> signed_mean;       // mean shap per feature over the dataset
  std::vector<double> abs_mean;          // mean |shap|
  double base = 0.0;
  std::size_t n_rows = 0;

  // Signed per-dimension totals and their percentage shares (of total
  // absolute dimension mass). Diagnostic output.
  std::map<std::string, double> dimension_totals;
  std::map<std::string, double> dimension_shares;
};

ImportanceTable global_importance(const model::TreeEnsemble& ensemble, const Matrix& rows,
                                  const std::vector<std::string>& dimensions = {},
                                  int threads = 1);

enum class WeightMode { kSigned, kAbsolute, kMinMax };

const char* weight_mode_name(WeightMode mode);
WeightMode weight_mode_from_name(const std::string& name);

struct WeightVector {
  std::vector<double> w;
  WeightMode mode = WeightMode::kSigned;
};

// Importances to index weights, normalized to sum 1.
//   signed   - w_i = s_i / sum(s); negatives stay negative.
//   absolute - w_i = |s_i| / sum|s|.
//   minmax   - affine rescale of s to [0, 1], then normalize.
// A constant importance vector yields uniform weights in every mode.
WeightVector weights_from_shap(const ImportanceTable& table, WeightMode mode = WeightMode::kSigned);

}  // namespace psvi::explain
