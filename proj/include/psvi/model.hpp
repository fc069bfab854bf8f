#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "psvi/matrix.hpp"

namespace psvi::model {

struct LabeledDataset {
  Matrix x;
  std::vector<int> y;            // 0/1
  std::vector<std::string> ids;  // optional row identifiers, aligned when present

  std::size_t size() const { return y.size(); }
  void validate() const;
  std::size_t count_label(int label) const;
};

struct Hyperparams {
  double gamma = 0.1507;        // minimum split gain
  double learning_rate = 0.0646;
  int max_depth = 9;
  double min_child_weight = 2.0;  // minimum child hessian sum
  int n_estimators = 139;
  double reg_lambda = 1.0;        // L2 on leaf weights
  double subsample = 0.7128;      // per-tree row sampling rate

  void validate() const;
  nlohmann::json to_json() const;
  static Hyperparams from_json(const nlohmann::json& j);
};

// Binary tree stored as a flat node array; nodes[0] is the root.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;  // leaf value (already scaled by learning rate)
  double cover = 0.0;   // training rows routed through this node

  // Training metadata; informative only, not serialized.
  double grad_sum = 0.0;
  double hess_sum = 0.0;
  double gain = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  // Routing: x[feature] < threshold goes left.
  int leaf_for(std::span<const double> x) const;
  double predict(std::span<const double> x) const;
  int depth() const;
};

struct TreeEnsemble {
  double base_score = 0.0;  // prior log-odds
  std::vector<std::string> feature_names;
  std::vector<Tree> trees;

  std::size_t n_features() const { return feature_names.size(); }
  double predict_margin(std::span<const double> x) const;
  double predict_proba(std::span<const double> x) const;

  nlohmann::json to_json() const;
  static TreeEnsemble from_json(const nlohmann::json& j);
};

double sigmoid(double z);

// --- NRI labeling -----------------------------------------------------------

struct NriLabels {
  std::map<std::string, int> labels;  // fips -> 0/1
  std::vector<std::pair<std::string, std::string>> rejected;
  std::size_t count_low = 0;    // label 0
  std::size_t count_other = 0;  // label 1
};

// "very low" maps to 0; the four higher categories map to 1. Unknown category
// strings are rejected per row, not fatal.
NriLabels label_from_nri(const std::vector<std::pair<std::string, std::string>>& rows);
std::vector<std::pair<std::string, std::string>> read_nri_csv(std::istream& in);

// --- preprocessing ----------------------------------------------------------

// Variance inflation factor per column: 1 / (1 - R^2) from regressing the
// column (with intercept) on all others. Numerically singular fits are
// capped at 1e6. Throws on constant columns, naming the offender.
std::vector<double> vif(const Matrix& x);
inline constexpr double kVifCap = 1e6;

// Synthetic minority oversampling to class parity. Synthetic rows interpolate
// between a minority row and one of its k nearest minority neighbours.
// With undersample_majority, both classes meet at the midpoint count instead.
LabeledDataset smote(const LabeledDataset& data, int k, std::uint64_t seed,
                     bool undersample_majority = false);

std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& data,
                                                           double test_fraction,
                                                           std::uint64_t seed);

// --- training ----------------------------------------------------------------

struct TrainLog {
  std::vector<double> round_loss;  // mean logistic loss after each round
};

TreeEnsemble train_gbdt(const LabeledDataset& data, const Hyperparams& params, std::uint64_t seed,
                        TrainLog* log = nullptr,
                        const std::vector<std::string>& feature_names = {});

// --- evaluation ---------------------------------------------------------------

struct Metrics {
  double f1 = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::optional<double> auc_roc;  // absent when y_true has a single class

  nlohmann::json to_json() const;
};

Metrics evaluate(std::span<const int> y_true, std::span<const double> y_score,
                 double threshold = 0.5);

// --- hyperparameter search -----------------------------------------------------

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct SearchSpace {
  Range gamma{0.0, 1.0};
  Range learning_rate{0.01, 0.3};  // sampled log-uniformly
  IntRange max_depth{3, 10};
  IntRange min_child_weight{1, 10};
  IntRange n_estimators{50, 300};
  Range reg_lambda{0.5, 2.0};
  Range subsample{0.5, 1.0};

  nlohmann::json to_json() const;
  static SearchSpace from_json(const nlohmann::json& j);
};

struct TrialResult {
  Hyperparams params;
  double mean_f1 = 0.0;
  std::vector<double> fold_f1;
};

struct CvResult {
  Hyperparams best;
  int best_trial = -1;
  std::vector<TrialResult> trials;
};

// Uniform random draws from the search space, scored by stratified k-fold
// mean F1. Oversampling happens inside each training fold only; validation
// folds see original rows.
CvResult random_search_cv(const LabeledDataset& data, const SearchSpace& space, int n_trials,
                          int folds, std::uint64_t seed, int smote_k = 5, int threads = 1);

// Stratified fold ids (0..folds-1) per row; every fold gets both classes.
std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed);

}  // namespace psvi::model
