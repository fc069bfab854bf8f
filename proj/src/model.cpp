#include "psvi/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>

#include "psvi/csv.hpp"
#include "psvi/errors.hpp"
#include "psvi/parallel.hpp"
#include "psvi/rng.hpp"

namespace psvi::model {

void LabeledDataset::validate() const {
  if (x.rows() != y.size()) throw DomainError("dataset row/label count mismatch");
  if (!ids.empty() && ids.size() != y.size()) throw DomainError("dataset id count mismatch");
  for (const int label : y)
    if (label != 0 && label != 1) throw DomainError("labels must be 0 or 1");
}

std::size_t LabeledDataset::count_label(int label) const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), label));
}

void Hyperparams::validate() const {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw DomainError("learning_rate must be in (0, 1]");
  if (max_depth < 1) throw DomainError("max_depth must be >= 1");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw DomainError("subsample must be in (0, 1]");
  if (n_estimators < 1) throw DomainError("n_estimators must be >= 1");
  if (gamma < 0.0 || reg_lambda < 0.0 || min_child_weight < 0.0)
    throw DomainError("gamma, reg_lambda and min_child_weight must be >= 0");
}

nlohmann::json Hyperparams::to_json() const {
  return nlohmann::json{{"gamma", gamma},
                        {"learning_rate", learning_rate},
                        {"max_depth", max_depth},
                        {"min_child_weight", min_child_weight},
                        {"n_estimators", n_estimators},
                        {"reg_lambda", reg_lambda},
                        {"subsample", subsample}};
}

Hyperparams Hyperparams::from_json(const nlohmann::json& j) {
  Hyperparams p;
  p.gamma = j.at("gamma").get<double>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.max_depth = j.at("max_depth").get<int>();
  p.min_child_weight = j.at("min_child_weight").get<double>();
  p.n_estimators = j.at("n_estimators").get<int>();
  p.reg_lambda = j.at("reg_lambda").get<double>();
  p.subsample = j.at("subsample").get<double>();
  p.validate();
  return p;
}

int Tree::leaf_for(std::span<const double> x) const {
  int node = 0;
  while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    node = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return node;
}

double Tree::predict(std::span<const double> x) const {
  return nodes[static_cast<std::size_t>(leaf_for(x))].weight;
}

int Tree::depth() const {
  int max_d = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [idx, d] = stack.back();
    stack.pop_back();
    max_d = std::max(max_d, d);
    const TreeNode& n = nodes[static_cast<std::size_t>(idx)];
    if (!n.is_leaf()) {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return max_d;
}

double TreeEnsemble::predict_margin(std::span<const double> x) const {
  if (x.size() != n_features())
    throw DomainError("predict_margin: input has " + std::to_string(x.size()) +
                      " features, model expects " + std::to_string(n_features()));
  double margin = base_score;
  for (const Tree& t : trees) margin += t.predict(x);
  return margin;
}

double TreeEnsemble::predict_proba(std::span<const double> x) const {
  return sigmoid(predict_margin(x));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace {

nlohmann::json node_to_json(const Tree& tree, int idx) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(idx)];
  if (n.is_leaf()) return nlohmann::json{{"weight", n.weight}, {"cover", n.cover}};
  return nlohmann::json{{"feature", n.feature},
                        {"threshold", n.threshold},
                        {"cover", n.cover},
                        {"left", node_to_json(tree, n.left)},
                        {"right", node_to_json(tree, n.right)}};
}

int node_from_json(const nlohmann::json& j, Tree& tree) {
  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("feature")) {
    tree.nodes[static_cast<std::size_t>(idx)].feature = j.at("feature").get<int>();
    tree.nodes[static_cast<std::size_t>(idx)].threshold = j.at("threshold").get<double>();
    tree.nodes[static_cast<std::size_t>(idx)].cover = j.at("cover").get<double>();
    const int left = node_from_json(j.at("left"), tree);
    const int right = node_from_json(j.at("right"), tree);
    tree.nodes[static_cast<std::size_t>(idx)].left = left;
    tree.nodes[static_cast<std::size_t>(idx)].right = right;
  } else {
    tree.nodes[static_cast<std::size_t>(idx)].weight = j.at("weight").get<double>();
    tree.nodes[static_cast<std::size_t>(idx)].cover = j.at("cover").get<double>();
  }
  return idx;
}

}  // namespace

nlohmann::json TreeEnsemble::to_json() const {
  nlohmann::json out;
  out["base_score"] = base_score;
  out["feature_order"] = feature_names;
  nlohmann::json trees_json = nlohmann::json::array();
  for (const Tree& t : trees) trees_json.push_back(node_to_json(t, 0));
  out["trees"] = std::move(trees_json);
  return out;
}

TreeEnsemble TreeEnsemble::from_json(const nlohmann::json& j) {
  TreeEnsemble out;
  out.base_score = j.at("base_score").get<double>();
  out.feature_names = j.at("feature_order").get<std::vector<std::string>>();
  for (const nlohmann::json& tj : j.at("trees")) {
    Tree tree;
    node_from_json(tj, tree);
    out.trees.push_back(std::move(tree));
  }
  return out;
}

// --- NRI labeling -------------------------------------------------------------

namespace {

std::string normalize_category(std::string_view s) {
  std::string out;
  bool last_space = true;
  for (const char c : s) {
    const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == ' ' || lower == '\t' || lower == '_') {
      if (!last_space) out.push_back(' ');
      last_space = true;
    } else {
      out.push_back(lower);
      last_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace

NriLabels label_from_nri(const std::vector<std::pair<std::string, std::string>>& rows) {
  NriLabels out;
  for (const auto& [fips, category] : rows) {
    const std::string norm = normalize_category(category);
    int label;
    if (norm == "very low") {
      label = 0;
    } else if (norm == "relatively low" || norm == "relatively moderate" ||
               norm == "relatively high" || norm == "very high") {
      label = 1;
    } else {
      out.rejected.emplace_back(fips, category);
      continue;
    }
    out.labels[fips] = label;
    if (label == 0)
      ++out.count_low;
    else
      ++out.count_other;
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_nri_csv(std::istream& in) {
  csv::Reader reader(in);
  const int fips_col = reader.require_column("fips");
  const int cat_col = reader.require_column("nri_category");
  std::vector<std::pair<std::string, std::string>> rows;
  std::vector<std::string_view> fields;
  while (reader.next_row(fields)) {
    if (static_cast<int>(fields.size()) <= std::max(fips_col, cat_col))
      throw SchemaError("NRI row " + std::to_string(reader.line_number()) + " has too few fields");
    rows.emplace_back(std::string(fields[fips_col]), std::string(fields[cat_col]));
  }
  return rows;
}

// --- VIF ----------------------------------------------------------------------

namespace {

// Gaussian elimination with partial pivoting; returns false when singular.
bool solve_linear(std::vector<std::vector<double>>& a, std::vector<double>& b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    if (std::fabs(a[pivot][col]) < 1e-12) return false;
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a[r][col] / a[col][col];
      if (factor == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return true;
}

}  // namespace

std::vector<double> vif(const Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < d + 2) throw DomainError("vif: needs at least n_features + 2 rows");

  for (std::size_t j = 0; j < d; ++j) {
    const auto col = x.column(j);
    if (std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); }))
      throw DomainError("vif: column " + std::to_string(j) + " is constant");
  }

  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    // Design: intercept + the other d-1 columns. Normal equations.
    const std::size_t p = d;  // 1 + (d - 1)
    std::vector<std::vector<double>> ata(p, std::vector<double>(p, 0.0));
    std::vector<double> aty(p, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<double> row(p);
      row[0] = 1.0;
      std::size_t k = 1;
      for (std::size_t c = 0; c < d; ++c)
        if (c != j) row[k++] = x.at(r, c);
      const double target = x.at(r, j);
      for (std::size_t a = 0; a < p; ++a) {
        aty[a] += row[a] * target;
        for (std::size_t b = 0; b < p; ++b) ata[a][b] += row[a] * row[b];
      }
    }
    std::vector<double> beta = aty;
    std::vector<std::vector<double>> ata_copy = ata;
    bool ok = solve_linear(ata_copy, beta);
    if (!ok) {
      // Collinear predictors: the coefficients are not unique but the fit is.
      // A tiny ridge picks one solution without visibly moving the fit.
      double trace = 0.0;
      for (std::size_t a = 0; a < p; ++a) trace += ata[a][a];
      const double ridge = 1e-10 * trace / static_cast<double>(p);
      ata_copy = ata;
      for (std::size_t a = 0; a < p; ++a) ata_copy[a][a] += ridge;
      beta = aty;
      ok = solve_linear(ata_copy, beta);
    }
    if (!ok) {
      out[j] = kVifCap;
      continue;
    }
    double sse = 0.0, sst = 0.0;
    double mean_y = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean_y += x.at(r, j);
    mean_y /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      double fitted = beta[0];
      std::size_t k = 1;
      for (std::size_t c = 0; c < d; ++c)
        if (c != j) fitted += beta[k++] * x.at(r, c);
      const double y = x.at(r, j);
      sse += (y - fitted) * (y - fitted);
      sst += (y - mean_y) * (y - mean_y);
    }
    const double r2 = sst > 0.0 ? std::clamp(1.0 - sse / sst, 0.0, 1.0) : 0.0;
    out[j] = r2 >= 1.0 - 1.0 / kVifCap ? kVifCap : std::min(1.0 / (1.0 - r2), kVifCap);
  }
  return out;
}

// --- SMOTE --------------------------------------------------------------------

LabeledDataset smote(const LabeledDataset& data, int k, std::uint64_t seed,
                     bool undersample_majority) {
  data.validate();
  if (k < 1) throw DomainError("smote: k must be >= 1");
  const std::size_t n1 = data.count_label(1);
  const std::size_t n0 = data.size() - n1;
  if (n0 == n1) return data;

  const int minority_label = n0 < n1 ? 0 : 1;
  const std::size_t n_min = std::min(n0, n1);
  const std::size_t n_maj = std::max(n0, n1);
  if (n_min < 2) throw DomainError("smote: minority class needs at least 2 rows to interpolate");

  std::vector<std::size_t> minority_rows, majority_rows;
  for (std::size_t i = 0; i < data.size(); ++i)
    (data.y[i] == minority_label ? minority_rows : majority_rows).push_back(i);

  const std::size_t d = data.x.cols();
  const std::size_t k_eff = std::min<std::size_t>(static_cast<std::size_t>(k), n_min - 1);

  // k nearest minority neighbours per minority row (Euclidean; ties by index).
  std::vector<std::vector<std::size_t>> neighbors(n_min);
  for (std::size_t a = 0; a < n_min; ++a) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(n_min - 1);
    for (std::size_t b = 0; b < n_min; ++b) {
      if (a == b) continue;
      double d2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double delta = data.x.at(minority_rows[a], c) - data.x.at(minority_rows[b], c);
        d2 += delta * delta;
      }
      dist.emplace_back(d2, b);
    }
    std::sort(dist.begin(), dist.end());
    neighbors[a].reserve(k_eff);
    for (std::size_t i = 0; i < k_eff; ++i) neighbors[a].push_back(dist[i].second);
  }

  Rng rng(seed);
  const std::size_t target =
      undersample_majority ? (n_min + n_maj + 1) / 2 : n_maj;

  LabeledDataset out;
  const bool with_ids = !data.ids.empty();

  // Majority rows, optionally thinned by random undersampling.
  std::vector<std::size_t> kept_majority = majority_rows;
  if (undersample_majority && target < n_maj) {
    Rng under = rng.fork(1);
    for (std::size_t i = kept_majority.size() - 1; i > 0; --i)
      std::swap(kept_majority[i], kept_majority[under.uniform_int(i + 1)]);
    kept_majority.resize(target);
    std::sort(kept_majority.begin(), kept_majority.end());
  }

  // Original rows first (minority rows always survive), in input order.
  std::vector<bool> keep(data.size(), false);
  for (const std::size_t i : minority_rows) keep[i] = true;
  for (const std::size_t i : kept_majority) keep[i] = true;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!keep[i]) continue;
    out.x.append_row(data.x.row(i));
    out.y.push_back(data.y[i]);
    if (with_ids) out.ids.push_back(data.ids[i]);
  }

  // Synthetic minority rows until parity.
  Rng synth = rng.fork(2);
  const std::size_t needed = target - n_min;
  std::vector<double> row(d);
  for (std::size_t j = 0; j < needed; ++j) {
    const std::size_t a = j % n_min;
    const std::size_t b = neighbors[a][synth.uniform_int(k_eff)];
    const double u = synth.uniform();
    for (std::size_t c = 0; c < d; ++c) {
      const double base = data.x.at(minority_rows[a], c);
      const double nn = data.x.at(minority_rows[b], c);
      row[c] = base + u * (nn - base);
    }
    out.x.append_row(row);
    out.y.push_back(minority_label);
    if (with_ids) out.ids.push_back("smote_" + std::to_string(j));
  }
  return out;
}

// --- train/test split -----------------------------------------------------------

std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& data,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
  data.validate();
  if (data.size() < 5) throw DomainError("split_train_test: needs at least 5 rows");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DomainError("split_train_test: test_fraction must be in (0, 1)");

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class[data.y[i]].push_back(i);
  for (const int label : {0, 1})
    if (by_class[label].size() < 2)
      throw DomainError("split_train_test: class " + std::to_string(label) +
                        " has fewer than 2 rows");

  std::vector<bool> in_test(data.size(), false);
  Rng rng(seed);
  for (const int label : {0, 1}) {
    auto& rows = by_class[label];
    Rng shuffler = rng.fork(static_cast<std::uint64_t>(label));
    for (std::size_t i = rows.size() - 1; i > 0; --i)
      std::swap(rows[i], rows[shuffler.uniform_int(i + 1)]);
    const double exact = static_cast<double>(rows.size()) * test_fraction;
    std::size_t n_test = static_cast<std::size_t>(std::llround(exact));
    n_test = std::clamp<std::size_t>(n_test, 1, rows.size() - 1);
    for (std::size_t i = 0; i < n_test; ++i) in_test[rows[i]] = true;
  }

  LabeledDataset train, test;
  const bool with_ids = !data.ids.empty();
  for (std::size_t i = 0; i < data.size(); ++i) {
    LabeledDataset& dst = in_test[i] ? test : train;
    dst.x.append_row(data.x.row(i));
    dst.y.push_back(data.y[i]);
    if (with_ids) dst.ids.push_back(data.ids[i]);
  }
  return {std::move(train), std::move(test)};
}

// --- boosting -------------------------------------------------------------------

namespace {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  double grad_left = 0.0;
  double hess_left = 0.0;
};

double leaf_objective(double g, double h, double lambda) { return g * g / (h + lambda); }

// Exact greedy split search over one node's rows. Features are scanned in
// ascending index order and thresholds in ascending value order, so equal
// gains resolve to the lowest feature index, then the lowest threshold.
SplitChoice find_best_split(const Matrix& x, const std::vector<double>& grad,
                            const std::vector<double>& hess,
                            const std::vector<std::size_t>& rows, const Hyperparams& params,
                            std::vector<std::pair<double, std::size_t>>& scratch) {
  SplitChoice best;
  double g_total = 0.0, h_total = 0.0;
  for (const std::size_t r : rows) {
    g_total += grad[r];
    h_total += hess[r];
  }
  const double parent_obj = leaf_objective(g_total, h_total, params.reg_lambda);

  for (std::size_t f = 0; f < x.cols(); ++f) {
    scratch.clear();
    for (const std::size_t r : rows) scratch.emplace_back(x.at(r, f), r);
    std::sort(scratch.begin(), scratch.end());

    double g_left = 0.0, h_left = 0.0;
    for (std::size_t i = 0; i + 1 < scratch.size(); ++i) {
      g_left += grad[scratch[i].second];
      h_left += hess[scratch[i].second];
      if (scratch[i].first == scratch[i + 1].first) continue;  // ties cannot split
      const double h_right = h_total - h_left;
      if (h_left < params.min_child_weight || h_right < params.min_child_weight) continue;
      const double g_right = g_total - g_left;
      const double gain = 0.5 * (leaf_objective(g_left, h_left, params.reg_lambda) +
                                 leaf_objective(g_right, h_right, params.reg_lambda) - parent_obj) -
                          params.gamma;
      if (gain <= 0.0) continue;
      // Strict comparison: equal gains keep the earlier (lowest feature,
      // lowest threshold) candidate.
      if (gain > best.gain) {
        best.found = true;
        best.feature = static_cast<int>(f);
        best.threshold = 0.5 * (scratch[i].first + scratch[i + 1].first);
        best.gain = gain;
        best.grad_left = g_left;
        best.hess_left = h_left;
      }
    }
  }
  return best;
}

void build_node(Tree& tree, int node_idx, const Matrix& x, const std::vector<double>& grad,
                const std::vector<double>& hess, std::vector<std::size_t> rows, int depth,
                const Hyperparams& params, std::vector<std::pair<double, std::size_t>>& scratch) {
  double g = 0.0, h = 0.0;
  for (const std::size_t r : rows) {
    g += grad[r];
    h += hess[r];
  }
  TreeNode& node = tree.nodes[static_cast<std::size_t>(node_idx)];
  node.cover = static_cast<double>(rows.size());
  node.grad_sum = g;
  node.hess_sum = h;

  SplitChoice split;
  if (depth < params.max_depth && rows.size() >= 2)
    split = find_best_split(x, grad, hess, rows, params, scratch);

  if (!split.found) {
    node.feature = -1;
    node.weight = -g / (h + params.reg_lambda) * params.learning_rate;
    return;
  }

  std::vector<std::size_t> left_rows, right_rows;
  for (const std::size_t r : rows)
    (x.at(r, static_cast<std::size_t>(split.feature)) < split.threshold ? left_rows : right_rows)
        .push_back(r);
  rows.clear();
  rows.shrink_to_fit();

  const int left_idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  const int right_idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  {
    TreeNode& n = tree.nodes[static_cast<std::size_t>(node_idx)];
    n.feature = split.feature;
    n.threshold = split.threshold;
    n.gain = split.gain;
    n.left = left_idx;
    n.right = right_idx;
  }
  build_node(tree, left_idx, x, grad, hess, std::move(left_rows), depth + 1, params, scratch);
  build_node(tree, right_idx, x, grad, hess, std::move(right_rows), depth + 1, params, scratch);
}

}  // namespace

TreeEnsemble train_gbdt(const LabeledDataset& data, const Hyperparams& params, std::uint64_t seed,
                        TrainLog* log, const std::vector<std::string>& feature_names) {
  data.validate();
  params.validate();
  const std::size_t n = data.size();
  if (n == 0) throw DomainError("train_gbdt: empty dataset");

  TreeEnsemble ensemble;
  if (feature_names.empty()) {
    for (std::size_t f = 0; f < data.x.cols(); ++f)
      ensemble.feature_names.push_back("f" + std::to_string(f));
  } else {
    if (feature_names.size() != data.x.cols())
      throw DomainError("train_gbdt: feature name count mismatch");
    ensemble.feature_names = feature_names;
  }

  // Prior log-odds of the training prevalence. A single-class input keeps a
  // finite prior via clamping and learns no splits (all gradients ~0), so the
  // model predicts the lone class everywhere.
  double prevalence = 0.0;
  for (const int label : data.y) prevalence += label;
  prevalence /= static_cast<double>(n);
  const double clamped = std::clamp(prevalence, 1e-6, 1.0 - 1e-6);
  ensemble.base_score = std::log(clamped / (1.0 - clamped));

  std::vector<double> margin(n, ensemble.base_score);
  std::vector<double> grad(n), hess(n);
  std::vector<std::pair<double, std::size_t>> scratch;
  Rng rng(seed);

  const std::size_t sample_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * params.subsample)), 1, n);

  for (int round = 0; round < params.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = p - static_cast<double>(data.y[i]);
      hess[i] = p * (1.0 - p);
    }

    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    if (sample_count < n) {
      Rng sampler = rng.fork(static_cast<std::uint64_t>(round));
      for (std::size_t i = 0; i < sample_count; ++i)
        std::swap(rows[i], rows[i + sampler.uniform_int(n - i)]);
      rows.resize(sample_count);
      std::sort(rows.begin(), rows.end());
    }

    Tree tree;
    tree.nodes.emplace_back();
    build_node(tree, 0, data.x, grad, hess, std::move(rows), 0, params, scratch);

    for (std::size_t i = 0; i < n; ++i) margin[i] += tree.predict(data.x.row(i));
    ensemble.trees.push_back(std::move(tree));

    if (log) {
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double p = std::clamp(sigmoid(margin[i]), 1e-15, 1.0 - 1e-15);
        loss -= data.y[i] == 1 ? std::log(p) : std::log(1.0 - p);
      }
      log->round_loss.push_back(loss / static_cast<double>(n));
    }
  }
  return ensemble;
}

// --- evaluation -------------------------------------------------------------------

Metrics evaluate(std::span<const int> y_true, std::span<const double> y_score, double threshold) {
  if (y_true.size() != y_score.size()) throw DomainError("evaluate: length mismatch");
  if (y_true.empty()) throw DomainError("evaluate: empty input");

  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool pred = y_score[i] >= threshold;
    if (y_true[i] == 1)
      pred ? ++tp : ++fn;
    else
      pred ? ++fp : ++tn;
  }
  Metrics m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(y_true.size());
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                      : 0.0;

  const std::size_t n_pos = tp + fn;
  const std::size_t n_neg = fp + tn;
  if (n_pos > 0 && n_neg > 0) {
    // Rank statistic with average ranks on tied scores.
    std::vector<std::size_t> order(y_true.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return y_score[a] < y_score[b]; });
    std::vector<double> rank(y_true.size());
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && y_score[order[j + 1]] == y_score[order[i]]) ++j;
      const double avg_rank = static_cast<double>(i + j + 2) / 2.0;  // 1-based
      for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg_rank;
      i = j + 1;
    }
    double pos_rank_sum = 0.0;
    for (std::size_t t = 0; t < y_true.size(); ++t)
      if (y_true[t] == 1) pos_rank_sum += rank[t];
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    m.auc_roc = (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
  }
  return m;
}

nlohmann::json Metrics::to_json() const {
  nlohmann::json out{{"f1", f1}, {"accuracy", accuracy}, {"precision", precision},
                     {"recall", recall}};
  if (auc_roc)
    out["auc_roc"] = *auc_roc;
  else
    out["auc_roc"] = nullptr;
  return out;
}

// --- random search CV ----------------------------------------------------------------

std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed) {
  if (folds < 2) throw DomainError("stratified_folds: needs >= 2 folds");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
  for (const int label : {0, 1})
    if (by_class[label].size() < static_cast<std::size_t>(folds))
      throw DomainError("stratified_folds: class " + std::to_string(label) +
                        " has fewer rows than folds; a fold would miss it");

  std::vector<int> fold_of(y.size(), -1);
  Rng rng(seed);
  for (const int label : {0, 1}) {
    auto& rows = by_class[label];
    Rng shuffler = rng.fork(static_cast<std::uint64_t>(label) + 11);
    for (std::size_t i = rows.size() - 1; i > 0; --i)
      std::swap(rows[i], rows[shuffler.uniform_int(i + 1)]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      fold_of[rows[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }
  return fold_of;
}

namespace {

Hyperparams sample_params(const SearchSpace& space, Rng& rng) {
  Hyperparams p;
  p.gamma = rng.uniform(space.gamma.lo, space.gamma.hi);
  p.learning_rate = space.learning_rate.lo == space.learning_rate.hi
                        ? space.learning_rate.lo
                        : rng.log_uniform(space.learning_rate.lo, space.learning_rate.hi);
  p.max_depth = static_cast<int>(rng.uniform_int(space.max_depth.lo, space.max_depth.hi));
  p.min_child_weight =
      static_cast<double>(rng.uniform_int(space.min_child_weight.lo, space.min_child_weight.hi));
  p.n_estimators = static_cast<int>(rng.uniform_int(space.n_estimators.lo, space.n_estimators.hi));
  p.reg_lambda = rng.uniform(space.reg_lambda.lo, space.reg_lambda.hi);
  p.subsample = rng.uniform(space.subsample.lo, space.subsample.hi);
  p.validate();
  return p;
}

LabeledDataset subset_rows(const LabeledDataset& data, const std::vector<std::size_t>& rows) {
  LabeledDataset out;
  const bool with_ids = !data.ids.empty();
  for (const std::size_t r : rows) {
    out.x.append_row(data.x.row(r));
    out.y.push_back(data.y[r]);
    if (with_ids) out.ids.push_back(data.ids[r]);
  }
  return out;
}

}  // namespace

CvResult random_search_cv(const LabeledDataset& data, const SearchSpace& space, int n_trials,
                          int folds, std::uint64_t seed, int smote_k, int threads) {
  data.validate();
  if (n_trials < 1) throw DomainError("random_search_cv: n_trials must be >= 1");
  const std::vector<int> fold_of = stratified_folds(data.y, folds, seed);

  std::vector<std::vector<std::size_t>> train_rows(static_cast<std::size_t>(folds));
  std::vector<std::vector<std::size_t>> valid_rows(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (int f = 0; f < folds; ++f)
      (fold_of[i] == f ? valid_rows : train_rows)[static_cast<std::size_t>(f)].push_back(i);

  Rng rng(seed);
  CvResult result;
  result.trials.resize(static_cast<std::size_t>(n_trials));

  for (int trial = 0; trial < n_trials; ++trial) {
    Rng trial_rng = rng.fork(static_cast<std::uint64_t>(trial) + 1000);
    TrialResult& tr = result.trials[static_cast<std::size_t>(trial)];
    tr.params = sample_params(space, trial_rng);
    tr.fold_f1.resize(static_cast<std::size_t>(folds));

    parallel_for(0, static_cast<std::size_t>(folds), threads, [&](std::size_t f) {
      const LabeledDataset train = subset_rows(data, train_rows[f]);
      const LabeledDataset valid = subset_rows(data, valid_rows[f]);
      // Balance inside the training fold only; validation stays untouched.
      const std::uint64_t fold_seed =
          seed ^ (static_cast<std::uint64_t>(trial) * 1009 + f * 31 + 7);
      const LabeledDataset balanced = smote(train, smote_k, fold_seed);
      const TreeEnsemble model = train_gbdt(balanced, tr.params, fold_seed);
      std::vector<double> scores(valid.size());
      for (std::size_t i = 0; i < valid.size(); ++i)
        scores[i] = model.predict_proba(valid.x.row(i));
      tr.fold_f1[f] = evaluate(valid.y, scores).f1;
    });

    tr.mean_f1 = 0.0;
    for (const double f1 : tr.fold_f1) tr.mean_f1 += f1;
    tr.mean_f1 /= static_cast<double>(folds);

    if (result.best_trial < 0 ||
        tr.mean_f1 > result.trials[static_cast<std::size_t>(result.best_trial)].mean_f1) {
      result.best_trial = trial;
      result.best = tr.params;
    }
  }
  return result;
}

nlohmann::json SearchSpace::to_json() const {
  const auto range = [](double lo, double hi) { return nlohmann::json::array({lo, hi}); };
  return nlohmann::json{{"gamma", range(gamma.lo, gamma.hi)},
                        {"learning_rate", range(learning_rate.lo, learning_rate.hi)},
                        {"max_depth", nlohmann::json::array({max_depth.lo, max_depth.hi})},
                        {"min_child_weight",
                         nlohmann::json::array({min_child_weight.lo, min_child_weight.hi})},
                        {"n_estimators", nlohmann::json::array({n_estimators.lo, n_estimators.hi})},
                        {"reg_lambda", range(reg_lambda.lo, reg_lambda.hi)},
                        {"subsample", range(subsample.lo, subsample.hi)}};
}

SearchSpace SearchSpace::from_json(const nlohmann::json& j) {
  SearchSpace s;
  const auto get_range = [&](const char* key, Range& out) {
    if (!j.contains(key)) return;
    out.lo = j.at(key).at(0).get<double>();
    out.hi = j.at(key).at(1).get<double>();
  };
  const auto get_int_range = [&](const char* key, IntRange& out) {
    if (!j.contains(key)) return;
    out.lo = j.at(key).at(0).get<int>();
    out.hi = j.at(key).at(1).get<int>();
  };
  get_range("gamma", s.gamma);
  get_range("learning_rate", s.learning_rate);
  get_int_range("max_depth", s.max_depth);
  get_int_range("min_child_weight", s.min_child_weight);
  get_int_range("n_estimators", s.n_estimators);
  get_range("reg_lambda", s.reg_lambda);
  get_range("subsample", s.subsample);
  return s;
}

}  // namespace psvi::model
