#include "psvi/explain.hpp"

#include <algorithm>
#include <cmath>

#include "psvi/errors.hpp"
#include "psvi/parallel.hpp"

namespace psvi::explain {

using model::Tree;
using model::TreeEnsemble;
using model::TreeNode;

namespace {

// Decision-path bookkeeping for the polynomial TreeSHAP recursion. The
// pweight of element i is the permutation weight of subsets with i features
// from the path present.
struct PathElement {
  int feature_index = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

void extend_path(PathElement* path, int depth, double zero_fraction, double one_fraction,
                 int feature_index) {
  path[depth] = {feature_index, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].pweight +=
        one_fraction * path[i].pweight * (i + 1) / static_cast<double>(depth + 1);
    path[i].pweight = zero_fraction * path[i].pweight * (depth - i) / static_cast<double>(depth + 1);
  }
}

void unwind_path(PathElement* path, int depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one_portion = path[depth].pweight;
  for (int i = depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one_portion * (depth + 1) / static_cast<double>((i + 1) * one_fraction);
      next_one_portion =
          tmp - path[i].pweight * zero_fraction * (depth - i) / static_cast<double>(depth + 1);
    } else {
      path[i].pweight =
          path[i].pweight * (depth + 1) / (zero_fraction * static_cast<double>(depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    path[i].feature_index = path[i + 1].feature_index;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

double unwound_path_sum(const PathElement* path, int depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one_portion = path[depth].pweight;
  double total = 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = next_one_portion * (depth + 1) / static_cast<double>((i + 1) * one_fraction);
      total += tmp;
      next_one_portion =
          path[i].pweight - tmp * zero_fraction * (depth - i) / static_cast<double>(depth + 1);
    } else if (zero_fraction != 0.0) {
      total += path[i].pweight / zero_fraction / ((depth - i) / static_cast<double>(depth + 1));
    }
  }
  return total;
}

void shap_recurse(const Tree& tree, std::span<const double> x, std::vector<double>& phi,
                  int node_index, int unique_depth, PathElement* parent_path,
                  double parent_zero_fraction, double parent_one_fraction,
                  int parent_feature_index) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];

  PathElement* path = parent_path + unique_depth + 1;
  std::copy(parent_path, parent_path + unique_depth + 1, path);
  extend_path(path, unique_depth, parent_zero_fraction, parent_one_fraction, parent_feature_index);

  if (node.is_leaf()) {
    for (int i = 1; i <= unique_depth; ++i) {
      const double w = unwound_path_sum(path, unique_depth, i);
      const PathElement& el = path[i];
      phi[static_cast<std::size_t>(el.feature_index)] +=
          w * (el.one_fraction - el.zero_fraction) * node.weight;
    }
    return;
  }

  const int split_feature = node.feature;
  const int hot = x[static_cast<std::size_t>(split_feature)] < node.threshold ? node.left : node.right;
  const int cold = hot == node.left ? node.right : node.left;
  const double cover = node.cover;
  if (cover <= 0.0) throw InvariantError("tree_shap: internal node with non-positive cover");
  const double hot_zero_fraction = tree.nodes[static_cast<std::size_t>(hot)].cover / cover;
  const double cold_zero_fraction = tree.nodes[static_cast<std::size_t>(cold)].cover / cover;

  double incoming_zero_fraction = 1.0;
  double incoming_one_fraction = 1.0;

  // A repeated feature along the path is merged: undo its previous extension
  // and fold its fractions into this one.
  int path_index = 0;
  while (path_index <= unique_depth && path[path_index].feature_index != split_feature) ++path_index;
  if (path_index != unique_depth + 1) {
    incoming_zero_fraction = path[path_index].zero_fraction;
    incoming_one_fraction = path[path_index].one_fraction;
    unwind_path(path, unique_depth, path_index);
    unique_depth -= 1;
  }

  shap_recurse(tree, x, phi, hot, unique_depth + 1, path,
               hot_zero_fraction * incoming_zero_fraction, incoming_one_fraction, split_feature);
  shap_recurse(tree, x, phi, cold, unique_depth + 1, path,
               cold_zero_fraction * incoming_zero_fraction, 0.0, split_feature);
}

double tree_expected_value(const Tree& tree, int node_index) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) return node.weight;
  if (node.cover <= 0.0) throw InvariantError("tree_shap: internal node with non-positive cover");
  const double left = tree_expected_value(tree, node.left);
  const double right = tree_expected_value(tree, node.right);
  const double wl = tree.nodes[static_cast<std::size_t>(node.left)].cover;
  const double wr = tree.nodes[static_cast<std::size_t>(node.right)].cover;
  return (wl * left + wr * right) / node.cover;
}

int tree_max_depth(const Tree& tree) { return tree.depth(); }

}  // namespace

double expected_margin(const TreeEnsemble& ensemble) {
  double base = ensemble.base_score;
  for (const Tree& t : ensemble.trees) base += tree_expected_value(t, 0);
  return base;
}

Attribution tree_shap(const TreeEnsemble& ensemble, std::span<const double> x) {
  if (x.size() != ensemble.n_features())
    throw DomainError("tree_shap: input dimension mismatch");

  Attribution out;
  out.shap.assign(ensemble.n_features(), 0.0);
  out.base = ensemble.base_score;

  std::vector<PathElement> path_storage;
  for (const Tree& tree : ensemble.trees) {
    out.base += tree_expected_value(tree, 0);
    const int maxd = tree_max_depth(tree) + 2;
    path_storage.assign(static_cast<std::size_t>(maxd * (maxd + 1)) / 2, PathElement{});
    shap_recurse(tree, x, out.shap, 0, 0, path_storage.data(), 1.0, 1.0, -1);
  }
  return out;
}

ImportanceTable global_importance(const TreeEnsemble& ensemble, const Matrix& rows,
                                  const std::vector<std::string>& dimensions, int threads) {
  if (rows.rows() == 0) throw DomainError("global_importance: empty dataset");
  if (rows.cols() != ensemble.n_features())
    throw DomainError("global_importance: dataset width does not match model");
  if (!dimensions.empty() && dimensions.size() != ensemble.n_features())
    throw DomainError("global_importance: dimension label count mismatch");

  const std::size_t n = rows.rows();
  const std::size_t d = ensemble.n_features();

  std::vector<std::vector<double>> per_row(n);
  parallel_for(0, n, threads,
               [&](std::size_t i) { per_row[i] = tree_shap(ensemble, rows.row(i)).shap; });

  ImportanceTable table;
  table.feature_names = ensemble.feature_names;
  table.dimensions = dimensions.empty() ? std::vector<std::string>(d, "") : dimensions;
  table.signed_mean.assign(d, 0.0);
  table.abs_mean.assign(d, 0.0);
  table.n_rows = n;
  table.base = expected_margin(ensemble);

  // Fixed row-order reduction keeps sums deterministic under any threading.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < d; ++f) {
      table.signed_mean[f] += per_row[i][f];
      table.abs_mean[f] += std::fabs(per_row[i][f]);
    }
  }
  for (std::size_t f = 0; f < d; ++f) {
    table.signed_mean[f] /= static_cast<double>(n);
    table.abs_mean[f] /= static_cast<double>(n);
  }

  if (!dimensions.empty()) {
    for (std::size_t f = 0; f < d; ++f) table.dimension_totals[dimensions[f]] += table.signed_mean[f];
    double total_abs = 0.0;
    for (const auto& [dim, v] : table.dimension_totals) total_abs += std::fabs(v);
    if (total_abs > 0.0)
      for (const auto& [dim, v] : table.dimension_totals)
        table.dimension_shares[dim] = std::fabs(v) / total_abs * 100.0;
  }
  return table;
}

const char* weight_mode_name(WeightMode mode) {
  switch (mode) {
    case WeightMode::kSigned: return "signed";
    case WeightMode::kAbsolute: return "absolute";
    case WeightMode::kMinMax: return "minmax";
  }
  return "signed";
}

WeightMode weight_mode_from_name(const std::string& name) {
  if (name == "signed") return WeightMode::kSigned;
  if (name == "absolute") return WeightMode::kAbsolute;
  if (name == "minmax") return WeightMode::kMinMax;
  throw DomainError("unknown weight mode '" + name + "'");
}

WeightVector weights_from_shap(const ImportanceTable& table, WeightMode mode) {
  const std::vector<double>& s = table.signed_mean;
  if (s.empty()) throw DomainError("weights_from_shap: empty importance table");

  WeightVector out;
  out.mode = mode;
  const std::size_t d = s.size();
  out.w.resize(d);

  const auto normalize = [&](const std::vector<double>& values) {
    double sum = 0.0;
    for (const double v : values) sum += v;
    if (sum == 0.0) throw DomainError("weights_from_shap: importance sum is zero");
    for (std::size_t i = 0; i < d; ++i) out.w[i] = values[i] / sum;
  };

  switch (mode) {
    case WeightMode::kSigned:
      normalize(s);
      break;
    case WeightMode::kAbsolute: {
      std::vector<double> a(d);
      for (std::size_t i = 0; i < d; ++i) a[i] = std::fabs(s[i]);
      normalize(a);
      break;
    }
    case WeightMode::kMinMax: {
      const auto [lo_it, hi_it] = std::minmax_element(s.begin(), s.end());
      const double lo = *lo_it, hi = *hi_it;
      if (hi == lo) {
        // Constant importances carry no ordering; fall back to uniform.
        if (hi == 0.0) throw DomainError("weights_from_shap: importance sum is zero");
        std::fill(out.w.begin(), out.w.end(), 1.0 / static_cast<double>(d));
        break;
      }
      std::vector<double> r(d);
      for (std::size_t i = 0; i < d; ++i) r[i] = (s[i] - lo) / (hi - lo);
      normalize(r);
      break;
    }
  }
  return out;
}

}  // namespace psvi::explain
