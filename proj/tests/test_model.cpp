#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "psvi/errors.hpp"
#include "psvi/model.hpp"
#include "psvi/rng.hpp"

using namespace psvi;

namespace {

model::LabeledDataset random_dataset(Rng& rng, std::size_t n, std::size_t d, double flip = 0.2) {
  model::LabeledDataset data;
  std::vector<double> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) row[c] = rng.uniform();
    data.x.append_row(row);
    const bool signal = row[0] + 0.5 * row[d - 1] > 0.75;
    const bool label = rng.uniform() < flip ? !signal : signal;
    data.y.push_back(label ? 1 : 0);
  }
  return data;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("NRI categories map to binary labels") {
  const auto result = model::label_from_nri({{"01001", "Very Low"},
                                             {"01003", "relatively high"},
                                             {"01005", "RELATIVELY LOW"},
                                             {"01007", "Relatively Moderate"},
                                             {"01009", "very high"},
                                             {"01011", "no rating"}});
  CHECK(result.labels.at("01001") == 0);
  CHECK(result.labels.at("01003") == 1);
  CHECK(result.labels.at("01005") == 1);
  CHECK(result.labels.at("01007") == 1);
  CHECK(result.labels.at("01009") == 1);
  REQUIRE(result.rejected.size() == 1);
  CHECK(result.rejected[0].first == "01011");
  CHECK(result.count_low == 1);
  CHECK(result.count_other == 4);
}

TEST_CASE("variance inflation factors") {
  SUBCASE("mutually orthogonal centered columns give VIF 1") {
    // Orthogonal design on 4 rows: sign patterns of two Walsh functions.
    Matrix x(4, 3);
    const double a[4] = {1, 1, -1, -1};
    const double b[4] = {1, -1, 1, -1};
    const double c[4] = {1, -1, -1, 1};
    for (int r = 0; r < 4; ++r) {
      x.at(r, 0) = a[r];
      x.at(r, 1) = b[r];
      x.at(r, 2) = c[r];
    }
    // Need n >= d + 2: replicate rows to 8.
    Matrix xx(8, 3);
    for (int r = 0; r < 8; ++r)
      for (int cidx = 0; cidx < 3; ++cidx) xx.at(r, cidx) = x.at(r % 4, cidx);
    const auto v = model::vif(xx);
    for (const double vi : v) CHECK(vi == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("a duplicated column pair is capped at 1e6") {
    Rng rng(5);
    Matrix x(30, 3);
    for (int r = 0; r < 30; ++r) {
      x.at(r, 0) = rng.uniform();
      x.at(r, 1) = x.at(r, 0);
      x.at(r, 2) = rng.uniform();
    }
    const auto v = model::vif(x);
    CHECK(v[0] == model::kVifCap);
    CHECK(v[1] == model::kVifCap);
    CHECK(v[2] < 10.0);
  }
  SUBCASE("random matrix matches an independent least-squares oracle") {
    Rng rng(77);
    Matrix x(500, 14);
    for (std::size_t r = 0; r < 500; ++r) {
      for (std::size_t c = 0; c < 14; ++c) x.at(r, c) = rng.uniform();
      // Give some columns shared structure so VIFs vary.
      x.at(r, 1) = 0.7 * x.at(r, 0) + 0.3 * x.at(r, 1);
      x.at(r, 2) = 0.5 * x.at(r, 0) + 0.2 * x.at(r, 1) + 0.3 * x.at(r, 2);
    }
    const auto v = model::vif(x);
    for (std::size_t j = 0; j < 14; ++j) {
      std::vector<std::vector<double>> design;
      std::vector<double> target;
      for (std::size_t r = 0; r < 500; ++r) {
        std::vector<double> row{1.0};
        for (std::size_t c = 0; c < 14; ++c)
          if (c != j) row.push_back(x.at(r, c));
        design.push_back(std::move(row));
        target.push_back(x.at(r, j));
      }
      const double r2 = oracles::r_squared_cholesky(design, target);
      const double expected = 1.0 / (1.0 - r2);
      CHECK(v[j] == doctest::Approx(expected).epsilon(1e-6));
    }
  }
  SUBCASE("constant column is an error naming the column") {
    Matrix x(20, 2);
    for (int r = 0; r < 20; ++r) {
      x.at(r, 0) = r;
      x.at(r, 1) = 3.0;
    }
    CHECK_THROWS_WITH_AS(model::vif(x), "vif: column 1 is constant", DomainError);
  }
}

TEST_CASE("SMOTE") {
  SUBCASE("already balanced input is returned unchanged") {
    model::LabeledDataset data;
    data.x.append_row(std::vector<double>{0.0, 0.0});
    data.x.append_row(std::vector<double>{1.0, 1.0});
    data.y = {0, 1};
    const auto out = model::smote(data, 5, 1);
    CHECK(out.size() == 2);
    CHECK(out.x.data() == data.x.data());
  }
  SUBCASE("two minority points: synthetics lie on the segment between them") {
    model::LabeledDataset data;
    data.x.append_row(std::vector<double>{0.0, 0.0});
    data.x.append_row(std::vector<double>{1.0, 1.0});
    for (int i = 0; i < 10; ++i) data.x.append_row(std::vector<double>{5.0, 5.0 + i});
    data.y = {0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
    const auto out = model::smote(data, 1, 42);
    CHECK(out.count_label(0) == out.count_label(1));
    for (std::size_t i = 12; i < out.size(); ++i) {
      const auto row = out.x.row(i);
      CHECK(row[0] == doctest::Approx(row[1]).epsilon(1e-12));  // on the diagonal
      CHECK(row[0] >= 0.0);
      CHECK(row[0] <= 1.0);
    }
  }
  SUBCASE("100/30 imbalance balances to parity with hull-constrained synthetics") {
    Rng rng(9);
    model::LabeledDataset data;
    std::vector<std::vector<double>> minority;
    for (int i = 0; i < 100; ++i) {
      data.x.append_row(std::vector<double>{rng.uniform(3.0, 4.0), rng.uniform(3.0, 4.0)});
      data.y.push_back(1);
    }
    for (int i = 0; i < 30; ++i) {
      std::vector<double> p{rng.uniform(), rng.uniform()};
      minority.push_back(p);
      data.x.append_row(p);
      data.y.push_back(0);
    }
    const auto out = model::smote(data, 5, 7);
    CHECK(out.count_label(0) == 100);
    CHECK(out.count_label(1) == 100);
    // All original rows are present verbatim, in order.
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(out.x.at(i, 0) == data.x.at(i, 0));
      CHECK(out.x.at(i, 1) == data.x.at(i, 1));
      CHECK(out.y[i] == data.y[i]);
    }
    // Each synthetic point lies on a segment between two minority points.
    for (std::size_t i = data.size(); i < out.size(); ++i) {
      CHECK(out.y[i] == 0);
      const double px = out.x.at(i, 0), py = out.x.at(i, 1);
      bool on_some_segment = false;
      for (std::size_t a = 0; a < minority.size() && !on_some_segment; ++a)
        for (std::size_t b = 0; b < minority.size() && !on_some_segment; ++b) {
          if (a == b) continue;
          const double dx = minority[b][0] - minority[a][0];
          const double dy = minority[b][1] - minority[a][1];
          const double t = std::fabs(dx) > std::fabs(dy) ? (px - minority[a][0]) / dx
                                                         : (py - minority[a][1]) / dy;
          if (t < -1e-9 || t > 1.0 + 1e-9) continue;
          const double ex = minority[a][0] + t * dx;
          const double ey = minority[a][1] + t * dy;
          if (std::fabs(ex - px) < 1e-9 && std::fabs(ey - py) < 1e-9) on_some_segment = true;
        }
      CHECK(on_some_segment);
    }
  }
  SUBCASE("deterministic for a fixed seed") {
    Rng rng(3);
    auto data = random_dataset(rng, 80, 3);
    const auto a = model::smote(data, 5, 123);
    const auto b = model::smote(data, 5, 123);
    REQUIRE(a.size() == b.size());
    CHECK(a.x.data() == b.x.data());
  }
  SUBCASE("minority class of one cannot interpolate") {
    model::LabeledDataset data;
    for (int i = 0; i < 5; ++i) {
      data.x.append_row(std::vector<double>{static_cast<double>(i)});
      data.y.push_back(i == 0 ? 0 : 1);
    }
    CHECK_THROWS_AS(model::smote(data, 5, 1), DomainError);
  }
  SUBCASE("optional majority undersampling meets in the middle") {
    Rng rng(4);
    model::LabeledDataset data;
    for (int i = 0; i < 90; ++i) {
      data.x.append_row(std::vector<double>{rng.uniform(), rng.uniform()});
      data.y.push_back(i < 70 ? 1 : 0);
    }
    const auto out = model::smote(data, 5, 11, /*undersample_majority=*/true);
    CHECK(out.count_label(0) == out.count_label(1));
    CHECK(out.count_label(1) == 45);
  }
}

TEST_CASE("train/test split") {
  SUBCASE("80/20 with class ratios preserved") {
    Rng rng(21);
    auto data = random_dataset(rng, 100, 3);
    const auto n1 = data.count_label(1);
    const auto [train, test] = model::split_train_test(data, 0.2, 5);
    CHECK(train.size() == 80);
    CHECK(test.size() == 20);
    const double test_ratio = static_cast<double>(test.count_label(1)) / 20.0;
    const double all_ratio = static_cast<double>(n1) / 100.0;
    CHECK(std::fabs(test_ratio - all_ratio) <= 0.05 + 1e-12);  // within one row
  }
  SUBCASE("fixed seed reproduces the split") {
    Rng rng(22);
    auto data = random_dataset(rng, 60, 2);
    const auto [a_train, a_test] = model::split_train_test(data, 0.25, 9);
    const auto [b_train, b_test] = model::split_train_test(data, 0.25, 9);
    CHECK(a_train.x.data() == b_train.x.data());
    CHECK(a_test.x.data() == b_test.x.data());
  }
  SUBCASE("3022 rows put 604 or 605 in the test set") {
    for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
      model::LabeledDataset data;
      Rng rng(seed);
      for (int i = 0; i < 3022; ++i) {
        data.x.append_row(std::vector<double>{rng.uniform()});
        data.y.push_back(i < 1419 ? 0 : 1);
      }
      const auto [train, test] = model::split_train_test(data, 0.2, seed);
      CHECK(test.size() >= 604);
      CHECK(test.size() <= 605);
      CHECK(train.size() + test.size() == 3022);
    }
  }
  SUBCASE("partitions are disjoint and cover the input") {
    Rng rng(23);
    auto data = random_dataset(rng, 57, 2);
    data.ids.clear();
    for (int i = 0; i < 57; ++i) data.ids.push_back("row" + std::to_string(i));
    const auto [train, test] = model::split_train_test(data, 0.3, 2);
    std::set<std::string> seen;
    for (const auto& id : train.ids) CHECK(seen.insert(id).second);
    for (const auto& id : test.ids) CHECK(seen.insert(id).second);
    CHECK(seen.size() == 57);
  }
  SUBCASE("a class with fewer than 2 rows is an error") {
    model::LabeledDataset data;
    for (int i = 0; i < 6; ++i) {
      data.x.append_row(std::vector<double>{static_cast<double>(i)});
      data.y.push_back(i == 0 ? 0 : 1);
    }
    CHECK_THROWS_AS(model::split_train_test(data, 0.2, 1), DomainError);
  }
}

TEST_CASE("gradient boosting training") {
  SUBCASE("all labels 1: probability approaches 1, no splits pass the gain bar") {
    model::LabeledDataset data;
    Rng rng(31);
    for (int i = 0; i < 40; ++i) {
      data.x.append_row(std::vector<double>{rng.uniform()});
      data.y.push_back(1);
    }
    model::Hyperparams p;
    p.n_estimators = 5;
    const auto ensemble = model::train_gbdt(data, p, 1);
    for (int i = 0; i < 10; ++i) {
      const double x = rng.uniform();
      CHECK(ensemble.predict_proba(std::vector<double>{x}) > 0.99);
    }
    for (const auto& tree : ensemble.trees) CHECK(tree.nodes.size() == 1);
  }
  SUBCASE("separable 1-D data reaches training AUC 1 within 50 rounds") {
    model::LabeledDataset data;
    Rng rng(32);
    for (int i = 0; i < 200; ++i) {
      const double x = rng.uniform();
      data.x.append_row(std::vector<double>{x});
      data.y.push_back(x > 0.5 ? 1 : 0);
    }
    model::Hyperparams p;
    p.max_depth = 1;
    p.n_estimators = 50;
    p.learning_rate = 0.0646;
    p.subsample = 1.0;
    p.gamma = 0.0;
    p.min_child_weight = 1.0;
    const auto ensemble = model::train_gbdt(data, p, 2);
    std::vector<double> scores(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      scores[i] = ensemble.predict_proba(data.x.row(i));
    const auto metrics = model::evaluate(data.y, scores);
    REQUIRE(metrics.auc_roc.has_value());
    CHECK(*metrics.auc_roc == doctest::Approx(1.0));
  }
  SUBCASE("an ensemble with no trees predicts the prior everywhere") {
    model::TreeEnsemble empty;
    empty.base_score = 0.0;
    empty.feature_names = {"a", "b"};
    CHECK(empty.predict_margin(std::vector<double>{0.3, 0.4}) == 0.0);
    CHECK(empty.predict_proba(std::vector<double>{0.3, 0.4}) == doctest::Approx(0.5));
  }
  SUBCASE("training loss is non-increasing per round at full subsample") {
    Rng rng(33);
    for (int trial = 0; trial < 10; ++trial) {
      auto data = random_dataset(rng, 120, 4, 0.3);
      model::Hyperparams p;
      p.max_depth = 2 + static_cast<int>(rng.uniform_int(4));
      p.n_estimators = 30;
      p.learning_rate = rng.uniform(0.05, 0.3);
      p.subsample = 1.0;
      p.gamma = rng.uniform(0.0, 0.3);
      p.min_child_weight = 1.0 + static_cast<double>(rng.uniform_int(3));
      model::TrainLog log;
      model::train_gbdt(data, p, trial, &log);
      REQUIRE(log.round_loss.size() == 30);
      for (std::size_t r = 1; r < log.round_loss.size(); ++r)
        CHECK(log.round_loss[r] <= log.round_loss[r - 1] + 1e-12);
    }
  }
  SUBCASE("recorded split gains match recomputation from stored sums") {
    Rng rng(34);
    auto data = random_dataset(rng, 300, 5, 0.15);
    model::Hyperparams p;
    p.n_estimators = 10;
    p.max_depth = 4;
    p.subsample = 1.0;
    const auto ensemble = model::train_gbdt(data, p, 3);
    int checked = 0;
    for (const auto& tree : ensemble.trees) {
      for (const auto& node : tree.nodes) {
        if (node.is_leaf()) continue;
        const auto& left = tree.nodes[static_cast<std::size_t>(node.left)];
        const auto& right = tree.nodes[static_cast<std::size_t>(node.right)];
        const auto obj = [&](double g, double h) { return g * g / (h + p.reg_lambda); };
        const double recomputed =
            0.5 * (obj(left.grad_sum, left.hess_sum) + obj(right.grad_sum, right.hess_sum) -
                   obj(node.grad_sum, node.hess_sum)) -
            p.gamma;
        CHECK(node.gain == doctest::Approx(recomputed).epsilon(1e-9));
        ++checked;
      }
    }
    CHECK(checked > 0);
  }
  SUBCASE("leaf covers partition the subsampled rows and respect depth") {
    Rng rng(35);
    auto data = random_dataset(rng, 250, 4, 0.2);
    model::Hyperparams p;
    p.n_estimators = 8;
    p.max_depth = 3;
    p.subsample = 0.7;
    const auto ensemble = model::train_gbdt(data, p, 4);
    const auto expected_rows = static_cast<double>(std::llround(250 * 0.7));
    for (const auto& tree : ensemble.trees) {
      CHECK(tree.depth() <= 3);
      CHECK(tree.nodes[0].cover == expected_rows);
      double leaf_cover = 0.0;
      for (const auto& node : tree.nodes) {
        if (node.is_leaf()) {
          leaf_cover += node.cover;
        } else {
          CHECK(node.cover == tree.nodes[static_cast<std::size_t>(node.left)].cover +
                                  tree.nodes[static_cast<std::size_t>(node.right)].cover);
        }
      }
      CHECK(leaf_cover == tree.nodes[0].cover);
    }
  }
  SUBCASE("deterministic for a fixed seed") {
    Rng rng(36);
    auto data = random_dataset(rng, 150, 4);
    model::Hyperparams p;
    p.n_estimators = 12;
    const auto a = model::train_gbdt(data, p, 9);
    const auto b = model::train_gbdt(data, p, 9);
    CHECK(a.to_json() == b.to_json());
  }
}

TEST_CASE("prediction routing") {
  SUBCASE("single stump adds its leaf weight by side") {
    model::TreeEnsemble ensemble;
    ensemble.base_score = 0.2;
    ensemble.feature_names = {"x"};
    model::Tree stump;
    stump.nodes.resize(3);
    stump.nodes[0].feature = 0;
    stump.nodes[0].threshold = 0.5;
    stump.nodes[0].left = 1;
    stump.nodes[0].right = 2;
    stump.nodes[0].cover = 10;
    stump.nodes[1].weight = 1.0;
    stump.nodes[1].cover = 6;
    stump.nodes[2].weight = -1.0;
    stump.nodes[2].cover = 4;
    ensemble.trees.push_back(stump);
    CHECK(ensemble.predict_margin(std::vector<double>{0.4}) == doctest::Approx(1.2));
    CHECK(ensemble.predict_margin(std::vector<double>{0.6}) == doctest::Approx(-0.8));
  }
  SUBCASE("margins equal an independent per-tree routing oracle") {
    Rng rng(41);
    auto data = random_dataset(rng, 200, 6, 0.2);
    model::Hyperparams p;
    p.n_estimators = 20;
    p.max_depth = 4;
    const auto ensemble = model::train_gbdt(data, p, 5);
    for (int i = 0; i < 100; ++i) {
      std::vector<double> x(6);
      for (auto& v : x) v = rng.uniform(-0.2, 1.2);
      CHECK(ensemble.predict_margin(x) == doctest::Approx(oracles::margin_oracle(ensemble, x))
                                              .epsilon(1e-12));
    }
  }
  SUBCASE("dimension mismatch is an error") {
    model::TreeEnsemble ensemble;
    ensemble.feature_names = {"a", "b"};
    CHECK_THROWS_AS(ensemble.predict_margin(std::vector<double>{1.0}), DomainError);
  }
}

TEST_CASE("model JSON artifact reloads bit-exactly") {
  Rng rng(51);
  auto data = random_dataset(rng, 180, 5, 0.25);
  model::Hyperparams p;
  p.n_estimators = 15;
  p.max_depth = 5;
  const auto ensemble = model::train_gbdt(data, p, 6);
  const auto j = ensemble.to_json();
  const std::string dump = j.dump();
  const auto reloaded = model::TreeEnsemble::from_json(nlohmann::json::parse(dump));
  CHECK(reloaded.to_json().dump() == dump);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.uniform();
    // Bit-exact reload implies bit-exact margins.
    CHECK(ensemble.predict_margin(x) == reloaded.predict_margin(x));
  }
}

TEST_CASE("evaluation metrics") {
  SUBCASE("perfect classifier scores 1 everywhere") {
    const std::vector<int> y{1, 0, 1, 0, 1};
    const std::vector<double> s{0.9, 0.1, 0.8, 0.2, 0.7};
    const auto m = model::evaluate(y, s);
    CHECK(m.f1 == doctest::Approx(1.0));
    CHECK(m.accuracy == doctest::Approx(1.0));
    CHECK(m.precision == doctest::Approx(1.0));
    CHECK(m.recall == doctest::Approx(1.0));
    CHECK(*m.auc_roc == doctest::Approx(1.0));
  }
  SUBCASE("hand-computed four-point case") {
    const std::vector<int> y{1, 0, 1, 0};
    const std::vector<double> s{0.9, 0.8, 0.7, 0.1};
    const auto m = model::evaluate(y, s, 0.5);
    CHECK(m.precision == doctest::Approx(2.0 / 3.0));
    CHECK(m.recall == doctest::Approx(1.0));
    CHECK(m.accuracy == doctest::Approx(0.75));
    CHECK(m.f1 == doctest::Approx(0.8));
    CHECK(*m.auc_roc == doctest::Approx(0.75));
  }
  SUBCASE("scores independent of labels give AUC near one half") {
    Rng rng(61);
    std::vector<int> y(10000);
    std::vector<double> s(10000);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = rng.uniform() < 0.5 ? 1 : 0;
      s[i] = rng.uniform();
    }
    const auto m = model::evaluate(y, s);
    CHECK(*m.auc_roc == doctest::Approx(0.5).epsilon(0.04));
  }
  SUBCASE("rank AUC equals the brute-force pairwise probability") {
    Rng rng(62);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 50 + rng.uniform_int(450);
      std::vector<int> y(n);
      std::vector<double> s(n);
      bool has_both = false;
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = rng.uniform() < 0.4 ? 1 : 0;
        // Coarse scores force ties.
        s[i] = std::floor(rng.uniform() * 20.0) / 20.0 + 0.1 * y[i] * rng.uniform();
      }
      has_both = std::count(y.begin(), y.end(), 1) > 0 && std::count(y.begin(), y.end(), 0) > 0;
      if (!has_both) continue;
      const auto m = model::evaluate(y, s);
      CHECK(*m.auc_roc == doctest::Approx(oracles::auc_pairwise(y, s)).epsilon(1e-12));
    }
  }
  SUBCASE("one-class labels: AUC absent, other metrics still computed") {
    const std::vector<int> y{1, 1, 1};
    const std::vector<double> s{0.9, 0.4, 0.8};
    const auto m = model::evaluate(y, s);
    CHECK_FALSE(m.auc_roc.has_value());
    CHECK(m.recall == doctest::Approx(2.0 / 3.0));
    CHECK(m.precision == doctest::Approx(1.0));
  }
  SUBCASE("f1 is the harmonic mean of precision and recall") {
    Rng rng(63);
    std::vector<int> y(400);
    std::vector<double> s(400);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = rng.uniform() < 0.45 ? 1 : 0;
      s[i] = rng.uniform();
    }
    const auto m = model::evaluate(y, s);
    if (m.precision > 0 && m.recall > 0)
      CHECK(m.f1 ==
            doctest::Approx(2 * m.precision * m.recall / (m.precision + m.recall)).epsilon(1e-12));
  }
}

TEST_CASE("stratified folds keep both classes everywhere") {
  Rng rng(71);
  auto data = random_dataset(rng, 130, 3);
  const auto folds = model::stratified_folds(data.y, 10, 3);
  std::vector<std::set<int>> classes_in(10);
  for (std::size_t i = 0; i < data.size(); ++i) {
    REQUIRE(folds[i] >= 0);
    REQUIRE(folds[i] < 10);
    classes_in[static_cast<std::size_t>(folds[i])].insert(data.y[i]);
  }
  for (const auto& classes : classes_in) CHECK(classes.size() == 2);

  std::vector<int> tiny_labels{0, 1, 1, 1, 1, 1, 1, 1};
  CHECK_THROWS_AS(model::stratified_folds(tiny_labels, 2, 1), DomainError);
}

TEST_CASE("random search cross-validation") {
  SUBCASE("a single-point search space returns that point") {
    Rng rng(81);
    auto data = random_dataset(rng, 80, 3);
    model::SearchSpace space;
    space.gamma = {0.25, 0.25};
    space.learning_rate = {0.1, 0.1};
    space.max_depth = {4, 4};
    space.min_child_weight = {2, 2};
    space.n_estimators = {17, 17};
    space.reg_lambda = {1.5, 1.5};
    space.subsample = {0.8, 0.8};
    const auto cv = model::random_search_cv(data, space, 2, 4, 5);
    CHECK(cv.best.gamma == doctest::Approx(0.25));
    CHECK(cv.best.learning_rate == doctest::Approx(0.1));
    CHECK(cv.best.max_depth == 4);
    CHECK(cv.best.n_estimators == 17);
    CHECK(cv.best.subsample == doctest::Approx(0.8));
  }
  SUBCASE("CV prefers the generator's depth on XOR-style data") {
    // Labels need two-level interactions; depth-1 stumps cannot express them.
    Rng rng(82);
    model::LabeledDataset data;
    for (int i = 0; i < 400; ++i) {
      const double a = rng.uniform(), b = rng.uniform();
      data.x.append_row(std::vector<double>{a, b});
      data.y.push_back(((a > 0.5) != (b > 0.5)) ? 1 : 0);
    }
    model::SearchSpace space;
    space.learning_rate = {0.3, 0.3};
    space.gamma = {0.0, 0.0};
    space.min_child_weight = {1, 1};
    space.n_estimators = {40, 40};
    space.reg_lambda = {1.0, 1.0};
    space.subsample = {1.0, 1.0};
    space.max_depth = {1, 2};  // the only free axis
    const auto cv = model::random_search_cv(data, space, 8, 5, 6);
    CHECK(cv.best.max_depth == 2);
    double best_depth1 = 0.0, best_depth2 = 0.0;
    for (const auto& t : cv.trials)
      (t.params.max_depth == 1 ? best_depth1 : best_depth2) =
          std::max(t.params.max_depth == 1 ? best_depth1 : best_depth2, t.mean_f1);
    CHECK(best_depth2 > best_depth1 + 0.2);
  }
  SUBCASE("same seed gives an identical selection and metric table") {
    Rng rng(83);
    auto data = random_dataset(rng, 90, 3);
    model::SearchSpace space;
    const auto a = model::random_search_cv(data, space, 4, 3, 7);
    const auto b = model::random_search_cv(data, space, 4, 3, 7);
    CHECK(a.best_trial == b.best_trial);
    REQUIRE(a.trials.size() == b.trials.size());
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
      CHECK(a.trials[i].mean_f1 == b.trials[i].mean_f1);
      CHECK(a.trials[i].params.to_json() == b.trials[i].params.to_json());
    }
  }
}

}  // TEST_SUITE
