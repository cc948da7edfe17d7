#include "breathms/models.hpp"
#include "breathms/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace breathms;

namespace {

struct Toy {
  Matrix x;
  Eigen::VectorXi y;
};

Toy blobs(Index n, double separation, Rng& rng, Index dims = 2) {
  Toy t{Matrix(n, dims), Eigen::VectorXi(n)};
  for (Index i = 0; i < n; ++i) {
    t.y[i] = i % 2;
    for (Index j = 0; j < dims; ++j) t.x(i, j) = rng.normal() + (t.y[i] ? separation : -separation) * (j == 0);
  }
  return t;
}

Toy xor_clusters(Rng& rng) {
  Toy t{Matrix(200, 2), Eigen::VectorXi(200)};
  for (Index i = 0; i < 200; ++i) {
    const int qx = static_cast<int>(i % 2);
    const int qy = static_cast<int>((i / 2) % 2);
    t.x(i, 0) = (qx ? 2.0 : -2.0) + 0.4 * rng.normal();
    t.x(i, 1) = (qy ? 2.0 : -2.0) + 0.4 * rng.normal();
    t.y[i] = qx ^ qy;
  }
  return t;
}

double accuracy(const Matrix& proba, const Eigen::VectorXi& y) {
  int correct = 0;
  for (Index i = 0; i < y.size(); ++i) correct += (proba(i, 1) > proba(i, 0) ? 1 : 0) == y[i];
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("KNN k=1 reproduces training labels and votes are fractions") {
  Rng rng(1);
  const auto t = blobs(40, 0.5, rng);
  const auto knn = fit_knn(t.x, t.y, 1);
  CHECK(accuracy(predict_proba(knn, t.x), t.y) == 1.0);

  Matrix x(5, 1);
  x << 0, 1, 2, 3, 100;
  Eigen::VectorXi y(5);
  y << 1, 0, 1, 1, 0;
  const auto five = fit_knn(x, y, 5);
  Matrix q(1, 1);
  q << 1.5;
  const auto p = predict_proba(five, q);
  CHECK(p(0, 1) == doctest::Approx(0.6));
  CHECK(p(0, 0) == doctest::Approx(0.4));
}

TEST_CASE("logistic regression on separable data and at its boundary") {
  Rng rng(2);
  const auto t = blobs(60, 4.0, rng);
  const auto lr = fit_logistic(t.x, t.y, 1.0);
  CHECK(lr.gradient_norm < 1e-6);
  CHECK(accuracy(predict_proba(lr, t.x), t.y) == 1.0);

  // A point on the boundary w.x + b = 0.
  Matrix boundary(1, 2);
  const double w0 = lr.weights[0], w1 = lr.weights[1];
  boundary(0, 1) = 0.7;
  boundary(0, 0) = -(lr.bias + w1 * 0.7) / w0;
  CHECK(std::abs(predict_proba(lr, boundary)(0, 1) - 0.5) < 1e-9);
}

TEST_CASE("gradient boosting learns XOR where logistic regression cannot") {
  Rng rng(3);
  const auto t = xor_clusters(rng);
  const auto gb = fit_gradient_boosting(t.x, t.y, Hyperparameters{});
  CHECK(accuracy(predict_proba(gb, t.x), t.y) >= 0.95);
  const auto lr = fit_logistic(t.x, t.y, 1.0);
  CHECK(accuracy(predict_proba(lr, t.x), t.y) <= 0.6);
}

TEST_CASE("random forest probability is the mean of its trees") {
  Rng rng(4);
  const auto t = blobs(80, 1.0, rng, 4);
  Hyperparameters hp;
  hp.rf_trees = 15;
  const auto rf = fit_random_forest(t.x, t.y, hp, 11);
  REQUIRE(rf.trees.size() == 15);
  const auto proba = predict_proba(rf, t.x);
  for (Index i = 0; i < t.x.rows(); ++i) {
    double sum = 0.0;
    for (const auto& tree : rf.trees) sum += tree.predict(t.x.row(i));
    CHECK(std::abs(proba(i, 1) - sum / 15.0) < 1e-12);
  }
  const auto again = fit_random_forest(t.x, t.y, hp, 11);
  CHECK(predict_proba(again, t.x) == proba);
}

TEST_CASE("SVM dual solution satisfies KKT conditions") {
  Rng rng(5);
  auto t = blobs(120, 1.0, rng, 3);
  t.x.row(7) = t.x.row(3);
  t.y[7] = t.y[3];
  Hyperparameters hp;
  hp.svm_tol = 1e-4;
  const auto fit = fit_svm_detailed(t.x, t.y, hp);
  const Vector f = fit.model.decision_function(fit.unique_rows);
  CHECK(fit.unique_rows.rows() == 119);
  double balance = 0.0;
  for (Index i = 0; i < fit.alpha.size(); ++i) {
    const double a = fit.alpha[i];
    const double c = fit.upper[i];
    const double margin = fit.unique_labels[i] * f[i];
    balance += a * fit.unique_labels[i];
    CHECK(a >= -1e-12);
    CHECK(a <= c + 1e-12);
    const double tol = 1e-2;
    if (a <= 1e-8 * c) {
      CHECK(margin >= 1.0 - tol);
    } else if (a >= c * (1 - 1e-8)) {
      CHECK(margin <= 1.0 + tol);
    } else {
      CHECK(std::abs(margin - 1.0) <= tol);
    }
  }
  CHECK(std::abs(balance) < 1e-8);
}

TEST_CASE("every model outputs probabilities that sum to 1") {
  Rng rng(6);
  const auto t = blobs(60, 0.8, rng, 5);
  const auto q = blobs(25, 0.8, rng, 5);
  for (auto kind : kAllModelKinds) {
    const auto model = fit(kind, t.x, t.y, Hyperparameters{}, 3);
    CHECK(kind_of(model) == kind);
    CHECK(input_width(model) == 5);
    const auto p = predict_proba(model, q.x);
    REQUIRE(p.rows() == 25);
    REQUIRE(p.cols() == 2);
    for (Index i = 0; i < p.rows(); ++i) {
      CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-9);
      CHECK(p(i, 0) >= 0.0);
      CHECK(p(i, 1) <= 1.0);
    }
    CHECK(predict_proba(fit(kind, t.x, t.y, Hyperparameters{}, 3), q.x) == p);
  }
}

TEST_CASE("fit rejects a single class and non-finite features") {
  Matrix x = Matrix::Random(6, 2);
  Eigen::VectorXi y = Eigen::VectorXi::Zero(6);
  try {
    fit(ModelKind::Knn, x, y, Hyperparameters{}, 0);
    FAIL("expected SingleClass");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingleClass);
  }
  y[0] = 1;
  x(2, 1) = std::nan("");
  try {
    fit(ModelKind::LogisticRegression, x, y, Hyperparameters{}, 0);
    FAIL("expected NonFiniteFeature");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteFeature);
  }
}

TEST_CASE("soft vote examples") {
  Matrix agree(1, 2);
  agree << 0.2, 0.8;
  const auto unanimous = soft_vote(std::vector<Matrix>(5, agree));
  CHECK(unanimous.labels[0] == 1);
  CHECK(unanimous.p_positive[0] == doctest::Approx(0.8));

  std::vector<Matrix> split;
  for (auto [n, p] : std::vector<std::pair<double, double>>{{1, 0}, {1, 0}, {0, 1}, {0, 1}, {0.5, 0.5}}) {
    Matrix m(1, 2);
    m << n, p;
    split.push_back(m);
  }
  const auto tie = soft_vote(split);
  CHECK(tie.scores(0, 0) == 2.5);
  CHECK(tie.scores(0, 1) == 2.5);
  CHECK(tie.labels[0] == 0);
}

TEST_CASE("soft vote agrees with brute-force summation and is scale invariant") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Matrix> members;
    for (int k = 0; k < 5; ++k) {
      Matrix m(3, 2);
      for (Index i = 0; i < 3; ++i) {
        const double p = std::round(rng.uniform() * 4.0) / 4.0;
        m(i, 0) = 1.0 - p;
        m(i, 1) = p;
      }
      members.push_back(m);
    }
    const auto vote = soft_vote(members);
    auto scaled = members;
    for (auto& m : scaled) m *= 3.0;
    const auto scaled_vote = soft_vote(scaled);
    for (Index i = 0; i < 3; ++i) {
      double neg = 0.0, pos = 0.0;
      for (const auto& m : members) {
        neg += m(i, 0);
        pos += m(i, 1);
      }
      CHECK(vote.labels[i] == (pos > neg ? 1 : 0));
      CHECK(scaled_vote.labels[i] == vote.labels[i]);
    }
  }
}

TEST_CASE("ensemble of five members") {
  Rng rng(8);
  const auto t = blobs(60, 1.5, rng, 3);
  const auto ensemble = fit_ensemble(t.x, t.y, Hyperparameters{}, 9);
  REQUIRE(ensemble.members.size() == 5);
  const auto vote = soft_vote(ensemble, t.x);
  std::vector<Matrix> probs;
  for (const auto& m : ensemble.members) probs.push_back(predict_proba(m, t.x));
  const auto manual = soft_vote(probs);
  CHECK(vote.labels == manual.labels);
  CHECK(vote.p_positive == manual.p_positive);
}

TEST_CASE("oversampling duplicates minority rows until balanced") {
  Eigen::VectorXi y(40);
  for (Index i = 0; i < 40; ++i) y[i] = i % 4 == 0 ? 1 : 0;
  const auto idx = oversample_indices(y, 5);
  REQUIRE(idx.size() == 60);
  int pos = 0;
  std::set<Index> minority;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i < 40) CHECK(idx[i] == static_cast<Index>(i));
    if (y[idx[i]] == 1) {
      ++pos;
      minority.insert(idx[i]);
    }
  }
  CHECK(pos == 30);
  CHECK(minority.size() == 10);
  CHECK(oversample_indices(y, 5) == idx);

  Eigen::VectorXi balanced(6);
  balanced << 0, 1, 0, 1, 1, 0;
  CHECK(oversample_indices(balanced, 1).size() == 6);

  Eigen::VectorXi paper(302);
  for (Index i = 0; i < 302; ++i) paper[i] = i < 91 ? 1 : 0;
  const auto up = oversample_indices(paper, 2);
  CHECK(up.size() == 422);
}
