#include "breathms/features.hpp"
#include "breathms/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace breathms;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// Cyclic Jacobi rotations on a symmetric matrix; eigenvalues sorted descending.
std::pair<Vector, Matrix> jacobi_eigen(Matrix a) {
  const Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) > a(y, y); });
  Vector values(n);
  Matrix vectors(n, n);
  for (Index i = 0; i < n; ++i) {
    values[i] = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return {values, vectors};
}

double median_of(Vector v) {
  std::sort(v.data(), v.data() + v.size());
  const Index n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("zero-variance pruning") {
  Matrix x(3, 3);
  x << 1, 5, 0, 2, 5, 0, 3, 5, 1;
  CHECK(varying_columns(x) == std::vector<Index>{0, 2});

  FeatureMatrix m;
  m.values = Matrix::Zero(4, 3);
  m.values.col(1) << 1, 2, 3, 4;
  m.feature_index = {10, 11, 12};
  for (int i = 0; i < 4; ++i) {
    m.labels.push_back(Label::Negative);
    m.origins.push_back("P");
    m.combos.emplace_back();
  }
  const auto [pruned, kept] = prune_zero_variance(m);
  CHECK(kept == std::vector<Index>{1});
  CHECK(pruned.feature_index == std::vector<int>{11});
  CHECK(pruned.values.col(0) == m.values.col(1));

  Rng rng(1);
  const auto r = random_matrix(20, 6, rng);
  CHECK(varying_columns(r).size() == 6);
  CHECK(select_columns(r, varying_columns(r)) == r);
}

TEST_CASE("standard scaler example and invariants") {
  Matrix col(2, 1);
  col << 0, 2;
  const auto s = fit_scaler(ScalerKind::Standard, col);
  CHECK(s.location[0] == doctest::Approx(1.0));
  CHECK(s.scale[0] == doctest::Approx(1.0));
  const auto t = apply_scaler(s, col);
  CHECK(t(0, 0) == doctest::Approx(-1.0));
  CHECK(t(1, 0) == doctest::Approx(1.0));

  Rng rng(2);
  Matrix x = random_matrix(57, 8, rng) * 3.0;
  x.array() += 5.0;
  const auto fitted = fit_scaler(ScalerKind::Standard, x);
  const auto z = apply_scaler(fitted, x);
  for (Index j = 0; j < z.cols(); ++j) {
    const double mean = z.col(j).mean();
    const double sd = std::sqrt((z.col(j).array() - mean).square().mean());
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(sd - 1.0) < 1e-9);
  }
  CHECK((apply_scaler(fitted, z) - z).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("robust scaler resists an outlier") {
  Matrix col(5, 1);
  col << 1, 2, 3, 4, 100;
  const auto robust = fit_scaler(ScalerKind::Robust, col);
  CHECK(robust.location[0] == doctest::Approx(3.0));
  CHECK(robust.scale[0] == doctest::Approx(2.0));
  const auto standard = fit_scaler(ScalerKind::Standard, col);
  CHECK(standard.location[0] == doctest::Approx(22.0));
  const auto rz = apply_scaler(robust, col);
  const auto sz = apply_scaler(standard, col);
  // Inliers keep their spread under the robust scaler and collapse under the standard one.
  CHECK(rz(3, 0) - rz(0, 0) == doctest::Approx(1.5));
  CHECK(sz(3, 0) - sz(0, 0) < 0.1);

  Rng rng(3);
  const auto x = random_matrix(41, 6, rng);
  const auto z = apply_scaler(fit_scaler(ScalerKind::Robust, x), x);
  for (Index j = 0; j < z.cols(); ++j) CHECK(std::abs(median_of(z.col(j))) < 1e-9);
}

TEST_CASE("degenerate scale stays 1") {
  Matrix x(4, 2);
  x << 1, 7, 2, 7, 3, 7, 4, 7;
  for (auto kind : {ScalerKind::Standard, ScalerKind::Robust}) {
    const auto s = fit_scaler(kind, x);
    CHECK(s.degenerate == std::vector<Index>{1});
    CHECK(s.scale[1] == 1.0);
    CHECK(apply_scaler(s, x).col(1).cwiseAbs().maxCoeff() == 0.0);
  }
  const auto none = fit_scaler(ScalerKind::None, x);
  CHECK(apply_scaler(none, x) == x);
  CHECK(parse_scaler_kind("robust") == ScalerKind::Robust);
  CHECK(to_string(ScalerKind::Standard) == "standard");
  CHECK_THROWS_AS(parse_scaler_kind("minmax"), Error);
}

TEST_CASE("SURF* matches a brute-force weight computation on 10 samples") {
  Rng rng(4);
  Matrix x(10, 2);
  Eigen::VectorXi y(10);
  for (Index i = 0; i < 10; ++i) {
    y[i] = i < 5 ? 1 : 0;
    x(i, 0) = y[i];
    x(i, 1) = rng.uniform();
  }
  const auto model = fit_surf_star(x, y, {1, 2000});

  const Vector span = x.colwise().maxCoeff() - x.colwise().minCoeff();
  double total = 0.0;
  for (Index i = 0; i < 10; ++i)
    for (Index j = i + 1; j < 10; ++j) total += (x.row(i) - x.row(j)).cwiseAbs().sum();
  const double threshold = total / 45.0;
  Vector oracle = Vector::Zero(2);
  for (Index i = 0; i < 10; ++i) {
    for (Index f = 0; f < 2; ++f) {
      double near = 0.0, far = 0.0;
      int n_near = 0, n_far = 0;
      for (Index j = 0; j < 10; ++j) {
        if (j == i) continue;
        const double d = (x.row(i) - x.row(j)).cwiseAbs().sum();
        const double diff = std::abs(x(i, f) - x(j, f)) / span[f];
        const double update = y[i] == y[j] ? -diff : diff;
        if (d < threshold) {
          near += update;
          ++n_near;
        } else if (d > threshold) {
          far -= update;
          ++n_far;
        }
      }
      if (n_near) oracle[f] += near / n_near;
      if (n_far) oracle[f] += far / n_far;
    }
  }
  oracle /= 10.0;
  CHECK((model.weights - oracle).cwiseAbs().maxCoeff() < 1e-12);
  // Every miss lies beyond the threshold and every hit agrees on the binary
  // feature, so far scoring drives its weight to exactly -1.
  CHECK(model.weights[0] == doctest::Approx(-1.0));
  CHECK(model.selected.size() == 1);
}

TEST_CASE("SURF* weights vanish on label-independent data") {
  Rng rng(5);
  const auto x = random_matrix(200, 5, rng);
  Eigen::VectorXi y(200);
  for (Index i = 0; i < 200; ++i) y[i] = static_cast<int>(rng.below(2));
  const auto model = fit_surf_star(x, y);
  CHECK(model.weights.cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("SURF* symmetry, determinism and shift invariance") {
  Rng rng(6);
  Matrix x = random_matrix(60, 4, rng);
  Eigen::VectorXi y(60);
  for (Index i = 0; i < 60; ++i) {
    y[i] = x(i, 0) + 0.3 * rng.normal() > 0 ? 1 : 0;
  }
  x.col(3) = x.col(0);
  const auto a = fit_surf_star(x, y);
  CHECK(std::abs(a.weights[0] - a.weights[3]) < 1e-6);
  const auto b = fit_surf_star(x, y);
  CHECK(a.weights == b.weights);
  Matrix shifted = x;
  shifted.col(2).array() += 1000.0;
  const auto c = fit_surf_star(shifted, y);
  CHECK(std::abs(c.weights[2] - a.weights[2]) < 1e-9);
}

TEST_CASE("PCA on a line in 3-D") {
  Rng rng(7);
  Matrix x(30, 3);
  const Eigen::RowVector3d dir(1.0, -2.0, 0.5);
  for (Index i = 0; i < 30; ++i) x.row(i) = Eigen::RowVector3d(1, 2, 3) + rng.normal() * dir;
  const auto pca = fit_pca(x, 1);
  CHECK(pca.explained_variance[0] / pca.total_variance > 0.999);
  const Matrix z = project(pca, x);
  const Matrix back = (z * pca.components).rowwise() + pca.mean.transpose();
  CHECK((back - x).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("full-rank PCA is a rotation") {
  Rng rng(8);
  const auto x = random_matrix(40, 6, rng);
  const auto pca = fit_pca(x, 6);
  const Matrix z = project(pca, x);
  for (Index i = 0; i < 40; ++i)
    for (Index j = i + 1; j < 40; ++j)
      CHECK(std::abs((z.row(i) - z.row(j)).norm() - (x.row(i) - x.row(j)).norm()) < 1e-8);
}

TEST_CASE("PCA matches an independent Jacobi eigensolver on 100x50 matrices") {
  Rng rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    Matrix x = random_matrix(100, 50, rng);
    for (Index j = 0; j < 50; ++j) x.col(j) *= 1.0 + 0.1 * static_cast<double>(j);
    const auto pca = fit_pca(x, 20);
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const Matrix cov = centered.transpose() * centered / 99.0;
    const auto [values, vectors] = jacobi_eigen(cov);
    REQUIRE(pca.n_components() == 20);
    for (Index k = 0; k < 20; ++k) {
      CHECK(std::abs(pca.explained_variance[k] - values[k]) < 1e-6);
      const double align = std::abs(pca.components.row(k).dot(vectors.col(k)));
      CHECK(std::abs(align - 1.0) < 1e-6);
    }
    const Matrix z = project(pca, x);
    const Matrix oracle = centered * vectors.leftCols(20);
    for (Index k = 0; k < 20; ++k) {
      const double sign = z.col(k).dot(oracle.col(k)) >= 0 ? 1.0 : -1.0;
      CHECK((z.col(k) - sign * oracle.col(k)).cwiseAbs().maxCoeff() < 1e-6);
    }
    const Matrix gram = pca.components * pca.components.transpose();
    CHECK((gram - Matrix::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(pca.explained_variance.sum() <= cov.trace() + 1e-8);
    CHECK(std::abs(pca.total_variance - cov.trace()) < 1e-8);
  }
}

TEST_CASE("PCA reduces the component count on rank-limited input") {
  Rng rng(10);
  const auto x = random_matrix(5, 30, rng);
  const auto pca = fit_pca(x, 20);
  CHECK(pca.reduced);
  CHECK(pca.n_components() <= 4);
  CHECK(pca.requested == 20);
  for (Index k = 1; k < pca.n_components(); ++k) CHECK(pca.explained_variance[k] <= pca.explained_variance[k - 1]);
}
