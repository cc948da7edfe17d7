#include "model_internal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace breathms {

double DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  return nodes[static_cast<std::size_t>(leaf_index(row))].value;
}

int DecisionTree::leaf_index(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(node)];
    node = row[n.feature] <= n.threshold ? n.left : n.right;
  }
  return node;
}

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

namespace detail {

BinnedFeatures bin_features(const Matrix& x, int max_bins) {
  if (max_bins < 2 || max_bins > 256) throw Error(ErrorCode::InvalidParams, "max_bins must be in [2, 256]");
  BinnedFeatures out;
  out.rows = x.rows();
  const auto f = static_cast<std::size_t>(x.cols());
  out.codes.resize(f);
  out.edges.resize(f);
  std::vector<double> sorted(static_cast<std::size_t>(x.rows()));
  for (std::size_t c = 0; c < f; ++c) {
    const auto col = x.col(static_cast<Index>(c));
    std::copy(col.data(), col.data() + col.size(), sorted.begin());
    std::sort(sorted.begin(), sorted.end());
    auto& edges = out.edges[c];
    const auto add_edge = [&](double a, double b) {
      double mid = a + 0.5 * (b - a);
      if (mid >= b) mid = a;
      if (edges.empty() || mid > edges.back()) edges.push_back(mid);
    };
    std::vector<double> unique(sorted);
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    if (unique.size() <= static_cast<std::size_t>(max_bins)) {
      for (std::size_t i = 1; i < unique.size(); ++i) add_edge(unique[i - 1], unique[i]);
    } else {
      const std::size_t n = sorted.size();
      for (int k = 1; k < max_bins; ++k) {
        const std::size_t idx = static_cast<std::size_t>(k) * n / static_cast<std::size_t>(max_bins);
        if (idx == 0 || idx >= n) continue;
        if (sorted[idx - 1] < sorted[idx]) add_edge(sorted[idx - 1], sorted[idx]);
      }
    }
    auto& codes = out.codes[c];
    codes.resize(static_cast<std::size_t>(x.rows()));
    for (Index r = 0; r < x.rows(); ++r) {
      const auto pos = std::lower_bound(edges.begin(), edges.end(), col[r]) - edges.begin();
      codes[static_cast<std::size_t>(r)] = static_cast<std::uint8_t>(pos);
    }
  }
  return out;
}

namespace {

struct Pending {
  int node;
  std::size_t begin;
  std::size_t end;
  int depth;
};

struct Split {
  int feature = -1;
  int bin = -1;
  double gain = 0.0;
};

double node_proxy(SplitCriterion criterion, double w, double s) {
  if (w <= 0.0) return 0.0;
  if (criterion == SplitCriterion::Gini) return (s * s + (w - s) * (w - s)) / w;
  return s * s / w;
}

}  // namespace

DecisionTree grow_tree(const BinnedFeatures& binned, const std::vector<Index>& rows, const Vector& weights,
                       const Vector& targets, const TreeOptions& options, Rng& rng, std::vector<int>* leaf_of) {
  const std::size_t n_features = binned.codes.size();
  const std::size_t m = rows.size();
  std::vector<std::size_t> positions(m);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  if (leaf_of) leaf_of->assign(m, -1);

  const std::size_t max_features =
      options.max_features > 0 ? std::min<std::size_t>(static_cast<std::size_t>(options.max_features), n_features)
                               : n_features;
  std::vector<std::size_t> feature_order(n_features);
  std::vector<double> hist_w(256);
  std::vector<double> hist_s(256);

  DecisionTree tree;
  tree.nodes.emplace_back();
  std::vector<Pending> stack{{0, 0, m, 0}};
  while (!stack.empty()) {
    const Pending job = stack.back();
    stack.pop_back();

    double w_total = 0.0;
    double s_total = 0.0;
    double sq_total = 0.0;
    for (std::size_t i = job.begin; i < job.end; ++i) {
      const std::size_t p = positions[i];
      w_total += weights[static_cast<Index>(p)];
      s_total += weights[static_cast<Index>(p)] * targets[static_cast<Index>(p)];
      sq_total += weights[static_cast<Index>(p)] * targets[static_cast<Index>(p)] * targets[static_cast<Index>(p)];
    }
    const auto make_leaf = [&] {
      auto& node = tree.nodes[static_cast<std::size_t>(job.node)];
      node.feature = -1;
      node.value = w_total > 0.0 ? s_total / w_total : 0.0;
      if (leaf_of)
        for (std::size_t i = job.begin; i < job.end; ++i) (*leaf_of)[positions[i]] = job.node;
    };

    const bool pure = options.criterion == SplitCriterion::Gini && (s_total <= 0.0 || s_total >= w_total);
    if (pure || (options.max_depth > 0 && job.depth >= options.max_depth) || w_total < 2.0 * options.min_leaf) {
      make_leaf();
      continue;
    }

    const double parent = node_proxy(options.criterion, w_total, s_total);
    const double min_gain = options.criterion == SplitCriterion::Gini ? 1e-12 * w_total : 1e-12 * sq_total;
    std::iota(feature_order.begin(), feature_order.end(), std::size_t{0});
    Split best;
    std::size_t informative = 0;
    for (std::size_t k = 0; k < n_features && informative < max_features; ++k) {
      if (max_features < n_features) {
        const auto j = k + static_cast<std::size_t>(rng.below(n_features - k));
        std::swap(feature_order[k], feature_order[j]);
      }
      const std::size_t f = feature_order[k];
      const int bins = binned.bins(f);
      if (bins < 2) continue;
      std::fill(hist_w.begin(), hist_w.begin() + bins, 0.0);
      std::fill(hist_s.begin(), hist_s.begin() + bins, 0.0);
      const auto& codes = binned.codes[f];
      int lo_bin = bins;
      int hi_bin = -1;
      for (std::size_t i = job.begin; i < job.end; ++i) {
        const std::size_t p = positions[i];
        const int b = codes[static_cast<std::size_t>(rows[p])];
        const double w = weights[static_cast<Index>(p)];
        hist_w[static_cast<std::size_t>(b)] += w;
        hist_s[static_cast<std::size_t>(b)] += w * targets[static_cast<Index>(p)];
        lo_bin = std::min(lo_bin, b);
        hi_bin = std::max(hi_bin, b);
      }
      if (lo_bin >= hi_bin) continue;  // constant within this node
      ++informative;
      double w_left = 0.0;
      double s_left = 0.0;
      for (int b = lo_bin; b < hi_bin; ++b) {
        w_left += hist_w[static_cast<std::size_t>(b)];
        s_left += hist_s[static_cast<std::size_t>(b)];
        if (hist_w[static_cast<std::size_t>(b)] == 0.0) continue;
        const double w_right = w_total - w_left;
        if (w_left < options.min_leaf || w_right < options.min_leaf) continue;
        const double gain = node_proxy(options.criterion, w_left, s_left) +
                            node_proxy(options.criterion, w_right, s_total - s_left) - parent;
        if (gain > min_gain && (best.feature < 0 || gain > best.gain)) {
          best.feature = static_cast<int>(f);
          best.bin = b;
          best.gain = gain;
        }
      }
    }
    if (best.feature < 0) {
      make_leaf();
      continue;
    }

    const auto& codes = binned.codes[static_cast<std::size_t>(best.feature)];
    const auto mid_it = std::partition(
        positions.begin() + static_cast<std::ptrdiff_t>(job.begin),
        positions.begin() + static_cast<std::ptrdiff_t>(job.end),
        [&](std::size_t p) { return codes[static_cast<std::size_t>(rows[p])] <= best.bin; });
    const auto mid = static_cast<std::size_t>(mid_it - positions.begin());

    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[static_cast<std::size_t>(job.node)];
    node.feature = best.feature;
    node.threshold = binned.edges[static_cast<std::size_t>(best.feature)][static_cast<std::size_t>(best.bin)];
    node.left = left;
    node.right = left + 1;
    node.value = s_total / w_total;
    stack.push_back({left + 1, mid, job.end, job.depth + 1});
    stack.push_back({left, job.begin, mid, job.depth + 1});
  }
  return tree;
}

}  // namespace detail

RandomForestModel fit_random_forest(const Matrix& x, const Eigen::VectorXi& y, const Hyperparameters& hp,
                                    std::uint64_t seed) {
  if (hp.rf_trees < 1) throw Error(ErrorCode::InvalidParams, "rf.trees must be at least 1");
  const auto binned = detail::bin_features(x, hp.max_bins);
  const Index n = x.rows();
  detail::TreeOptions options;
  options.criterion = detail::SplitCriterion::Gini;
  options.max_depth = hp.rf_max_depth;
  options.min_leaf = std::max(1, hp.rf_min_leaf);
  options.max_features = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(x.cols()))));

  RandomForestModel model;
  model.n_features = x.cols();
  std::vector<int> counts(static_cast<std::size_t>(n));
  for (int t = 0; t < hp.rf_trees; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::fill(counts.begin(), counts.end(), 0);
    for (Index i = 0; i < n; ++i) ++counts[rng.below(static_cast<std::uint64_t>(n))];
    std::vector<Index> rows;
    for (Index i = 0; i < n; ++i)
      if (counts[static_cast<std::size_t>(i)] > 0) rows.push_back(i);
    Vector weights(static_cast<Index>(rows.size()));
    Vector targets(static_cast<Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      weights[static_cast<Index>(k)] = counts[static_cast<std::size_t>(rows[k])];
      targets[static_cast<Index>(k)] = y[rows[k]];
    }
    model.trees.push_back(detail::grow_tree(binned, rows, weights, targets, options, rng, nullptr));
  }
  return model;
}

GradientBoostingModel fit_gradient_boosting(const Matrix& x, const Eigen::VectorXi& y, const Hyperparameters& hp) {
  if (hp.gb_rounds < 1 || hp.gb_depth < 1 || !(hp.gb_shrinkage > 0.0))
    throw Error(ErrorCode::InvalidParams, "gradient boosting needs rounds >= 1, depth >= 1, shrinkage > 0");
  const auto binned = detail::bin_features(x, hp.max_bins);
  const Index n = x.rows();
  const Vector target = y.cast<double>();
  const double prior = target.mean();

  GradientBoostingModel model;
  model.n_features = x.cols();
  model.shrinkage = hp.gb_shrinkage;
  model.init_score = std::log(prior / (1.0 - prior));

  detail::TreeOptions options;
  options.criterion = detail::SplitCriterion::SquaredError;
  options.max_depth = hp.gb_depth;
  std::vector<Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Index{0});
  const Vector ones = Vector::Ones(n);
  Vector raw = Vector::Constant(n, model.init_score);
  Vector prob(n);
  Vector residual(n);
  std::vector<int> leaf_of;
  Rng unused(0);
  for (int round = 0; round < hp.gb_rounds; ++round) {
    for (Index i = 0; i < n; ++i) {
      prob[i] = 1.0 / (1.0 + std::exp(-raw[i]));
      residual[i] = target[i] - prob[i];
    }
    auto tree = detail::grow_tree(binned, rows, ones, residual, options, unused, &leaf_of);
    std::vector<double> numerator(tree.nodes.size(), 0.0);
    std::vector<double> denominator(tree.nodes.size(), 0.0);
    for (Index i = 0; i < n; ++i) {
      const auto leaf = static_cast<std::size_t>(leaf_of[static_cast<std::size_t>(i)]);
      numerator[leaf] += residual[i];
      denominator[leaf] += prob[i] * (1.0 - prob[i]);
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      if (tree.nodes[k].feature >= 0) continue;
      tree.nodes[k].value = denominator[k] > 1e-150 ? numerator[k] / denominator[k] : 0.0;
    }
    for (Index i = 0; i < n; ++i)
      raw[i] += model.shrinkage * tree.nodes[static_cast<std::size_t>(leaf_of[static_cast<std::size_t>(i)])].value;
    model.trees.push_back(std::move(tree));
  }
  return model;
}

namespace detail {

Matrix forest_predict_proba(const RandomForestModel& model, const Matrix& x) {
  Matrix proba(x.rows(), 2);
  for (Index r = 0; r < x.rows(); ++r) {
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += tree.predict(x.row(r));
    const double p = sum / static_cast<double>(model.trees.size());
    proba(r, 0) = 1.0 - p;
    proba(r, 1) = p;
  }
  return proba;
}

Matrix boosting_predict_proba(const GradientBoostingModel& model, const Matrix& x) {
  Matrix proba(x.rows(), 2);
  for (Index r = 0; r < x.rows(); ++r) {
    double raw = model.init_score;
    for (const auto& tree : model.trees) raw += model.shrinkage * tree.predict(x.row(r));
    const double p = 1.0 / (1.0 + std::exp(-raw));
    proba(r, 0) = 1.0 - p;
    proba(r, 1) = p;
  }
  return proba;
}

}  // namespace detail

}  // namespace breathms
