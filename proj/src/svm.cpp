#include "model_internal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <numeric>
#include <unordered_map>

namespace breathms {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kTau = 1e-12;
constexpr std::size_t kCacheBytes = std::size_t{512} << 20;

// LRU cache of kernel columns restricted to the current active set.
class KernelCache {
 public:
  KernelCache(const RowMatrix& x, const Vector& norms, double gamma)
      : x_(x), norms_(norms), gamma_(gamma), l_(static_cast<std::size_t>(x.rows())) {
    capacity_ = std::max<std::size_t>(2, kCacheBytes / (sizeof(float) * std::max<std::size_t>(l_, 1)));
  }

  double kernel(Index i, Index j) const {
    const double d = norms_[i] + norms_[j] - 2.0 * x_.row(i).dot(x_.row(j));
    return std::exp(-gamma_ * std::max(d, 0.0));
  }

  /// Column i, valid at the positions listed in `active`.
  const std::vector<float>& column(int i, const std::vector<int>& active) {
    auto found = index_.find(i);
    if (found != index_.end()) {
      order_.splice(order_.begin(), order_, found->second);
      return found->second->second;
    }
    if (order_.size() >= capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
    order_.emplace_front(i, std::vector<float>(l_));
    auto& col = order_.front().second;
    for (int k : active) col[static_cast<std::size_t>(k)] = static_cast<float>(kernel(i, k));
    index_[i] = order_.begin();
    return col;
  }

  void full_column(int i, std::vector<double>& out) const {
    out.resize(l_);
    for (std::size_t k = 0; k < l_; ++k) out[k] = kernel(i, static_cast<Index>(k));
  }

  void clear() {
    order_.clear();
    index_.clear();
  }

 private:
  const RowMatrix& x_;
  const Vector& norms_;
  double gamma_;
  std::size_t l_;
  std::size_t capacity_;
  std::list<std::pair<int, std::vector<float>>> order_;
  std::unordered_map<int, std::list<std::pair<int, std::vector<float>>>::iterator> index_;
};

struct Problem {
  RowMatrix x;
  Eigen::VectorXi y;  // +1 / -1
  Vector upper;
};

// Collapses exact duplicate (row, label) pairs into one row whose box bound
// is C times the multiplicity; the dual problem is unchanged.
Problem collapse_duplicates(const Matrix& x, const Eigen::VectorXi& y01, double c) {
  const RowMatrix rm = x;
  const Index n = x.rows();
  const Index d = x.cols();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  const auto less = [&](Index a, Index b) {
    if (y01[a] != y01[b]) return y01[a] < y01[b];
    return std::lexicographical_compare(rm.row(a).data(), rm.row(a).data() + d, rm.row(b).data(),
                                        rm.row(b).data() + d);
  };
  std::stable_sort(order.begin(), order.end(), less);
  std::vector<Index> firsts;
  std::vector<int> counts;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k > 0 && !less(order[k - 1], order[k]) && !less(order[k], order[k - 1])) {
      ++counts.back();
    } else {
      firsts.push_back(order[k]);
      counts.push_back(1);
    }
  }
  Problem p;
  const auto u = static_cast<Index>(firsts.size());
  p.x.resize(u, d);
  p.y.resize(u);
  p.upper.resize(u);
  for (Index k = 0; k < u; ++k) {
    p.x.row(k) = rm.row(firsts[static_cast<std::size_t>(k)]);
    p.y[k] = y01[firsts[static_cast<std::size_t>(k)]] == 1 ? 1 : -1;
    p.upper[k] = c * counts[static_cast<std::size_t>(k)];
  }
  return p;
}

class SmoSolver {
 public:
  SmoSolver(const Problem& problem, double gamma, double tolerance)
      : p_(problem),
        l_(static_cast<int>(problem.x.rows())),
        norms_(problem.x.rowwise().squaredNorm()),
        cache_(p_.x, norms_, gamma),
        eps_(tolerance) {}

  void solve() {
    alpha_.assign(static_cast<std::size_t>(l_), 0.0);
    grad_.assign(static_cast<std::size_t>(l_), -1.0);
    grad_bar_.assign(static_cast<std::size_t>(l_), 0.0);
    active_.resize(static_cast<std::size_t>(l_));
    std::iota(active_.begin(), active_.end(), 0);
    in_active_.assign(static_cast<std::size_t>(l_), 1);

    const long long max_iter = std::max<long long>(10000000LL, 100LL * l_);
    int counter = std::min(l_, 1000) + 1;
    bool unshrunk = false;
    while (iterations_ < max_iter) {
      if (--counter == 0) {
        counter = std::min(l_, 1000);
        shrink(unshrunk);
      }
      int i = -1;
      int j = -1;
      if (select_working_set(i, j)) {
        reconstruct_gradient();
        restore_active();
        if (select_working_set(i, j)) break;
        counter = 1;
      }
      ++iterations_;
      update_pair(i, j);
    }
    if (static_cast<int>(active_.size()) < l_) {
      reconstruct_gradient();
      restore_active();
    }
    compute_rho();
  }

  const std::vector<double>& alpha() const { return alpha_; }
  const std::vector<double>& gradient() const { return grad_; }
  double rho() const { return rho_; }
  long long iterations() const { return iterations_; }

 private:
  double upper(int i) const { return p_.upper[i]; }
  bool at_upper(int i) const { return alpha_[static_cast<std::size_t>(i)] >= upper(i); }
  bool at_lower(int i) const { return alpha_[static_cast<std::size_t>(i)] <= 0.0; }
  double g(int i) const { return grad_[static_cast<std::size_t>(i)]; }
  int yy(int i) const { return p_.y[i]; }

  // Returns true when the active problem is optimal within tolerance.
  bool select_working_set(int& out_i, int& out_j) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    int gmax_idx = -1;
    int gmin_idx = -1;
    double obj_diff_min = std::numeric_limits<double>::infinity();
    for (int t : active_) {
      if (yy(t) == 1) {
        if (!at_upper(t) && -g(t) >= gmax) {
          gmax = -g(t);
          gmax_idx = t;
        }
      } else if (!at_lower(t) && g(t) >= gmax) {
        gmax = g(t);
        gmax_idx = t;
      }
    }
    if (gmax_idx < 0) return true;
    const int i = gmax_idx;
    const auto& ki = cache_.column(i, active_);
    for (int j : active_) {
      const double kij = ki[static_cast<std::size_t>(j)];
      const double qij = yy(i) * yy(j) * kij;
      if (yy(j) == 1) {
        if (!at_lower(j)) {
          const double grad_diff = gmax + g(j);
          if (g(j) >= gmax2) gmax2 = g(j);
          if (grad_diff > 0.0) {
            double quad = 2.0 - 2.0 * yy(i) * qij;
            if (quad <= 0.0) quad = kTau;
            const double obj_diff = -(grad_diff * grad_diff) / quad;
            if (obj_diff <= obj_diff_min) {
              gmin_idx = j;
              obj_diff_min = obj_diff;
            }
          }
        }
      } else if (!at_upper(j)) {
        const double grad_diff = gmax - g(j);
        if (-g(j) >= gmax2) gmax2 = -g(j);
        if (grad_diff > 0.0) {
          double quad = 2.0 + 2.0 * yy(i) * qij;
          if (quad <= 0.0) quad = kTau;
          const double obj_diff = -(grad_diff * grad_diff) / quad;
          if (obj_diff <= obj_diff_min) {
            gmin_idx = j;
            obj_diff_min = obj_diff;
          }
        }
      }
    }
    if (gmax + gmax2 < eps_ || gmin_idx < 0) return true;
    out_i = i;
    out_j = gmin_idx;
    return false;
  }

  void update_pair(int i, int j) {
    // Column i is most recently used, so fetching j cannot evict it.
    const auto& ki = cache_.column(i, active_);
    const auto& kj_ref = cache_.column(j, active_);
    const double kij = ki[static_cast<std::size_t>(j)];
    const double ci = upper(i);
    const double cj = upper(j);
    double& ai = alpha_[static_cast<std::size_t>(i)];
    double& aj = alpha_[static_cast<std::size_t>(j)];
    const double old_ai = ai;
    const double old_aj = aj;
    const bool was_upper_i = at_upper(i);
    const bool was_upper_j = at_upper(j);

    if (yy(i) != yy(j)) {
      double quad = 2.0 - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-g(i) - g(j)) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) {
          aj = 0.0;
          ai = diff;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = -diff;
      }
      if (diff > ci - cj) {
        if (ai > ci) {
          ai = ci;
          aj = ci - diff;
        }
      } else if (aj > cj) {
        aj = cj;
        ai = cj + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (g(i) - g(j)) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > ci) {
        if (ai > ci) {
          ai = ci;
          aj = sum - ci;
        }
      } else if (aj < 0.0) {
        aj = 0.0;
        ai = sum;
      }
      if (sum > cj) {
        if (aj > cj) {
          aj = cj;
          ai = sum - cj;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = sum;
      }
    }

    const double dai = ai - old_ai;
    const double daj = aj - old_aj;
    const double si = yy(i) * dai;
    const double sj = yy(j) * daj;
    for (int k : active_) {
      const auto uk = static_cast<std::size_t>(k);
      grad_[uk] += yy(k) * (si * ki[uk] + sj * kj_ref[uk]);
    }

    update_grad_bar(i, was_upper_i);
    update_grad_bar(j, was_upper_j);
  }

  void update_grad_bar(int i, bool was_upper) {
    const bool now_upper = at_upper(i);
    if (was_upper == now_upper) return;
    cache_.full_column(i, scratch_);
    const double sign = now_upper ? 1.0 : -1.0;
    const double ci = upper(i);
    for (int k = 0; k < l_; ++k)
      grad_bar_[static_cast<std::size_t>(k)] += sign * ci * yy(i) * yy(k) * scratch_[static_cast<std::size_t>(k)];
  }

  bool be_shrunk(int i, double gmax1, double gmax2) const {
    if (at_upper(i)) return yy(i) == 1 ? -g(i) > gmax1 : -g(i) > gmax2;
    if (at_lower(i)) return yy(i) == 1 ? g(i) > gmax2 : g(i) > gmax1;
    return false;
  }

  void shrink(bool& unshrunk) {
    double gmax1 = -std::numeric_limits<double>::infinity();  // max over I_up of -y*G
    double gmax2 = -std::numeric_limits<double>::infinity();  // max over I_low of y*G
    for (int i : active_) {
      if (yy(i) == 1) {
        if (!at_upper(i)) gmax1 = std::max(gmax1, -g(i));
        if (!at_lower(i)) gmax2 = std::max(gmax2, g(i));
      } else {
        if (!at_upper(i)) gmax2 = std::max(gmax2, -g(i));
        if (!at_lower(i)) gmax1 = std::max(gmax1, g(i));
      }
    }
    if (!unshrunk && gmax1 + gmax2 <= eps_ * 10.0) {
      unshrunk = true;
      reconstruct_gradient();
      restore_active();
    }
    std::vector<int> kept;
    kept.reserve(active_.size());
    for (int i : active_) {
      if (be_shrunk(i, gmax1, gmax2)) {
        in_active_[static_cast<std::size_t>(i)] = 0;
      } else {
        kept.push_back(i);
      }
    }
    active_.swap(kept);
  }

  void restore_active() {
    if (static_cast<int>(active_.size()) == l_) return;
    active_.resize(static_cast<std::size_t>(l_));
    std::iota(active_.begin(), active_.end(), 0);
    in_active_.assign(static_cast<std::size_t>(l_), 1);
    cache_.clear();
  }

  void reconstruct_gradient() {
    if (static_cast<int>(active_.size()) == l_) return;
    std::vector<int> inactive;
    for (int k = 0; k < l_; ++k)
      if (!in_active_[static_cast<std::size_t>(k)]) inactive.push_back(k);
    for (int k : inactive) grad_[static_cast<std::size_t>(k)] = grad_bar_[static_cast<std::size_t>(k)] - 1.0;
    for (int i = 0; i < l_; ++i) {
      const double a = alpha_[static_cast<std::size_t>(i)];
      if (a <= 0.0 || a >= upper(i)) continue;
      for (int k : inactive)
        grad_[static_cast<std::size_t>(k)] += a * yy(i) * yy(k) * cache_.kernel(i, k);
    }
  }

  void compute_rho() {
    int n_free = 0;
    double sum_free = 0.0;
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < l_; ++i) {
      const double yg = yy(i) * g(i);
      if (at_upper(i)) {
        if (yy(i) == -1) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (at_lower(i)) {
        if (yy(i) == 1) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    rho_ = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
  }

  const Problem& p_;
  int l_;
  Vector norms_;
  KernelCache cache_;
  double eps_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
  std::vector<double> grad_bar_;
  std::vector<int> active_;
  std::vector<char> in_active_;
  std::vector<double> scratch_;
  double rho_ = 0.0;
  long long iterations_ = 0;
};

double platt_objective(const Vector& dec, const Vector& t, const Vector& w, double a, double b) {
  double f = 0.0;
  for (Index i = 0; i < dec.size(); ++i) {
    const double z = dec[i] * a + b;
    f += w[i] * (z >= 0.0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z)));
  }
  return f;
}

}  // namespace

std::pair<double, double> fit_platt(const Vector& dec, const Eigen::VectorXi& y01, const Vector& w) {
  double prior1 = 0.0;
  double prior0 = 0.0;
  for (Index i = 0; i < dec.size(); ++i) (y01[i] == 1 ? prior1 : prior0) += w[i];
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  Vector t(dec.size());
  for (Index i = 0; i < dec.size(); ++i) t[i] = y01[i] == 1 ? hi : lo;

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = platt_objective(dec, t, w, a, b);
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = 1e-12;
    double h22 = 1e-12;
    double h21 = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    for (Index i = 0; i < dec.size(); ++i) {
      const double z = dec[i] * a + b;
      double p;
      double q;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += w[i] * dec[i] * dec[i] * d2;
      h22 += w[i] * d2;
      h21 += w[i] * dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += w[i] * dec[i] * d1;
      g2 += w[i] * d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= 1e-10) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = platt_objective(dec, t, w, na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step *= 0.5;
    }
    if (step < 1e-10) break;
  }
  return {a, b};
}

Vector SvmModel::decision_function(const Matrix& x) const {
  const Vector sv_norms = support.rowwise().squaredNorm();
  const Vector x_norms = x.rowwise().squaredNorm();
  const Matrix cross = x * support.transpose();
  Vector out(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    double sum = 0.0;
    for (Index s = 0; s < support.rows(); ++s) {
      const double d = std::max(0.0, x_norms[r] + sv_norms[s] - 2.0 * cross(r, s));
      sum += dual_coef[s] * std::exp(-gamma * d);
    }
    out[r] = sum - rho;
  }
  return out;
}

SvmFit fit_svm_detailed(const Matrix& x, const Eigen::VectorXi& y, const Hyperparameters& hp) {
  if (!(hp.svm_c > 0.0) || !(hp.svm_tol > 0.0) || hp.svm_gamma < 0.0)
    throw Error(ErrorCode::InvalidParams, "svm needs c > 0, tol > 0 and gamma >= 0");
  double gamma = hp.svm_gamma;
  if (gamma == 0.0) {
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    gamma = var > 0.0 ? 1.0 / (static_cast<double>(x.cols()) * var) : 1.0;
  }

  const Problem problem = collapse_duplicates(x, y, hp.svm_c);
  SmoSolver solver(problem, gamma, hp.svm_tol);
  solver.solve();

  SvmFit fit;
  const Index u = problem.x.rows();
  fit.alpha = Eigen::Map<const Vector>(solver.alpha().data(), u);
  fit.upper = problem.upper;
  fit.unique_rows = problem.x;
  fit.unique_labels = problem.y;

  auto& model = fit.model;
  model.gamma = gamma;
  model.rho = solver.rho();
  model.iterations = static_cast<int>(std::min<long long>(solver.iterations(), std::numeric_limits<int>::max()));
  std::vector<Index> support;
  for (Index i = 0; i < u; ++i)
    if (fit.alpha[i] > 0.0) support.push_back(i);
  model.support.resize(static_cast<Index>(support.size()), x.cols());
  model.dual_coef.resize(static_cast<Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) {
    model.support.row(static_cast<Index>(k)) = problem.x.row(support[k]);
    model.dual_coef[static_cast<Index>(k)] = fit.alpha[support[k]] * problem.y[support[k]];
  }

  // Training decision values follow from the final gradient.
  Vector decision(u);
  Eigen::VectorXi y01(u);
  const Vector multiplicity = problem.upper / hp.svm_c;
  for (Index i = 0; i < u; ++i) {
    decision[i] = problem.y[i] * (solver.gradient()[static_cast<std::size_t>(i)] + 1.0) - model.rho;
    y01[i] = problem.y[i] == 1 ? 1 : 0;
  }
  std::tie(model.platt_a, model.platt_b) = fit_platt(decision, y01, multiplicity);
  return fit;
}

SvmModel fit_svm(const Matrix& x, const Eigen::VectorXi& y, const Hyperparameters& hp) {
  return fit_svm_detailed(x, y, hp).model;
}

namespace detail {

Matrix svm_predict_proba(const SvmModel& model, const Matrix& x) {
  const Vector decision = model.decision_function(x);
  Matrix proba(x.rows(), 2);
  for (Index i = 0; i < x.rows(); ++i) {
    const double z = decision[i] * model.platt_a + model.platt_b;
    const double p = z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
    proba(i, 1) = p;
    proba(i, 0) = 1.0 - p;
  }
  return proba;
}

}  // namespace detail

}  // namespace breathms
