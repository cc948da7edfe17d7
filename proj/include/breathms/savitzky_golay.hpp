#pragma once

#include "breathms/core.hpp"

#include <Eigen/Dense>

#include <algorithm>

namespace breathms {

/// Least-squares polynomial convolution weights for a window spanning `left`
/// samples before and `right` samples after the evaluation point.
///
/// The fitted polynomial has degree min(polyorder, left + right). Applying the
/// weights yields the `deriv`-th derivative (unit sample spacing) of that fit at
/// the evaluation point, so deriv = 0 reproduces any polynomial of degree
/// <= polyorder exactly.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> savgol_weights(int left, int right, int polyorder, int deriv) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const int n = left + right + 1;
  const int order = std::min(polyorder, n - 1);
  if (deriv > order) return Vec::Zero(n);

  Mat vandermonde(n, order + 1);
  for (int j = 0; j < n; ++j) {
    const Scalar x = static_cast<Scalar>(j - left);
    Scalar p = 1;
    for (int k = 0; k <= order; ++k) {
      vandermonde(j, k) = p;
      p *= x;
    }
  }
  // Row `deriv` of the pseudo-inverse maps samples to the fitted coefficient.
  const Mat pinv = vandermonde.colPivHouseholderQr().solve(Mat::Identity(n, n));
  Scalar factorial = 1;
  for (int k = 2; k <= deriv; ++k) factorial *= static_cast<Scalar>(k);
  return pinv.row(deriv).transpose() * factorial;
}

/// Symmetric kernel for an odd `window`.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> savgol_kernel(int window, int polyorder, int deriv = 0) {
  const int half = window / 2;
  return savgol_weights<Scalar>(half, half, polyorder, deriv);
}

inline void check_savgol_params(Index length, int window, int polyorder, int deriv) {
  if (window < 3 || window % 2 == 0) throw Error(ErrorCode::InvalidParams, "window must be odd and >= 3");
  if (polyorder < 0 || polyorder >= window) throw Error(ErrorCode::InvalidParams, "polyorder must be in [0, window)");
  if (deriv < 0) throw Error(ErrorCode::InvalidParams, "deriv must be non-negative");
  if (length < window)
    throw Error(ErrorCode::WindowTooLarge,
                "window " + std::to_string(window) + " exceeds signal length " + std::to_string(length));
}

/// Savitzky-Golay filter. Edge samples are fitted on the truncated window
/// that is actually available (no padding).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> savitzky_golay(const Eigen::MatrixBase<Derived>& signal,
                                                                        int window, int polyorder, int deriv = 0) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Index n = signal.size();
  check_savgol_params(n, window, polyorder, deriv);

  const int half = window / 2;
  const Vec interior = savgol_kernel<Scalar>(window, polyorder, deriv);
  Vec out(n);
  for (Index i = 0; i < n; ++i) {
    const int left = static_cast<int>(std::min<Index>(half, i));
    const int right = static_cast<int>(std::min<Index>(half, n - 1 - i));
    if (left == half && right == half) {
      out[i] = interior.dot(signal.derived().segment(i - half, window));
    } else {
      const Vec w = savgol_weights<Scalar>(left, right, polyorder, deriv);
      out[i] = w.dot(signal.derived().segment(i - left, left + right + 1));
    }
  }
  return out;
}

}  // namespace breathms
