#pragma once

// Heteroskedasticity- and autocorrelation-consistent (Newey-West) covariance
// for least-squares slopes. Header-only so that any scalar type Eigen accepts
// can be used; the library instantiates it with double.

#include <Eigen/Dense>
#include <cmath>

#include "rsicert/error.hpp"

namespace rsicert {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Automatic Bartlett lag floor(4 (n/100)^(2/9)).
inline Eigen::Index newey_west_auto_lag(Eigen::Index n) {
  return static_cast<Eigen::Index>(std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 2.0 / 9.0)));
}

/// S = sum_t u_t^2 z_t z_t' + sum_{l=1..L} w_l sum_t u_t u_{t-l} (z_t z_{t-l}' + z_{t-l} z_t'),
/// with Bartlett weights w_l = 1 - l/(L+1).
template <typename DerivedZ, typename DerivedU>
MatrixX<typename DerivedZ::Scalar> hac_meat(const Eigen::MatrixBase<DerivedZ>& Z,
                                            const Eigen::MatrixBase<DerivedU>& u, Eigen::Index lag) {
  using Scalar = typename DerivedZ::Scalar;
  const Eigen::Index n = Z.rows();
  if (u.size() != n) throw Error(ErrorCode::GridMismatch, "residual count differs from design rows");
  if (lag < 0 || lag >= n) throw Error(ErrorCode::InvalidParams, "Newey-West lag must satisfy 0 <= lag < n");

  const MatrixX<Scalar> scores = Z.derived().array().colwise() * u.derived().array();
  MatrixX<Scalar> S = scores.transpose() * scores;
  for (Eigen::Index l = 1; l <= lag; ++l) {
    const Scalar w = Scalar(1) - Scalar(l) / Scalar(lag + 1);
    const MatrixX<Scalar> gamma = scores.bottomRows(n - l).transpose() * scores.topRows(n - l);
    S += w * (gamma + gamma.transpose());
  }
  return S;
}

/// Sandwich covariance (X'X)^{-1} S (X'X)^{-1} for an OLS fit of y on X with residuals u.
template <typename DerivedX, typename DerivedU>
MatrixX<typename DerivedX::Scalar> newey_west_cov(const Eigen::MatrixBase<DerivedX>& X,
                                                  const Eigen::MatrixBase<DerivedU>& u, Eigen::Index lag) {
  using Scalar = typename DerivedX::Scalar;
  const MatrixX<Scalar> XtX = X.transpose() * X;
  Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(XtX);
  if (qr.rank() < XtX.cols()) throw Error(ErrorCode::SingularDesign, "design matrix is rank deficient");
  const MatrixX<Scalar> bread = qr.inverse();
  return bread * hac_meat(X, u, lag) * bread;
}

template <typename DerivedX, typename DerivedU>
VectorX<typename DerivedX::Scalar> newey_west_se(const Eigen::MatrixBase<DerivedX>& X,
                                                 const Eigen::MatrixBase<DerivedU>& u, Eigen::Index lag) {
  // Bartlett weights keep S positive semidefinite, so the diagonal is >= 0 up to rounding.
  return newey_west_cov(X, u, lag).diagonal().cwiseMax(typename DerivedX::Scalar(0)).cwiseSqrt();
}

/// Weighted straight-line fit y ~ a + b x with a Newey-West slope error.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double se_slope = 0.0;
  double n_eff = 0.0;       ///< Kish effective sample size (sum w)^2 / sum w^2
  double weighted_var_x = 0.0;
  Eigen::VectorXd residuals;  ///< y - a - b x on the positively weighted rows, in input order
};

/// Rows with zero weight are ignored. Throws SingularDesign when fewer than two
/// distinct abscissae carry weight.
LineFit fit_weighted_line(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                          const Eigen::Ref<const Eigen::VectorXd>& w, Eigen::Index lag);

}  // namespace rsicert
