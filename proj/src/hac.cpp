#include "rsicert/hac.hpp"

#include <vector>

namespace rsicert {

LineFit fit_weighted_line(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                          const Eigen::Ref<const Eigen::VectorXd>& w, Eigen::Index lag) {
  if (x.size() != y.size() || x.size() != w.size()) {
    throw Error(ErrorCode::GridMismatch, "line fit inputs differ in length");
  }
  std::vector<Eigen::Index> rows;
  rows.reserve(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (w[i] > 0.0) rows.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (m < 2) throw Error(ErrorCode::SingularDesign, "fewer than two weighted points");

  Eigen::VectorXd xs(m), ys(m), ws(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    xs[k] = x[rows[k]];
    ys[k] = y[rows[k]];
    ws[k] = w[rows[k]];
  }
  const double wsum = ws.sum();
  const double xbar = ws.dot(xs) / wsum;
  const double ybar = ws.dot(ys) / wsum;
  const Eigen::VectorXd dx = xs.array() - xbar;
  const double sxx = (ws.array() * dx.array().square()).sum();
  if (!(sxx > 0.0)) throw Error(ErrorCode::SingularDesign, "regressor has no weighted spread");

  LineFit fit;
  fit.slope = (ws.array() * dx.array() * (ys.array() - ybar)).sum() / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  fit.n_eff = wsum * wsum / ws.squaredNorm();
  fit.weighted_var_x = sxx / wsum;
  fit.residuals = ys.array() - fit.intercept - fit.slope * xs.array();

  const Eigen::VectorXd sw = ws.cwiseSqrt();
  Eigen::MatrixXd X(m, 2);
  X.col(0) = sw;
  X.col(1) = sw.cwiseProduct(dx);
  const Eigen::VectorXd u = sw.cwiseProduct(fit.residuals);
  const Eigen::Index use_lag = std::min<Eigen::Index>(lag, m - 1);
  fit.se_slope = std::sqrt(std::max(0.0, newey_west_cov(X, u, use_lag)(1, 1)));
  return fit;
}

}  // namespace rsicert
