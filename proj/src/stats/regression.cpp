#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "bwm/error.hpp"
#include "bwm/stats.hpp"

namespace bwm::stats {
namespace {

// t = b / se, with se = 0 meaning an exact fit: t = 0 for b = 0, otherwise +/-inf.
double safe_t(double b, double se) {
  if (se > 0.0) return b / se;
  if (b == 0.0) return 0.0;
  return std::copysign(std::numeric_limits<double>::infinity(), b);
}

}  // namespace

RegressionReport ols_hc4(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (y.size() != n) fail(ErrorKind::Data, "design and response differ in length");
  if (p < 1) fail(ErrorKind::Data, "design needs at least one column");
  if (n <= p) fail(ErrorKind::Data, "regression needs more observations than parameters");
  if (!x.allFinite() || !y.allFinite()) fail(ErrorKind::Data, "regression inputs must be finite");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-12);
  if (qr.rank() < p) fail(ErrorKind::Numeric, "rank-deficient design matrix");

  RegressionReport r;
  r.n = static_cast<int>(n);
  r.rank = static_cast<int>(qr.rank());
  r.df = static_cast<int>(n - p);
  r.coefficients = qr.solve(y);

  // (X'X)^-1 = P R^-1 R^-T P^T
  const Eigen::MatrixXd rr = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv = rr.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd perm = qr.colsPermutation();
  const Eigen::MatrixXd xtx_inv = perm * (r_inv * r_inv.transpose()) * perm.transpose();

  const Eigen::VectorXd e = y - x * r.coefficients;
  r.leverage = (x * xtx_inv).cwiseProduct(x).rowwise().sum();
  const double h_mean = r.leverage.mean();

  Eigen::VectorXd omega(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = std::min(r.leverage[i], 1.0);
    const double delta = std::min(4.0, h / h_mean);
    omega[i] = e[i] == 0.0 ? 0.0 : e[i] * e[i] / std::pow(1.0 - h, delta);
  }
  const Eigen::MatrixXd bread = xtx_inv * x.transpose();
  const Eigen::MatrixXd cov = bread * omega.asDiagonal() * bread.transpose();
  r.robust_se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();

  const double sse = e.squaredNorm();
  r.classical_se = (xtx_inv.diagonal() * (sse / static_cast<double>(n - p))).cwiseMax(0.0).cwiseSqrt();

  r.t.resize(p);
  r.p.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    r.t[j] = safe_t(r.coefficients[j], r.robust_se[j]);
    r.p[j] = t_two_tailed_p(r.t[j], static_cast<double>(n - p));
  }

  const double sst = (y.array() - y.mean()).square().sum();
  r.r_squared = sst > 0.0 ? std::clamp(1.0 - sse / sst, 0.0, 1.0) : 1.0;
  return r;
}

nlohmann::json to_json(const RegressionReport& r, const std::vector<std::string>& names) {
  nlohmann::json coefs = nlohmann::json::array();
  for (Eigen::Index j = 0; j < r.coefficients.size(); ++j) {
    coefs.push_back({{"name", j < static_cast<Eigen::Index>(names.size()) ? names[j] : "x" + std::to_string(j)},
                     {"estimate", r.coefficients[j]},
                     {"se", r.classical_se[j]},
                     {"robust_se", r.robust_se[j]},
                     {"t", r.t[j]},
                     {"p", r.p[j]}});
  }
  return {{"method", "ols_hc4"}, {"n", r.n}, {"df", r.df}, {"r_squared", r.r_squared}, {"coefficients", coefs}};
}

}  // namespace bwm::stats
