#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace bwm::stats {

// Regularized incomplete beta I_x(a, b) and gamma functions P(a, x), Q(a, x).
double incomplete_beta(double a, double b, double x);
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double normal_cdf(double z);
double t_cdf(double t, double df);
double t_two_tailed_p(double t, double df);
double t_quantile(double p, double df);
double chi2_sf(double x, double df);
double f_sf(double f, double df1, double df2);

struct RegressionReport {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd classical_se;
  Eigen::VectorXd robust_se;  // HC4
  Eigen::VectorXd t;          // coefficient / robust_se
  Eigen::VectorXd p;          // two-tailed, n - p degrees of freedom
  Eigen::VectorXd leverage;
  double r_squared = 0.0;
  int n = 0;
  int rank = 0;
  int df = 0;
};

// OLS with HC4 covariance: (X'X)^-1 X' diag(e_i^2 / (1 - h_i)^d_i) X (X'X)^-1,
// d_i = min(4, h_i / mean(h)). X must contain the intercept column if wanted.
RegressionReport ols_hc4(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct TestReport {
  std::string method;
  double statistic = 0.0;
  double p = 1.0;
  double df = 0.0;   // 0 when the test has none
  double df2 = 0.0;  // second df of F tests
  double z = 0.0;    // Wilcoxon normal score
  int n = 0;
  int direction = 0;  // sign of the effect (a - b), 0 if none
  bool exact = false;
};

inline constexpr int kDefaultExactSwitch = 12;

TestReport paired_t_test(std::span<const double> a, std::span<const double> b);
// Zero differences dropped, ties get average ranks. Exact p for m <= exact_max,
// tie-corrected normal approximation above.
TestReport wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                int exact_max = kDefaultExactSwitch);
// Participants x conditions, no missing cells.
TestReport rm_anova(const Eigen::MatrixXd& data);
TestReport friedman(const Eigen::MatrixXd& data);

// Average ranks (1-based) of the values, ties sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> values);

nlohmann::json to_json(const TestReport& r);
nlohmann::json to_json(const RegressionReport& r, const std::vector<std::string>& names);

}  // namespace bwm::stats
