#include <cmath>
#include <limits>
#include <random>

#include <doctest.h>

#include "bwm/error.hpp"
#include "bwm/stats.hpp"

using namespace bwm;
using namespace bwm::stats;

namespace {

// Two-tailed exact p by enumerating all 2^m sign assignments.
double wilcoxon_brute(const std::vector<double>& d) {
  std::vector<double> nz;
  for (double v : d)
    if (v != 0.0) nz.push_back(v);
  std::vector<double> abs_d;
  for (double v : nz) abs_d.push_back(std::abs(v));
  const auto ranks = average_ranks(abs_d);
  double w = 0.0;
  for (std::size_t i = 0; i < nz.size(); ++i)
    if (nz[i] > 0.0) w += ranks[i];
  const std::size_t m = nz.size();
  double lower = 0.0, upper = 0.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      if (mask & (std::size_t{1} << i)) s += ranks[i];
    if (s <= w + 1e-9) lower += 1.0;
    if (s >= w - 1e-9) upper += 1.0;
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / std::ldexp(1.0, static_cast<int>(m)));
}

}  // namespace

TEST_CASE("t distribution quantiles and tails") {
  CHECK(t_quantile(0.975, 3) == doctest::Approx(3.18244631).epsilon(1e-8));
  CHECK(t_quantile(0.975, 10) == doctest::Approx(2.22813885).epsilon(1e-8));
  CHECK(t_quantile(0.975, 11) == doctest::Approx(2.20098516).epsilon(1e-8));
  CHECK(t_quantile(0.975, 30) == doctest::Approx(2.04227246).epsilon(1e-8));
  CHECK(t_two_tailed_p(2.74, 11) == doctest::Approx(0.019231444851761755).epsilon(1e-10));
  CHECK(t_two_tailed_p(4.86, 11) == doctest::Approx(0.0005026676930171655).epsilon(1e-10));
  CHECK(t_two_tailed_p(0.0, 5) == doctest::Approx(1.0));
  CHECK(t_cdf(0.0, 7) == doctest::Approx(0.5));
  CHECK(t_cdf(-2.74, 11) == doctest::Approx(0.019231444851761755 / 2).epsilon(1e-10));
}

TEST_CASE("chi-square and F tails") {
  CHECK(chi2_sf(12.0, 2) == doctest::Approx(0.002478752176666357).epsilon(1e-10));
  CHECK(chi2_sf(12.0, 2) == doctest::Approx(std::exp(-6.0)).epsilon(1e-12));
  CHECK(f_sf(8.384615384615408, 2, 4) == doctest::Approx(0.03709190672153618).epsilon(1e-10));
  CHECK(gamma_p(3.0, 2.0) + gamma_q(3.0, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
}

TEST_CASE("paired t-test on d = 1..4") {
  const std::vector<double> a{1, 2, 3, 4}, b{0, 0, 0, 0};
  const auto r = paired_t_test(a, b);
  CHECK(r.statistic == doctest::Approx(3.872983346207417).epsilon(1e-12));
  CHECK(r.p == doctest::Approx(0.030466291662170977).epsilon(1e-10));
  CHECK(r.df == 3.0);
  CHECK(r.direction == 1);
}

TEST_CASE("paired t-test errors") {
  const std::vector<double> one{1.0}, two{1.0, 2.0}, three{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(paired_t_test(one, one), Error);
  CHECK_THROWS_AS(paired_t_test(two, three), Error);
  try {
    paired_t_test(two, two);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
  }
}

TEST_CASE("HC4 regression on a fixed dataset") {
  const std::vector<double> xs{-20, -15, -10, -5, 0, 5, 10, 15, 20, -20, 0, 20};
  const std::vector<double> ys{1.9, 1.7, 1.6, 1.3, 1.5, 1.2, 1.35, 0.9, 1.1, 2.4, 1.45, 0.6};
  Eigen::MatrixXd x(12, 2);
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = xs[i];
    y[i] = ys[i];
  }
  const auto r = ols_hc4(x, y);
  CHECK(r.coefficients[0] == doctest::Approx(1.4166666666666667).epsilon(1e-12));
  CHECK(r.coefficients[1] == doctest::Approx(-0.02913043478260869).epsilon(1e-12));
  CHECK(r.robust_se[0] == doctest::Approx(0.06774881106216503).epsilon(1e-10));
  CHECK(r.robust_se[1] == doctest::Approx(0.006218292118485254).epsilon(1e-10));
  CHECK(r.classical_se[0] == doctest::Approx(0.06257845317625202).epsilon(1e-10));
  CHECK(r.classical_se[1] == doctest::Approx(0.004520136282246578).epsilon(1e-10));
  CHECK(r.t[1] == doctest::Approx(-4.684635946261194).epsilon(1e-10));
  CHECK(r.p[1] == doctest::Approx(0.000861425329707223).epsilon(1e-8));
  CHECK(r.r_squared == doctest::Approx(0.8059487118106466).epsilon(1e-12));
  CHECK(r.df == 10);
}

TEST_CASE("HC4 on an exact fit and on constant response") {
  Eigen::MatrixXd x(5, 2);
  Eigen::VectorXd y(5), flat = Eigen::VectorXd::Constant(5, 2.0);
  for (int i = 0; i < 5; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i;
    y[i] = 3.0 + 2.0 * i;
  }
  const auto fit = ols_hc4(x, y);
  CHECK(fit.coefficients[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0));
  const auto c = ols_hc4(x, flat);
  CHECK(c.r_squared == 1.0);
  CHECK(std::abs(c.coefficients[1]) < 1e-12);
}

TEST_CASE("HC4 errors") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 1, 1, 1, 1, 1, 1, 1;
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(4, 0, 3);
  try {
    ols_hc4(x, y);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
  }
  CHECK_THROWS_AS(ols_hc4(Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Ones(2)), Error);
  CHECK_THROWS_AS(ols_hc4(Eigen::MatrixXd::Ones(5, 1), Eigen::VectorXd::Ones(4)), Error);
}

TEST_CASE("average ranks share ties") {
  const std::vector<double> v{3.0, 1.0, 3.0, 2.0};
  const auto r = average_ranks(v);
  CHECK(r == std::vector<double>{3.5, 1.0, 3.5, 2.0});
}

TEST_CASE("Wilcoxon exact with five positive differences") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{0, 0, 0, 0, 0};
  const auto r = wilcoxon_signed_rank(a, b);
  CHECK(r.exact);
  CHECK(r.p == doctest::Approx(0.0625).epsilon(1e-14));
  CHECK(r.statistic == 15.0);
  CHECK(r.direction == 1);
}

TEST_CASE("Wilcoxon exact agrees with enumeration") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(1, 10);
  std::uniform_int_distribution<int> value(-4, 4);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = size(rng);
    std::vector<double> a(m), b(m, 0.0);
    for (auto& v : a) v = value(rng);  // small integers force ties and zeros
    bool any = false;
    for (double v : a) any = any || v != 0.0;
    if (!any) continue;
    const auto r = wilcoxon_signed_rank(a, b);
    REQUIRE(r.exact);
    std::vector<double> d = a;
    CHECK(r.p == doctest::Approx(wilcoxon_brute(d)).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked > 90);
}

TEST_CASE("Wilcoxon normal approximation with ties") {
  const std::vector<double> a{3.1, 2.0, 4.5, 5.0, 1.2, 3.3, 2.2, 4.1, 3.0, 2.5, 6.1, 1.9, 3.3, 4.0, 2.8};
  const std::vector<double> b{2.1, 2.0, 3.5, 3.0, 1.7, 2.3, 3.2, 3.1, 2.0, 2.0, 4.1, 2.9, 2.3, 3.0, 2.8};
  const auto r = wilcoxon_signed_rank(a, b);
  CHECK_FALSE(r.exact);
  CHECK(r.n == 13);
  CHECK(r.p == doctest::Approx(0.03733528541274635).epsilon(1e-10));
  const auto forced = wilcoxon_signed_rank(a, b, 20);
  CHECK(forced.exact);
}

TEST_CASE("Wilcoxon all-zero differences") {
  const std::vector<double> a{1, 2, 3};
  CHECK_THROWS_AS(wilcoxon_signed_rank(a, a), Error);
}

TEST_CASE("repeated-measures ANOVA") {
  Eigen::MatrixXd m(3, 3);
  m << 7, 9, 12, 4, 6, 9, 5, 8, 7;
  const auto r = rm_anova(m);
  CHECK(r.statistic == doctest::Approx(8.384615384615408).epsilon(1e-12));
  CHECK(r.p == doctest::Approx(0.03709190672153618).epsilon(1e-10));
  CHECK(r.df == 2.0);
  CHECK(r.df2 == 4.0);

  Eigen::MatrixXd same(3, 3);
  same << 1, 1, 1, 2, 2, 2, 5, 5, 5;
  const auto z = rm_anova(same);
  CHECK(z.statistic == 0.0);
  CHECK(z.p == 1.0);

  Eigen::MatrixXd additive(3, 3);
  additive << 1, 2, 3, 2, 3, 4, 5, 6, 7;
  const auto inf = rm_anova(additive);
  CHECK(std::isinf(inf.statistic));
  CHECK(inf.p == 0.0);

  Eigen::MatrixXd missing = m;
  missing(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(rm_anova(missing), Error);
}

TEST_CASE("Friedman test") {
  Eigen::MatrixXd perfect(6, 3);
  for (int i = 0; i < 6; ++i) perfect.row(i) << 1, 2, 3;
  const auto r = friedman(perfect);
  CHECK(r.statistic == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(r.p == doctest::Approx(0.002478752176666357).epsilon(1e-10));

  Eigen::MatrixXd ties(5, 3);
  ties << 1, 2, 2, 3, 1, 2, 1, 1, 3, 2, 3, 1, 1, 2, 3;
  const auto t = friedman(ties);
  CHECK(t.statistic == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(t.p == doctest::Approx(0.6065306597126316).epsilon(1e-10));

  const auto flat = friedman(Eigen::MatrixXd::Ones(4, 3));
  CHECK(flat.statistic == 0.0);
  CHECK(flat.p == 1.0);
}

TEST_CASE("test report JSON") {
  const std::vector<double> a{1, 2, 3, 4}, b{0, 0, 0, 0};
  const auto j = to_json(paired_t_test(a, b));
  CHECK(j["method"] == "paired_t");
  CHECK(j["df"] == 3.0);
  CHECK(j.contains("p"));
}
