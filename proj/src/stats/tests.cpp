#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bwm/error.hpp"
#include "bwm/stats.hpp"

namespace bwm::stats {
namespace {

std::vector<double> differences(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::Data, "paired samples differ in length");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    d[i] = a[i] - b[i];
    if (!std::isfinite(d[i])) fail(ErrorKind::Data, "paired samples must be finite");
  }
  return d;
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

void check_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() < 2 || m.cols() < 2) fail(ErrorKind::Data, "need at least 2 participants and 2 conditions");
  if (!m.allFinite()) fail(ErrorKind::Data, "missing or non-finite cells");
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

TestReport paired_t_test(std::span<const double> a, std::span<const double> b) {
  const auto d = differences(a, b);
  const auto n = static_cast<double>(d.size());
  if (d.size() < 2) fail(ErrorKind::Data, "paired t-test needs n >= 2 (insufficient n)");
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) fail(ErrorKind::Numeric, "zero variance of differences");
  TestReport r;
  r.method = "paired_t";
  r.n = static_cast<int>(d.size());
  r.df = n - 1.0;
  r.statistic = mean / (sd / std::sqrt(n));
  r.p = std::min(1.0, t_two_tailed_p(r.statistic, r.df));
  r.direction = sign_of(mean);
  return r;
}

TestReport wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, int exact_max) {
  auto d = differences(a, b);
  std::erase(d, 0.0);
  if (d.empty()) fail(ErrorKind::Data, "all differences are zero");
  const auto m = d.size();
  std::vector<double> abs_d(m);
  for (std::size_t i = 0; i < m; ++i) abs_d[i] = std::abs(d[i]);
  const auto ranks = average_ranks(abs_d);

  // Doubled ranks are integers even with ties.
  std::vector<long> r2(m);
  long w2 = 0;
  double sum_pos = 0.0, sum_neg = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    r2[i] = std::lround(2.0 * ranks[i]);
    if (d[i] > 0.0) {
      w2 += r2[i];
      sum_pos += ranks[i];
    } else {
      sum_neg += ranks[i];
    }
  }

  TestReport r;
  r.method = "wilcoxon_signed_rank";
  r.n = static_cast<int>(m);
  r.statistic = sum_pos;
  r.direction = sign_of(sum_pos - sum_neg);

  double tie_term = 0.0;
  std::vector<double> sorted = abs_d;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < m;) {
    std::size_t j = i;
    while (j < m && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double md = static_cast<double>(m);
  const double mean = md * (md + 1.0) / 4.0;
  const double var = md * (md + 1.0) * (2.0 * md + 1.0) / 24.0 - tie_term / 48.0;
  r.z = var > 0.0 ? (sum_pos - mean) / std::sqrt(var) : 0.0;

  if (static_cast<int>(m) <= exact_max) {
    // Count sign assignments by doubled positive-rank sum.
    const long total = std::accumulate(r2.begin(), r2.end(), 0L);
    std::vector<double> count(static_cast<std::size_t>(total + 1), 0.0);
    count[0] = 1.0;
    long reach = 0;
    for (long v : r2) {
      for (long s = reach; s >= 0; --s) count[static_cast<std::size_t>(s + v)] += count[static_cast<std::size_t>(s)];
      reach += v;
    }
    double lower = 0.0, upper = 0.0;
    for (long s = 0; s <= total; ++s) {
      if (s <= w2) lower += count[static_cast<std::size_t>(s)];
      if (s >= w2) upper += count[static_cast<std::size_t>(s)];
    }
    const double all = std::ldexp(1.0, static_cast<int>(m));
    r.p = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    r.exact = true;
  } else {
    r.p = var > 0.0 ? std::min(1.0, 2.0 * (1.0 - normal_cdf(std::abs(r.z)))) : 1.0;
  }
  return r;
}

TestReport rm_anova(const Eigen::MatrixXd& data) {
  check_matrix(data);
  const double n = static_cast<double>(data.rows());
  const double k = static_cast<double>(data.cols());
  const double grand = data.mean();
  const double ss_total = (data.array() - grand).square().sum();
  const double ss_cond = n * (data.colwise().mean().array() - grand).square().sum();
  const double ss_subj = k * (data.rowwise().mean().array() - grand).square().sum();
  const double ss_err = std::max(0.0, ss_total - ss_cond - ss_subj);
  TestReport r;
  r.method = "rm_anova";
  r.n = static_cast<int>(data.rows());
  r.df = k - 1.0;
  r.df2 = (k - 1.0) * (n - 1.0);
  const double scale = 1e-12 * std::max(ss_total, std::numeric_limits<double>::min());
  if (ss_cond <= scale) {
    r.statistic = 0.0;
    r.p = 1.0;
  } else if (ss_err <= scale) {
    r.statistic = std::numeric_limits<double>::infinity();
    r.p = 0.0;
  } else {
    r.statistic = (ss_cond / r.df) / (ss_err / r.df2);
    r.p = f_sf(r.statistic, r.df, r.df2);
  }
  return r;
}

TestReport friedman(const Eigen::MatrixXd& data) {
  check_matrix(data);
  const auto n = data.rows();
  const auto k = data.cols();
  Eigen::VectorXd rank_sum = Eigen::VectorXd::Zero(k);
  double tie_term = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> row(data.row(i).begin(), data.row(i).end());
    const auto ranks = average_ranks(row);
    for (Eigen::Index j = 0; j < k; ++j) rank_sum[j] += ranks[j];
    std::sort(row.begin(), row.end());
    for (std::size_t a = 0; a < row.size();) {
      std::size_t b = a;
      while (b < row.size() && row[b] == row[a]) ++b;
      const double t = static_cast<double>(b - a);
      tie_term += t * t * t - t;
      a = b;
    }
  }
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  const Eigen::VectorXd mean_rank = rank_sum / nd;
  const double raw = 12.0 * nd / (kd * (kd + 1.0)) * (mean_rank.array() - (kd + 1.0) / 2.0).square().sum();
  const double correction = 1.0 - tie_term / (nd * (kd * kd * kd - kd));
  TestReport r;
  r.method = "friedman";
  r.n = static_cast<int>(n);
  r.df = kd - 1.0;
  r.statistic = correction > 0.0 ? raw / correction : 0.0;
  r.p = r.statistic > 0.0 ? chi2_sf(r.statistic, r.df) : 1.0;
  return r;
}

nlohmann::json to_json(const TestReport& r) {
  nlohmann::json j{{"method", r.method}, {"stat", r.statistic}, {"p", r.p}, {"n", r.n}, {"direction", r.direction}};
  if (r.df > 0.0) j["df"] = r.df;
  if (r.df2 > 0.0) j["df2"] = r.df2;
  if (r.method == "wilcoxon_signed_rank") {
    j["z"] = r.z;
    j["exact"] = r.exact;
  }
  return j;
}

}  // namespace bwm::stats
