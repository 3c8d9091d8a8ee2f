#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include "bwm/error.hpp"
#include "bwm/tasks.hpp"

namespace bwm::tasks {
namespace {

// Williams sequence for 9 treatments: 0, 1, n-1, 2, n-2, ...
constexpr std::array<int, kLevelCount> kWilliams = {0, 1, 8, 2, 7, 3, 6, 4, 5};

std::uint64_t participant_seed(std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x5eedu};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(TaskKind k) { return k == TaskKind::Pet ? "pet" : "amt"; }

TaskKind parse_task_kind(std::string_view s) {
  if (s == "pet" || s == "PET") return TaskKind::Pet;
  if (s == "amt" || s == "AMT") return TaskKind::Amt;
  fail(ErrorKind::Data, "unknown task kind '" + std::string(s) + "'");
}

std::vector<int> task_levels() {
  std::vector<int> levels(kLevelCount);
  for (int i = 0; i < kLevelCount; ++i) levels[i] = -20 + 5 * i;
  return levels;
}

std::vector<int> counterbalanced_order(int participant_index, std::uint64_t seed) {
  if (participant_index < 0) fail(ErrorKind::Usage, "participant index must be >= 0");
  std::vector<int> symbols = task_levels();
  std::mt19937_64 rng(seed);
  std::shuffle(symbols.begin(), symbols.end(), rng);
  const int row = participant_index % kLevelCount;
  std::vector<int> order(kLevelCount);
  for (int j = 0; j < kLevelCount; ++j) order[j] = symbols[(kWilliams[j] + row) % kLevelCount];
  return order;
}

double presented_weight(double base_kg, double level_pct) { return base_kg * (1.0 + level_pct / 100.0); }

double pet_misestimation(double estimated_kg, double presented_kg) {
  if (!(presented_kg > 0.0)) fail(ErrorKind::Data, "presented weight must be positive");
  return (estimated_kg - presented_kg) / presented_kg;
}

double amt_misestimation(double modified_kg, double target_kg) {
  if (!(target_kg > 0.0)) fail(ErrorKind::Data, "target weight must be positive");
  return (target_kg - modified_kg) / target_kg;
}

double bmi(double weight_kg, double height_m) {
  if (!(height_m > 0.0)) fail(ErrorKind::Data, "height must be positive");
  return weight_kg / (height_m * height_m);
}

double EstimationRecord::misestimation() const {
  return kind == TaskKind::Pet ? pet_misestimation(response_kg, shown_kg) : amt_misestimation(response_kg, shown_kg);
}

void EstimationRecord::validate() const {
  if (!std::isfinite(base_kg) || !std::isfinite(level_pct) || !std::isfinite(shown_kg) || !std::isfinite(response_kg) ||
      !std::isfinite(rt_s)) {
    fail(ErrorKind::Data, "record fields must be finite");
  }
  if (!(base_kg > 0.0)) fail(ErrorKind::Data, "record base weight must be positive");
  if (std::abs(shown_kg - presented_weight(base_kg, level_pct)) > 1e-9) {
    fail(ErrorKind::Data, "record shown weight does not equal base * (1 + level / 100)");
  }
  if (!(shown_kg > 0.0)) fail(ErrorKind::Data, "record shown weight must be positive");
  if (!(response_kg > 0.0)) fail(ErrorKind::Data, "record response must be positive");
  if (rt_s < 0.0) fail(ErrorKind::Data, "record response time must be >= 0");
  if (kind == TaskKind::Amt && !method) fail(ErrorKind::Data, "AMT record needs a method");
  if (kind == TaskKind::Pet && method) fail(ErrorKind::Data, "PET record must not carry a method");
  if (participant.empty() || participant.find_first_of(",\"\n\r") != std::string::npos) {
    fail(ErrorKind::Data, "participant id must be non-empty without commas, quotes or newlines");
  }
  if (trial < 0) fail(ErrorKind::Data, "trial index must be >= 0");
}

TrialSummary summarize(std::span<const EstimationRecord> records) {
  if (records.empty()) fail(ErrorKind::Data, "no records to summarize");
  TrialSummary s;
  for (const auto& r : records) {
    if (r.kind != records.front().kind) fail(ErrorKind::Data, "summarize needs records of one task kind");
    const double m = r.misestimation();
    s.mean_m += m;
    s.mean_abs += std::abs(m);
  }
  s.n = static_cast<int>(records.size());
  s.mean_m /= s.n;
  s.mean_abs /= s.n;
  return s;
}

LevelAnalysis analyze_vs_level(std::span<const EstimationRecord> records) {
  std::set<double> distinct;
  for (const auto& r : records) distinct.insert(r.level_pct);
  if (distinct.size() < 3) fail(ErrorKind::Data, "level regression needs at least 3 distinct levels");
  const auto n = static_cast<Eigen::Index>(records.size());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd m(n), a(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    x(i, 0) = 1.0;
    x(i, 1) = r.level_pct;
    m[i] = 100.0 * r.misestimation();
    a[i] = std::abs(m[i]);
  }
  return {stats::ols_hc4(x, m), stats::ols_hc4(x, a)};
}

DirectionSplit split_by_direction(std::span<const EstimationRecord> records, int exact_max) {
  struct Acc {
    std::vector<double> neg_m, pos_m, neg_a, pos_a;
  };
  std::map<std::string, Acc> by_participant;
  for (const auto& r : records) {
    const double m = 100.0 * r.misestimation();
    auto& acc = by_participant[r.participant];
    if (r.level_pct < 0.0) {
      acc.neg_m.push_back(m);
      acc.neg_a.push_back(std::abs(m));
    } else if (r.level_pct > 0.0) {
      acc.pos_m.push_back(m);
      acc.pos_a.push_back(std::abs(m));
    }
  }
  if (by_participant.empty()) fail(ErrorKind::Data, "no records to split");
  std::vector<double> nm, pm, na, pa;
  for (const auto& [id, acc] : by_participant) {
    if (acc.neg_m.empty() || acc.pos_m.empty()) {
      fail(ErrorKind::Data, "participant " + id + " lacks a negative or a positive level");
    }
    nm.push_back(mean(acc.neg_m));
    pm.push_back(mean(acc.pos_m));
    na.push_back(mean(acc.neg_a));
    pa.push_back(mean(acc.pos_a));
  }
  DirectionSplit out;
  out.participants = static_cast<int>(nm.size());
  out.negative_m = mean(nm);
  out.positive_m = mean(pm);
  out.negative_a = mean(na);
  out.positive_a = mean(pa);
  if (nm.size() < 2) fail(ErrorKind::Data, "direction split needs at least 2 participants (insufficient n)");
  // Identical directional means carry no evidence either way: report p = 1.
  if (nm == pm) {
    out.m_test = {.method = "paired_t", .df = static_cast<double>(nm.size() - 1), .n = out.participants};
  } else {
    out.m_test = stats::paired_t_test(nm, pm);
  }
  if (na == pa) {
    out.a_test = {.method = "wilcoxon_signed_rank", .n = 0, .exact = true};
  } else {
    out.a_test = stats::wilcoxon_signed_rank(na, pa, exact_max);
  }
  return out;
}

std::vector<EstimationRecord> simulate_estimator(const SimulationOptions& o) {
  if (!(o.gain >= 0.0 && o.gain <= 2.0)) fail(ErrorKind::Usage, "gain must be in [0, 2]");
  if (!(o.noise >= 0.0) || !(o.negative_extra_noise >= 0.0)) fail(ErrorKind::Usage, "noise must be >= 0");
  if (!(o.base_kg > 0.0)) fail(ErrorKind::Usage, "base weight must be positive");
  if (o.kind == TaskKind::Amt && !(o.gain > 0.0)) fail(ErrorKind::Usage, "AMT simulation needs gain > 0");
  const std::vector<int> levels = o.levels.empty() ? counterbalanced_order(o.participant_index, o.seed) : o.levels;
  const double ref = o.reference_kg.value_or(o.base_kg);

  std::mt19937_64 rng(participant_seed(o.seed, o.participant_index));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> rt(2.0, 10.0);

  std::vector<EstimationRecord> out;
  out.reserve(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    EstimationRecord r;
    r.kind = o.kind;
    if (o.kind == TaskKind::Amt) r.method = o.method;
    r.participant = o.participant;
    r.trial = static_cast<int>(i);
    r.base_kg = o.base_kg;
    r.level_pct = levels[i];
    r.shown_kg = presented_weight(o.base_kg, r.level_pct);
    const double sd = (o.noise + (r.level_pct < 0.0 ? o.negative_extra_noise : 0.0)) * r.shown_kg;
    const double z = gauss(rng);
    const double ideal = o.kind == TaskKind::Pet ? ref + o.gain * (r.shown_kg - ref) : ref + (r.shown_kg - ref) / o.gain;
    r.response_kg = ideal + sd * z;
    r.rt_s = rt(rng);
    if (!(r.response_kg > 0.0)) fail(ErrorKind::Numeric, "simulated response is not positive; lower the noise");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EstimationRecord> simulate_cohort(SimulationOptions options, int participants) {
  if (participants < 1) fail(ErrorKind::Usage, "need at least one participant");
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> weight(72.0, 10.0);
  std::vector<EstimationRecord> out;
  for (int i = 0; i < participants; ++i) {
    SimulationOptions p = options;
    p.participant_index = i;
    char id[16];
    std::snprintf(id, sizeof(id), "p%02d", i + 1);
    p.participant = id;
    p.base_kg = std::round(10.0 * std::clamp(weight(rng), 50.0, 110.0)) / 10.0;
    auto records = simulate_estimator(p);
    out.insert(out.end(), records.begin(), records.end());
  }
  return out;
}

std::vector<double> ranking_score(const std::vector<std::vector<int>>& rankings, double top_weight) {
  if (rankings.empty()) fail(ErrorKind::Data, "no rankings");
  const std::size_t items = rankings.front().size();
  if (items == 0) fail(ErrorKind::Data, "ranking has no items");
  if (top_weight < static_cast<double>(items)) fail(ErrorKind::Data, "top weight must be >= item count");
  std::vector<double> score(items, 0.0);
  for (std::size_t r = 0; r < rankings.size(); ++r) {
    const auto& ranks = rankings[r];
    if (ranks.size() != items) fail(ErrorKind::Data, "ranking " + std::to_string(r) + " has the wrong item count");
    for (int rank : ranks) {
      const auto at_or_above = std::count_if(ranks.begin(), ranks.end(), [&](int o) { return o <= rank; });
      if (rank < 1 || at_or_above != rank) fail(ErrorKind::Data, "malformed ranking " + std::to_string(r));
    }
    for (std::size_t i = 0; i < items; ++i) score[i] += top_weight - (ranks[i] - 1);
  }
  for (double& s : score) s /= static_cast<double>(rankings.size());
  return score;
}

}  // namespace bwm::tasks
