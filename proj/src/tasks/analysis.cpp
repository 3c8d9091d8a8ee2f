#include <set>
#include <tuple>

#include "bwm/error.hpp"
#include "bwm/tasks.hpp"

namespace bwm::tasks {
namespace {

const std::vector<std::string> kRegressionNames = {"intercept", "level_pct"};

nlohmann::json group_report(std::span<const EstimationRecord> records, const AnalysisOptions& options) {
  const auto& first = records.front();
  nlohmann::json g;
  g["kind"] = to_string(first.kind);
  g["method"] = first.method ? nlohmann::json(interaction::to_string(*first.method)) : nlohmann::json(nullptr);
  const auto s = summarize(records);
  g["summary"] = {{"n", s.n}, {"mean_m_pct", 100.0 * s.mean_m}, {"mean_abs_pct", 100.0 * s.mean_abs}};

  std::set<double> levels;
  std::set<std::string> participants;
  for (const auto& r : records) {
    levels.insert(r.level_pct);
    participants.insert(r.participant);
  }
  g["participants"] = participants.size();
  g["levels"] = levels.size();

  try {
    const auto a = analyze_vs_level(records);
    g["regression"] = {{"m", stats::to_json(a.m, kRegressionNames)}, {"a", stats::to_json(a.a, kRegressionNames)}};
  } catch (const Error& e) {
    g["regression"] = nullptr;
    g["regression_unavailable"] = e.what();
  }
  try {
    const auto d = split_by_direction(records, options.exact_max);
    g["direction"] = {{"participants", d.participants},
                      {"negative_m_pct", d.negative_m},
                      {"positive_m_pct", d.positive_m},
                      {"negative_a_pct", d.negative_a},
                      {"positive_a_pct", d.positive_a},
                      {"m_test", stats::to_json(d.m_test)},
                      {"a_test", stats::to_json(d.a_test)}};
  } catch (const Error& e) {
    g["direction"] = nullptr;
    g["direction_unavailable"] = e.what();
  }
  return g;
}

}  // namespace

nlohmann::json analysis_report(std::span<const EstimationRecord> records, const AnalysisOptions& options) {
  if (records.empty()) fail(ErrorKind::Data, "no completed trials to analyze");
  // PET first, then AMT by method.
  auto key = [](const EstimationRecord& r) {
    return std::make_tuple(static_cast<int>(r.kind), r.method ? static_cast<int>(*r.method) : -1);
  };
  std::set<std::tuple<int, int>> keys;
  for (const auto& r : records) keys.insert(key(r));

  nlohmann::json groups = nlohmann::json::array();
  for (const auto& k : keys) {
    std::vector<EstimationRecord> subset;
    for (const auto& r : records)
      if (key(r) == k) subset.push_back(r);
    groups.push_back(group_report(subset, options));
  }
  nlohmann::json raw = nlohmann::json::array();
  for (const auto& r : records) raw.push_back(to_json(r));
  return {{"n_records", records.size()}, {"groups", groups}, {"records", raw}};
}

std::string format_report(const nlohmann::json& report) { return report.dump(2) + "\n"; }

}  // namespace bwm::tasks
