#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bwm/interaction.hpp"
#include "bwm/stats.hpp"

namespace bwm::tasks {

using interaction::ModMethod;

enum class TaskKind { Pet, Amt };

std::string_view to_string(TaskKind k);
TaskKind parse_task_kind(std::string_view s);

inline constexpr int kLevelCount = 9;

// -20, -15, ..., +20 (percent of base weight), ascending.
std::vector<int> task_levels();

// Row (participant_index mod 9) of a cyclic Williams-sequence Latin square; the
// seed permutes which level each symbol stands for.
std::vector<int> counterbalanced_order(int participant_index, std::uint64_t seed);

double presented_weight(double base_kg, double level_pct);

// Fractions. PET: (e - p) / p. AMT: (t - m) / t.
double pet_misestimation(double estimated_kg, double presented_kg);
double amt_misestimation(double modified_kg, double target_kg);

double bmi(double weight_kg, double height_m);

struct EstimationRecord {
  TaskKind kind = TaskKind::Pet;
  std::optional<ModMethod> method;  // AMT only
  std::string participant;
  int trial = 0;
  double base_kg = 0.0;
  double level_pct = 0.0;
  double shown_kg = 0.0;     // presented (PET) or target (AMT)
  double response_kg = 0.0;  // estimate e (PET) or modified m (AMT)
  double rt_s = 0.0;

  double misestimation() const;
  void validate() const;
  bool operator==(const EstimationRecord&) const = default;
};

struct TrialSummary {
  double mean_m = 0.0;    // fraction
  double mean_abs = 0.0;  // fraction
  int n = 0;
};

TrialSummary summarize(std::span<const EstimationRecord> records);

// Regressions of M and |M| (both in percent) on level (percent).
struct LevelAnalysis {
  stats::RegressionReport m;
  stats::RegressionReport a;
};

LevelAnalysis analyze_vs_level(std::span<const EstimationRecord> records);

struct DirectionSplit {
  int participants = 0;
  double negative_m = 0.0;  // percent, mean over participants
  double positive_m = 0.0;
  double negative_a = 0.0;
  double positive_a = 0.0;
  stats::TestReport m_test;  // paired t on per-participant M (negative vs positive)
  stats::TestReport a_test;  // Wilcoxon on per-participant A
};

DirectionSplit split_by_direction(std::span<const EstimationRecord> records,
                                  int exact_max = stats::kDefaultExactSwitch);

struct SimulationOptions {
  TaskKind kind = TaskKind::Pet;
  ModMethod method = ModMethod::Joystick;  // AMT only
  double gain = 1.0;
  double noise = 0.0;  // sd as a fraction of the true weight
  std::optional<double> reference_kg;  // defaults to the participant's base weight
  std::uint64_t seed = 1;
  std::vector<int> levels;  // defaults to task_levels()
  double base_kg = 70.0;
  std::string participant = "p01";
  int participant_index = 0;  // selects the counterbalanced row
  double negative_extra_noise = 0.0;  // added to noise on negative levels
};

// PET: e = ref + g (p - ref) + N(0, noise p).
// AMT: the user stops where the perceived weight ref + g (m - ref) meets the
// target, m = ref + (t - ref) / g, plus N(0, noise t).
std::vector<EstimationRecord> simulate_estimator(const SimulationOptions& options);

// `participants` simulated participants with base weights drawn per seed.
std::vector<EstimationRecord> simulate_cohort(SimulationOptions options, int participants);

// Item scores from rankings. rankings[r][i] is rater r's 1-based rank of item
// i; tied items share the lower position (1, 3, 3). Score = mean over raters of
// top_weight - (rank - 1).
std::vector<double> ranking_score(const std::vector<std::vector<int>>& rankings, double top_weight);

struct AnalysisOptions {
  int exact_max = stats::kDefaultExactSwitch;
};

// Per (kind, method) group summaries, level regressions and direction split,
// plus the raw records. Shared by the service and the analyze command.
nlohmann::json analysis_report(std::span<const EstimationRecord> records, const AnalysisOptions& options = {});
// Report text as served and as written by the analyze command.
std::string format_report(const nlohmann::json& report);

// Record serialization.
inline constexpr const char* kRecordsCsvHeader = "kind,method,participant,trial,base_kg,level_pct,shown_kg,response_kg,rt_s";

nlohmann::json to_json(const EstimationRecord& r);
EstimationRecord record_from_json(const nlohmann::json& j);
std::string format_records_csv(std::span<const EstimationRecord> records);
std::vector<EstimationRecord> parse_records_csv(std::string_view text);
std::string format_records_jsonl(std::span<const EstimationRecord> records);
// Plain record lines, or a session log whose "estimate" events carry a "record".
std::vector<EstimationRecord> parse_records_jsonl(std::string_view text);
// Picks CSV or JSON Lines from the content.
std::vector<EstimationRecord> load_records(const std::filesystem::path& path);
void save_records(std::span<const EstimationRecord> records, const std::filesystem::path& path);

}  // namespace bwm::tasks
