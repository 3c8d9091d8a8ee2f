#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bwm/interaction.hpp"
#include "bwm/shape_model.hpp"
#include "bwm/tasks.hpp"

namespace bwm::service {

using interaction::InputSample;
using interaction::ModMethod;
using tasks::EstimationRecord;
using tasks::TaskKind;

inline constexpr int kLogVersion = 1;
// Default spacing between mutating calls that omit "t" (s).
inline constexpr double kDefaultTick = 0.001;

struct SessionConfig {
  std::string participant = "p01";
  int participant_index = 0;
  double base_kg = 0.0;
  std::string model_id;
  std::uint64_t seed = 1;
  std::string protocol = "full";  // full: PET, 3 x AMT, PET; or "pet" / "amt"

  void validate() const;
};

nlohmann::json to_json(const SessionConfig& c);
SessionConfig session_config_from_json(const nlohmann::json& j);

struct Trial {
  int index = 0;
  int block = 0;
  TaskKind kind = TaskKind::Pet;
  std::optional<ModMethod> method;
  int level_pct = 0;
  double shown_kg = 0.0;

  bool operator==(const Trial&) const = default;
};

// Trials in session order. Each block of 9 is counterbalanced; the AMT method
// order is one of the 6 permutations, chosen by participant index.
std::vector<Trial> make_plan(const SessionConfig& config);

nlohmann::json to_json(const Trial& t);
Trial trial_from_json(const nlohmann::json& j);
// What a client may see of a trial: no level and no weight. An AMT target is
// revealed only once its trial is presented.
nlohmann::json client_view(const Trial& t);

enum class Status { Ready, Running, Complete };
std::string_view to_string(Status s);

// One session: an append-only event log and the state it implies. Every
// mutation is validated, written to the log, then applied. Thread-safe.
class Session {
 public:
  // Writes the header line to `log_path`, which must not exist.
  static std::unique_ptr<Session> create(std::string id, SessionConfig config, const std::filesystem::path& log_path,
                                         interaction::InteractionConfig interaction = {});
  // Replays an existing log. A torn final line is dropped from the file.
  static std::unique_ptr<Session> restore(const std::filesystem::path& log_path,
                                          interaction::InteractionConfig interaction = {});

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return config_; }
  const std::vector<Trial>& plan() const { return plan_; }

  // Starts the current trial. PET: sets the presented weight (level optional,
  // must match the plan). AMT: resets the weight to base and shows the target.
  nlohmann::json present(std::optional<int> level, std::optional<double> t);
  // AMT only. Missing "t" defaults to the previous event + 1 ms.
  nlohmann::json input(nlohmann::json sample);
  // PET: kg is the estimate. AMT: confirms the current weight (kg ignored).
  nlohmann::json estimate(std::optional<double> kg, std::optional<double> t);

  Status status() const;
  // Client state. Never carries a PET presented weight or the base weight.
  nlohmann::json view() const;
  // Weight the avatar should show now: presented (PET), current (AMT) or base.
  double display_weight() const;
  std::vector<EstimationRecord> records() const;
  // (t, kg) after every input event, in order.
  std::vector<std::pair<double, double>> trajectory() const;
  std::filesystem::path log_path() const { return log_path_; }
  // Current log file contents.
  std::string log_text() const;

 private:
  struct State {
    int current = 0;
    bool active = false;
    double trial_start = 0.0;
    double last_t = 0.0;
    std::optional<double> presented_kg;
    interaction::WeightState weight;
    std::vector<EstimationRecord> records;
  };

  Session() = default;
  nlohmann::json apply(const nlohmann::json& event, bool persist);
  double next_time(std::optional<double> t) const;
  void append(const nlohmann::json& event);
  nlohmann::json view_locked() const;
  Status status_locked() const;

  std::string id_;
  SessionConfig config_;
  std::vector<Trial> plan_;
  interaction::InteractionConfig interaction_;
  std::filesystem::path log_path_;
  std::ofstream log_;
  State state_;
  std::vector<std::pair<double, double>> trajectory_;
  mutable std::mutex mutex_;
};

// Morph data for client-side interpolation of the model's mean body.
struct MorphAssets {
  std::string model_id;
  double base_kg = 0.0;
  std::shared_ptr<const shape::ShapeModel> model;
  shape::MorphTable table;
  nlohmann::json to_json() const;
};

class ModelStore {
 public:
  void add(const std::string& id, std::shared_ptr<const shape::ShapeModel> model);
  void load(const std::filesystem::path& path);  // id = file stem
  bool contains(const std::string& id) const;
  std::shared_ptr<const shape::ShapeModel> get(const std::string& id) const;
  // Built on first use and cached; grid = morph_grid(base, 0.35, spacing).
  std::shared_ptr<const MorphAssets> assets(const std::string& id, double spacing_kg, const shape::StitchOptions& stitch);
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, std::shared_ptr<const shape::ShapeModel>> models_;
  std::map<std::string, std::shared_ptr<const MorphAssets>> assets_;
  mutable std::mutex mutex_;
};

struct ServiceOptions {
  interaction::InteractionConfig interaction;
  tasks::AnalysisOptions analysis;
  double morph_spacing_kg = 1.0;
  shape::StitchOptions stitch;
};

// Owns the sessions under data_dir/sessions and restores them on construction.
class SessionManager {
 public:
  SessionManager(std::filesystem::path data_dir, std::shared_ptr<ModelStore> models, ServiceOptions options = {});

  std::string create(const SessionConfig& config);
  Session& get(const std::string& id);
  std::vector<std::string> ids() const;
  // The analysis report computed from the persisted log only.
  nlohmann::json results(const std::string& id);
  std::string export_log(const std::string& id);
  // Vertex buffer of the session's avatar at its display weight, interpolated
  // from the model's morph table at the same relative change.
  std::vector<shape::Vec3> display(const std::string& id);
  ModelStore& models() { return *models_; }
  const ServiceOptions& options() const { return options_; }

 private:
  std::filesystem::path session_dir() const { return data_dir_ / "sessions"; }

  std::filesystem::path data_dir_;
  std::shared_ptr<ModelStore> models_;
  ServiceOptions options_;
  std::map<std::string, std::unique_ptr<Session>> sessions_;
  mutable std::mutex mutex_;
};

}  // namespace bwm::service
