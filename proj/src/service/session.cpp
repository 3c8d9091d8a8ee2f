#include <algorithm>
#include <array>
#include <cmath>

#include "bwm/error.hpp"
#include "bwm/input_json.hpp"
#include "bwm/service.hpp"
#include "bwm/text_io.hpp"

namespace bwm::service {
namespace {

constexpr double kReplayTolerance = 1e-9;  // kg

std::array<ModMethod, 3> method_order(int participant_index) {
  std::array<ModMethod, 3> m{ModMethod::Gesture, ModMethod::Joystick, ModMethod::Objects};
  for (int i = 0; i < participant_index % 6; ++i) std::next_permutation(m.begin(), m.end());
  return m;
}

}  // namespace

void SessionConfig::validate() const {
  if (participant.empty() || participant.find_first_of(",\"\n\r") != std::string::npos) {
    fail(ErrorKind::Usage, "participant id must be non-empty without commas, quotes or newlines");
  }
  if (participant_index < 0) fail(ErrorKind::Usage, "participant_index must be >= 0");
  if (!(base_kg > 0.0 && base_kg < 500.0)) fail(ErrorKind::Usage, "base weight must be in (0, 500) kg");
  if (model_id.empty()) fail(ErrorKind::Usage, "model id is required");
  if (protocol != "full" && protocol != "pet" && protocol != "amt") {
    fail(ErrorKind::Usage, "protocol must be full, pet or amt");
  }
}

nlohmann::json to_json(const SessionConfig& c) {
  return {{"participant", c.participant}, {"participant_index", c.participant_index}, {"base_kg", c.base_kg},
          {"model_id", c.model_id},       {"seed", c.seed},                           {"protocol", c.protocol}};
}

SessionConfig session_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::Usage, "session config must be a JSON object");
  try {
    SessionConfig c;
    c.participant = j.value("participant", c.participant);
    c.participant_index = j.value("participant_index", c.participant_index);
    c.base_kg = j.at("base_kg").get<double>();
    c.model_id = j.at("model_id").get<std::string>();
    c.seed = j.value("seed", c.seed);
    c.protocol = j.value("protocol", c.protocol);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Usage, std::string("invalid session config: ") + e.what());
  }
}

std::vector<Trial> make_plan(const SessionConfig& config) {
  config.validate();
  std::vector<std::pair<TaskKind, std::optional<ModMethod>>> blocks;
  const auto methods = method_order(config.participant_index);
  if (config.protocol != "amt") blocks.emplace_back(TaskKind::Pet, std::nullopt);
  if (config.protocol != "pet")
    for (auto m : methods) blocks.emplace_back(TaskKind::Amt, m);
  if (config.protocol == "full") blocks.emplace_back(TaskKind::Pet, std::nullopt);

  std::vector<Trial> plan;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto levels = tasks::counterbalanced_order(config.participant_index, config.seed + b);
    for (int level : levels) {
      Trial t;
      t.index = static_cast<int>(plan.size());
      t.block = static_cast<int>(b);
      t.kind = blocks[b].first;
      t.method = blocks[b].second;
      t.level_pct = level;
      t.shown_kg = tasks::presented_weight(config.base_kg, level);
      plan.push_back(t);
    }
  }
  return plan;
}

nlohmann::json to_json(const Trial& t) {
  return {{"index", t.index},
          {"block", t.block},
          {"kind", tasks::to_string(t.kind)},
          {"method", t.method ? nlohmann::json(interaction::to_string(*t.method)) : nlohmann::json(nullptr)},
          {"level_pct", t.level_pct},
          {"shown_kg", t.shown_kg}};
}

Trial trial_from_json(const nlohmann::json& j) {
  try {
    Trial t;
    t.index = j.at("index").get<int>();
    t.block = j.at("block").get<int>();
    t.kind = tasks::parse_task_kind(j.at("kind").get<std::string>());
    if (!j.at("method").is_null()) t.method = interaction::parse_method(j["method"].get<std::string>());
    t.level_pct = j.at("level_pct").get<int>();
    t.shown_kg = j.at("shown_kg").get<double>();
    if ((t.kind == TaskKind::Amt) != t.method.has_value()) fail(ErrorKind::Data, "trial method does not fit its kind");
    return t;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, std::string("invalid trial: ") + e.what());
  }
}

nlohmann::json client_view(const Trial& t) {
  nlohmann::json j{{"index", t.index}, {"block", t.block}, {"kind", tasks::to_string(t.kind)}};
  if (t.kind == TaskKind::Amt) j["method"] = interaction::to_string(*t.method);
  return j;
}

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Ready: return "ready";
    case Status::Running: return "running";
    case Status::Complete: return "complete";
  }
  return "unknown";
}

std::unique_ptr<Session> Session::create(std::string id, SessionConfig config, const std::filesystem::path& log_path,
                                         interaction::InteractionConfig interaction) {
  if (std::filesystem::exists(log_path)) fail(ErrorKind::Io, "session log already exists: " + log_path.string());
  std::unique_ptr<Session> s(new Session());
  s->id_ = std::move(id);
  s->plan_ = make_plan(config);
  s->config_ = std::move(config);
  s->interaction_ = interaction;
  s->log_path_ = log_path;

  nlohmann::json plan = nlohmann::json::array();
  for (const auto& t : s->plan_) plan.push_back(to_json(t));
  const nlohmann::json header{{"type", "header"}, {"version", kLogVersion}, {"id", s->id_},
                              {"t", 0.0},         {"config", to_json(s->config_)}, {"plan", plan}};
  s->log_.open(log_path, std::ios::binary | std::ios::app);
  if (!s->log_) fail(ErrorKind::Io, "cannot create session log " + log_path.string());
  s->append(header);
  return s;
}

std::unique_ptr<Session> Session::restore(const std::filesystem::path& log_path,
                                          interaction::InteractionConfig interaction) {
  std::string text = read_text_file(log_path);
  const auto last_newline = text.rfind('\n');
  const std::size_t complete = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (complete < text.size()) {
    // Torn final line from a crash mid-write.
    text.resize(complete);
    std::filesystem::resize_file(log_path, complete);
  }
  const auto lines = split(text, '\n');
  auto parse_line = [&](std::size_t i) {
    try {
      return nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::Data, log_path.string() + ": line " + std::to_string(i + 1) + " is not valid JSON");
    }
  };
  if (lines.empty() || trim(lines[0]).empty()) fail(ErrorKind::Data, log_path.string() + ": session log has no header");

  std::unique_ptr<Session> s(new Session());
  const auto header = parse_line(0);
  if (header.value("type", "") != "header" || header.value("version", 0) != kLogVersion) {
    fail(ErrorKind::Data, log_path.string() + ": unsupported session log header");
  }
  try {
    s->id_ = header.at("id").get<std::string>();
    s->config_ = session_config_from_json(header.at("config"));
    for (const auto& t : header.at("plan")) s->plan_.push_back(trial_from_json(t));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, log_path.string() + ": invalid header: " + e.what());
  }
  s->interaction_ = interaction;
  s->log_path_ = log_path;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      s->apply(parse_line(i), false);
    } catch (const Error& e) {
      fail(ErrorKind::Data, log_path.string() + ": line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  s->log_.open(log_path, std::ios::binary | std::ios::app);
  if (!s->log_) fail(ErrorKind::Io, "cannot reopen session log " + log_path.string());
  return s;
}

double Session::next_time(std::optional<double> t) const { return t.value_or(state_.last_t + kDefaultTick); }

void Session::append(const nlohmann::json& event) {
  log_ << event.dump() << '\n';
  log_.flush();
  if (!log_) fail(ErrorKind::Io, "failed to append to " + log_path_.string());
}

nlohmann::json Session::present(std::optional<int> level, std::optional<double> t) {
  std::lock_guard lock(mutex_);
  nlohmann::json e{{"type", "trial"}, {"action", "present"}, {"t", next_time(t)}, {"trial", state_.current}};
  if (level) {
    const bool planned = std::any_of(plan_.begin(), plan_.end(), [&](const Trial& tr) {
      return tr.kind == TaskKind::Pet && tr.level_pct == *level;
    });
    if (!planned) fail(ErrorKind::Usage, "level " + std::to_string(*level) + " is not in the plan");
    if (state_.current >= static_cast<int>(plan_.size()) || plan_[state_.current].kind != TaskKind::Pet) {
      fail(ErrorKind::Protocol, "the current trial is not a PET trial");
    }
    if (plan_[state_.current].level_pct != *level) {
      fail(ErrorKind::Protocol, "level " + std::to_string(*level) + " is not the current trial's level");
    }
  }
  return apply(e, true);
}

nlohmann::json Session::input(nlohmann::json sample) {
  std::lock_guard lock(mutex_);
  if (!sample.is_object()) fail(ErrorKind::Usage, "input must be a JSON object");
  if (!sample.contains("t")) sample["t"] = next_time(std::nullopt);
  sample["type"] = "input";
  sample.erase("kg");
  return apply(sample, true);
}

nlohmann::json Session::estimate(std::optional<double> kg, std::optional<double> t) {
  std::lock_guard lock(mutex_);
  nlohmann::json e{{"type", "estimate"}, {"t", next_time(t)}, {"trial", state_.current}};
  if (kg) e["kg"] = *kg;
  return apply(e, true);
}

nlohmann::json Session::apply(const nlohmann::json& event, bool persist) {
  nlohmann::json out_event = event;
  nlohmann::json response;
  State next = state_;
  double t = 0.0;
  std::string type;
  try {
    t = event.at("t").get<double>();
    type = event.at("type").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Usage, std::string("malformed event: ") + e.what());
  }
  if (!std::isfinite(t) || !(t > state_.last_t)) {
    fail(ErrorKind::Protocol, "out-of-order timestamp " + format_double(t) + " (last " + format_double(state_.last_t) + ")");
  }
  const bool done = state_.current >= static_cast<int>(plan_.size());

  if (type == "trial") {
    if (event.value("action", "") != "present") fail(ErrorKind::Usage, "unknown trial action");
    if (done) fail(ErrorKind::Protocol, "session is complete");
    if (state_.active) fail(ErrorKind::Protocol, "trial " + std::to_string(state_.current) + " is already presented");
    if (event.value("trial", -1) != state_.current) fail(ErrorKind::Data, "trial index does not match the session");
    const Trial& trial = plan_[state_.current];
    next.active = true;
    next.trial_start = t;
    if (trial.kind == TaskKind::Pet) {
      next.presented_kg = trial.shown_kg;
    } else {
      next.weight = interaction::WeightState::start(config_.base_kg, *trial.method);
    }
    response = {{"type", "trial"}, {"t", t}, {"trial", client_view(trial)}};
    if (trial.kind == TaskKind::Amt) response["trial"]["target_kg"] = trial.shown_kg;
  } else if (type == "input") {
    if (!state_.active) fail(ErrorKind::Protocol, "no active trial");
    if (plan_[state_.current].kind != TaskKind::Amt) fail(ErrorKind::Protocol, "inputs are not accepted during a PET trial");
    const auto sample = interaction::input_from_json(event);
    next.weight = interaction::step(next.weight, sample, interaction_);
    const double kg = next.weight.weight_kg;
    if (event.contains("kg") && std::abs(event["kg"].get<double>() - kg) > kReplayTolerance) {
      fail(ErrorKind::Data, "replayed weight diverges from the logged snapshot");
    }
    out_event = interaction::to_json(sample);
    out_event["type"] = "input";
    out_event["kg"] = kg;
    response = {{"type", "weight"}, {"t", t}, {"kg", kg}};
  } else if (type == "estimate") {
    if (!state_.active) fail(ErrorKind::Protocol, "no active trial awaiting a response");
    const Trial& trial = plan_[state_.current];
    EstimationRecord r;
    r.kind = trial.kind;
    r.method = trial.method;
    r.participant = config_.participant;
    r.trial = trial.index;
    r.base_kg = config_.base_kg;
    r.level_pct = trial.level_pct;
    r.shown_kg = trial.shown_kg;
    if (trial.kind == TaskKind::Pet) {
      if (!event.contains("kg") || !event["kg"].is_number()) fail(ErrorKind::Usage, "PET estimate needs kg");
      r.response_kg = event["kg"].get<double>();
      if (!(r.response_kg > 0.0) || !std::isfinite(r.response_kg)) fail(ErrorKind::Usage, "estimate must be positive");
    } else {
      r.response_kg = state_.weight.weight_kg;
    }
    r.rt_s = t - state_.trial_start;
    r.validate();
    if (event.contains("record") && tasks::record_from_json(event["record"]) != r) {
      fail(ErrorKind::Data, "replayed record diverges from the logged record");
    }
    out_event["record"] = tasks::to_json(r);
    if (trial.kind == TaskKind::Amt) out_event.erase("kg");
    next.records.push_back(std::move(r));
    next.active = false;
    next.presented_kg.reset();
    ++next.current;
    const bool finished = next.current >= static_cast<int>(plan_.size());
    response = {{"type", "estimate"},
                {"t", t},
                {"trial", trial.index},
                {"status", to_string(finished ? Status::Complete : Status::Running)},
                {"next", finished ? nlohmann::json(nullptr) : client_view(plan_[next.current])}};
  } else {
    fail(ErrorKind::Usage, "unknown event type '" + type + "'");
  }

  next.last_t = t;
  if (persist) append(out_event);
  state_ = std::move(next);
  if (type == "input") trajectory_.emplace_back(t, state_.weight.weight_kg);
  return response;
}

Status Session::status() const {
  std::lock_guard lock(mutex_);
  return status_locked();
}

Status Session::status_locked() const {
  if (state_.current >= static_cast<int>(plan_.size())) return Status::Complete;
  if (state_.current == 0 && !state_.active) return Status::Ready;
  return Status::Running;
}

nlohmann::json Session::view() const {
  std::lock_guard lock(mutex_);
  return view_locked();
}

nlohmann::json Session::view_locked() const {
  const bool done = state_.current >= static_cast<int>(plan_.size());
  nlohmann::json plan = nlohmann::json::array();
  for (const auto& t : plan_) plan.push_back(client_view(t));
  nlohmann::json v{{"id", id_},
                   {"participant", config_.participant},
                   {"model_id", config_.model_id},
                   {"status", to_string(status_locked())},
                   {"t", state_.last_t},
                   {"completed", state_.records.size()},
                   {"trial_count", plan_.size()},
                   {"active", state_.active},
                   {"current", done ? nlohmann::json(nullptr) : client_view(plan_[state_.current])},
                   {"plan", plan}};
  if (state_.active && plan_[state_.current].kind == TaskKind::Amt) {
    v["current"]["target_kg"] = plan_[state_.current].shown_kg;
    v["kg"] = state_.weight.weight_kg;
  }
  return v;
}

double Session::display_weight() const {
  std::lock_guard lock(mutex_);
  if (state_.active && state_.presented_kg) return *state_.presented_kg;
  if (state_.active) return state_.weight.weight_kg;
  return config_.base_kg;
}

std::vector<EstimationRecord> Session::records() const {
  std::lock_guard lock(mutex_);
  return state_.records;
}

std::vector<std::pair<double, double>> Session::trajectory() const {
  std::lock_guard lock(mutex_);
  return trajectory_;
}

std::string Session::log_text() const {
  std::lock_guard lock(mutex_);
  return read_text_file(log_path_);
}

}  // namespace bwm::service
