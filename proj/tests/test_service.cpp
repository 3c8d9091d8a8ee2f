#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "bwm/error.hpp"
#include "bwm/input_json.hpp"
#include "bwm/service.hpp"
#include "bwm/text_io.hpp"
#include "session_script.hpp"
#include "support.hpp"

using namespace bwm;
using namespace bwm::service;

namespace {

std::shared_ptr<ModelStore> store() {
  auto s = std::make_shared<ModelStore>();
  s->add("small", testing::small_model());
  return s;
}

SessionConfig config(const std::string& protocol = "full", int participant_index = 0) {
  SessionConfig c;
  c.participant = "p07";
  c.participant_index = participant_index;
  c.base_kg = 80.0;
  c.model_id = "small";
  c.seed = 99;
  c.protocol = protocol;
  return c;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Usage;
}

// True if any number in the JSON tree is within 1e-9 of value.
bool contains_number(const nlohmann::json& j, double value) {
  if (j.is_number()) return std::abs(j.get<double>() - value) <= 1e-9;
  if (j.is_structured()) {
    for (const auto& child : j)
      if (contains_number(child, value)) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("plan: PET, three AMT blocks, PET") {
  const auto plan = make_plan(config());
  REQUIRE(plan.size() == 45);
  std::set<interaction::ModMethod> methods;
  for (int b = 0; b < 5; ++b) {
    std::vector<int> levels;
    for (int i = 0; i < 9; ++i) {
      const auto& t = plan[b * 9 + i];
      CHECK(t.index == b * 9 + i);
      CHECK(t.block == b);
      CHECK(t.kind == (b == 0 || b == 4 ? tasks::TaskKind::Pet : tasks::TaskKind::Amt));
      CHECK(t.shown_kg == tasks::presented_weight(80.0, t.level_pct));
      if (t.method) methods.insert(*t.method);
      levels.push_back(t.level_pct);
    }
    std::sort(levels.begin(), levels.end());
    CHECK(levels == tasks::task_levels());
  }
  CHECK(methods.size() == 3);
  CHECK(make_plan(config()) == plan);
  CHECK(make_plan(config("pet")).size() == 9);
  CHECK(make_plan(config("amt")).size() == 27);
  CHECK(make_plan(config("amt", 2))[0].method == interaction::ModMethod::Joystick);
}

TEST_CASE("create sessions") {
  testing::TempDir dir("svc_create");
  SessionManager m(dir.path(), store());
  const auto a = m.create(config());
  const auto b = m.create(config());
  CHECK(a != b);
  CHECK(m.get(a).plan() == m.get(b).plan());
  CHECK(m.get(a).status() == Status::Ready);
  CHECK(std::filesystem::exists(dir / "sessions" / (a + ".jsonl")));
  auto bad = config();
  bad.base_kg = -5;
  CHECK(kind_of([&] { m.create(bad); }) == ErrorKind::Usage);
  bad = config();
  bad.model_id = "missing";
  CHECK(kind_of([&] { m.create(bad); }) == ErrorKind::NotFound);
  CHECK(kind_of([&] { m.get("nope"); }) == ErrorKind::NotFound);
}

TEST_CASE("100 joystick ticks 10 ms apart from 80 kg reach 94.85 kg") {
  testing::TempDir dir("svc_ticks");
  SessionManager m(dir.path(), store());
  auto& s = m.get(m.create(config("amt", 2)));
  s.present(std::nullopt, 1.0);
  double kg = 0.0;
  for (int i = 0; i < 100; ++i) {
    kg = s.input({{"t", 2.0 + 0.01 * i}, {"method", "joystick"}, {"side", "right"}, {"tilt", 1.0}})["kg"].get<double>();
  }
  CHECK(kg == doctest::Approx(94.85).epsilon(1e-12));
  CHECK(s.trajectory().size() == 100);
}

TEST_CASE("protocol errors") {
  testing::TempDir dir("svc_proto");
  SessionManager m(dir.path(), store());
  auto& s = m.get(m.create(config()));
  const nlohmann::json tick{{"method", "joystick"}, {"tilt", 1.0}};
  CHECK(kind_of([&] { s.input(tick); }) == ErrorKind::Protocol);       // no trial
  CHECK(kind_of([&] { s.estimate(70.0, 1.0); }) == ErrorKind::Protocol);  // nothing presented
  CHECK(kind_of([&] { s.present(7, 1.0); }) == ErrorKind::Usage);       // level not in plan
  const int wrong = s.plan()[0].level_pct == 20 ? 15 : 20;
  CHECK(kind_of([&] { s.present(wrong, 1.0); }) == ErrorKind::Protocol);
  s.present(s.plan()[0].level_pct, 1.0);
  CHECK(kind_of([&] { s.present(std::nullopt, 2.0); }) == ErrorKind::Protocol);
  CHECK(kind_of([&] { s.input(tick); }) == ErrorKind::Protocol);  // PET rejects inputs
  CHECK(kind_of([&] { s.estimate(70.0, 0.5); }) == ErrorKind::Protocol);  // out of order
  CHECK(kind_of([&] { s.estimate(0.0, 3.0); }) == ErrorKind::Usage);
  CHECK(kind_of([&] { s.estimate(std::nullopt, 3.0); }) == ErrorKind::Usage);
  CHECK(s.status() == Status::Running);
}

TEST_CASE("PET estimate equal to the presented weight gives M = 0") {
  testing::TempDir dir("svc_pet");
  SessionManager m(dir.path(), store());
  auto& s = m.get(m.create(config("pet")));
  const double shown = s.plan()[0].shown_kg;
  s.present(std::nullopt, std::nullopt);
  const auto r = s.estimate(shown, std::nullopt);
  CHECK(r["trial"] == 0);
  CHECK_FALSE(r.contains("error"));
  const auto records = s.records();
  REQUIRE(records.size() == 1);
  CHECK(records[0].misestimation() == 0.0);
  CHECK(records[0].rt_s == doctest::Approx(kDefaultTick));
}

TEST_CASE("AMT confirmation at the target gives M = 0") {
  testing::TempDir dir("svc_amt");
  SessionManager m(dir.path(), store());
  auto& s = m.get(m.create(config("amt")));
  int i = 0;
  while (s.plan()[i].level_pct != 0) {
    s.present(std::nullopt, std::nullopt);
    s.estimate(std::nullopt, std::nullopt);
    ++i;
  }
  const auto shown = s.present(std::nullopt, std::nullopt);
  CHECK(shown["trial"]["target_kg"] == 80.0);
  s.estimate(std::nullopt, std::nullopt);
  CHECK(s.records().back().misestimation() == 0.0);
  CHECK(s.records().back().response_kg == 80.0);
}

TEST_CASE("scripted session completes, replays and restores") {
  testing::TempDir dir("svc_e2e");
  std::string id;
  std::vector<tasks::EstimationRecord> records;
  std::vector<std::pair<double, double>> trajectory;
  {
    SessionManager m(dir.path(), store());
    id = m.create(config());
    auto& s = m.get(id);
    testing::run_trials(s, 0, 45, 5);
    CHECK(s.status() == Status::Complete);
    records = s.records();
    trajectory = s.trajectory();
    CHECK(records.size() == 45);
    CHECK(kind_of([&] { s.present(std::nullopt, std::nullopt); }) == ErrorKind::Protocol);
    for (const auto& r : records) {
      if (r.kind == tasks::TaskKind::Amt) CHECK(std::abs(r.misestimation()) < 0.1);
    }
  }

  // The logged inputs replayed trial by trial reproduce every snapshot exactly.
  const auto log = read_text_file(dir / "sessions" / (id + ".jsonl"));
  std::vector<interaction::InputSample> inputs;
  std::vector<double> logged;
  std::vector<double> replayed;
  std::optional<interaction::ModMethod> method;
  auto flush = [&] {
    if (inputs.empty()) return;
    const auto states = interaction::replay(interaction::WeightState::start(80.0, *method), inputs);
    for (std::size_t k = 1; k < states.size(); ++k) replayed.push_back(states[k].weight_kg);
    inputs.clear();
  };
  const auto plan = make_plan(config());
  for (auto line : split(log, '\n')) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j["type"] == "trial") {
      flush();
      method = plan[j["trial"].get<int>()].method;
    } else if (j["type"] == "input") {
      inputs.push_back(interaction::input_from_json(j));
      logged.push_back(j["kg"].get<double>());
    }
  }
  flush();
  REQUIRE(replayed.size() == trajectory.size());
  for (std::size_t k = 0; k < replayed.size(); ++k) {
    CHECK(replayed[k] == trajectory[k].second);
    CHECK(logged[k] == trajectory[k].second);
  }

  // Restart from the same data directory.
  SessionManager restarted(dir.path(), store());
  auto& s = restarted.get(id);
  CHECK(s.status() == Status::Complete);
  CHECK(s.records() == records);
  CHECK(s.trajectory() == trajectory);
}

TEST_CASE("crash mid-session resumes to the same log") {
  testing::TempDir straight("svc_straight"), crashed("svc_crash");
  std::string a, b;
  {
    SessionManager m(straight.path(), store());
    a = m.create(config());
    testing::run_trials(m.get(a), 0, 45, 8);
  }
  {
    SessionManager m(crashed.path(), store());
    b = m.create(config());
    testing::run_trials(m.get(b), 0, 20, 8);
  }
  const auto path = crashed / "sessions" / (b + ".jsonl");
  {
    std::ofstream torn(path, std::ios::app | std::ios::binary);
    torn << R"({"type":"input","t":999.0,"meth)";
  }
  {
    SessionManager m(crashed.path(), store());
    auto& s = m.get(b);
    CHECK(s.status() == Status::Running);
    CHECK(s.records().size() == 20);
    testing::run_trials(s, 20, 45, 8);
  }
  auto strip_id = [](std::string text, const std::string& id) {
    for (auto pos = text.find(id); pos != std::string::npos; pos = text.find(id)) text.replace(pos, id.size(), "ID");
    return text;
  };
  SessionManager m(crashed.path(), store());
  CHECK(m.get(b).status() == Status::Complete);
  CHECK(m.get(b).records().size() == 45);
  const auto straight_log = strip_id(read_text_file(straight / "sessions" / (a + ".jsonl")), a);
  const auto resumed_log = strip_id(read_text_file(path), b);
  CHECK(resumed_log == straight_log);
}

TEST_CASE("results equal the analysis of the exported log") {
  testing::TempDir dir("svc_results");
  SessionManager m(dir.path(), store());
  const auto id = m.create(config());
  CHECK(kind_of([&] { m.results(id); }) == ErrorKind::Protocol);
  testing::run_trials(m.get(id), 0, 45, 3);
  const auto served = tasks::format_report(m.results(id));
  write_text_file(dir / "export.jsonl", m.export_log(id));
  const auto offline = tasks::format_report(tasks::analysis_report(tasks::load_records(dir / "export.jsonl")));
  CHECK(served == offline);
  const auto report = m.results(id);
  CHECK(report["groups"].size() == 4);
  CHECK(report["n_records"] == 45);
}

TEST_CASE("perfect responses give zero misestimation") {
  testing::TempDir dir("svc_perfect");
  SessionManager m(dir.path(), store());
  const auto id = m.create(config("pet"));
  auto& s = m.get(id);
  for (const auto& t : s.plan()) {
    s.present(std::nullopt, std::nullopt);
    s.estimate(t.shown_kg, std::nullopt);
  }
  const auto g = m.results(id)["groups"][0];
  CHECK(g["summary"]["mean_m_pct"] == 0.0);
  CHECK(g["summary"]["mean_abs_pct"] == 0.0);
}

TEST_CASE("PET presented weight never reaches the client") {
  testing::TempDir dir("svc_leak");
  SessionManager m(dir.path(), store());
  auto& s = m.get(m.create(config()));
  for (const auto& t : s.plan()) {
    if (t.kind != tasks::TaskKind::Pet) continue;
    CHECK_FALSE(contains_number(s.view(), t.shown_kg));
  }
  for (int i = 0; i < 9; ++i) {
    const double shown = s.plan()[i].shown_kg;
    const auto p = s.present(std::nullopt, std::nullopt);
    CHECK_FALSE(contains_number(p, shown));
    CHECK_FALSE(p["trial"].contains("level_pct"));
    CHECK_FALSE(contains_number(s.view(), shown));
    const auto e = s.estimate(shown + 1.0, std::nullopt);
    CHECK_FALSE(contains_number(e, shown));
  }
}

TEST_CASE("display buffer follows the presented weight") {
  testing::TempDir dir("svc_display");
  SessionManager m(dir.path(), store());
  const auto id = m.create(config("pet"));
  auto& s = m.get(id);
  const auto assets = m.models().assets("small", 1.0, {});
  const auto& samples = assets->table.samples();
  const auto zero = std::find(samples.begin(), samples.end(), 0.0) - samples.begin();
  CHECK(m.display(id) == assets->table.buffers()[zero]);
  s.present(std::nullopt, std::nullopt);
  const double level = s.plan()[0].level_pct;
  CHECK(s.display_weight() == s.plan()[0].shown_kg);
  CHECK(m.display(id) == assets->table.interpolate((s.plan()[0].shown_kg / 80.0 - 1.0) * assets->base_kg));
  if (level != 0) CHECK(m.display(id) != assets->table.buffers()[zero]);
}

TEST_CASE("tampered log fails to restore") {
  testing::TempDir dir("svc_tamper");
  std::string id;
  {
    SessionManager m(dir.path(), store());
    id = m.create(config("amt"));
    testing::run_trials(m.get(id), 0, 1, 1);
  }
  const auto path = dir / "sessions" / (id + ".jsonl");
  auto text = read_text_file(path);
  const auto pos = text.find("\"kg\":");
  REQUIRE(pos != std::string::npos);
  text.insert(pos + 5, "1");
  write_text_file(path, text);
  CHECK(kind_of([&] { SessionManager again(dir.path(), store()); }) == ErrorKind::Data);
}

TEST_CASE("morph assets") {
  auto models = store();
  const auto assets = models->assets("small", 1.0, {});
  const double base = assets->base_kg;
  CHECK(assets->table.samples().front() == doctest::Approx(-0.35 * base).epsilon(1e-12));
  CHECK(assets->table.samples().back() == doctest::Approx(0.35 * base).epsilon(1e-12));
  const auto j = assets->to_json();
  const auto n = j["vertex_count"].get<std::size_t>();
  CHECK(j["base"].size() == 3 * n);
  for (const auto& t : j["targets"]) CHECK(t.size() == 3 * n);
  const auto& samples = assets->table.samples();
  const auto zero = std::find(samples.begin(), samples.end(), 0.0) - samples.begin();
  CHECK(j["targets"][zero] == j["base"]);
  CHECK(assets->table.buffers()[zero] == testing::small_model()->mean_mesh().positions());
  CHECK(models->assets("small", 1.0, {}) == assets);
  CHECK(kind_of([&] { models->assets("none", 1.0, {}); }) == ErrorKind::NotFound);
}
