#include <csignal>
#include <cstdio>
#include <regex>

#include <sys/wait.h>
#include <unistd.h>

#include <doctest.h>

#include "bwm/service.hpp"
#include "bwm/text_io.hpp"
#include "session_script.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace bwm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run bwm_cli(const std::string& args) {
  const std::string cmd = std::string(BWM_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("gen-corpus and train are deterministic") {
  testing::TempDir dir("cli_train");
  const std::string gen = "gen-corpus --subjects 8 --seed 5 --rings 12 --segments 10 --out ";
  REQUIRE(bwm_cli(gen + q(dir / "a")).code == 0);
  REQUIRE(bwm_cli(gen + q(dir / "b")).code == 0);
  CHECK(read_text_file(dir / "a" / "meshes" / "000.obj") == read_text_file(dir / "b" / "meshes" / "000.obj"));

  const auto r1 = bwm_cli("train --corpus " + q(dir / "a") + " --k 30 --out " + q(dir / "m1.bwmm"));
  REQUIRE(r1.code == 0);
  CHECK(r1.out.find("warning: k = 30") != std::string::npos);
  REQUIRE(bwm_cli("train --corpus " + q(dir / "a") + " --k 30 --out " + q(dir / "m2.bwmm")).code == 0);
  CHECK(read_text_file(dir / "m1.bwmm") == read_text_file(dir / "m2.bwmm"));
  CHECK(shape::load_model(dir / "m1.bwmm").components() == 7);

  const auto sweep = bwm_cli("morph --model " + q(dir / "m1.bwmm") + " --sweep -10:10:5 --out " + q(dir / "sweep"));
  REQUIRE(sweep.code == 0);
  CHECK(line_count(sweep.out) == 6);
  CHECK(std::distance(fs::directory_iterator(dir / "sweep"), fs::directory_iterator{}) == 5);
}

TEST_CASE("simulate writes one row per trial and is reproducible") {
  testing::TempDir dir("cli_sim");
  const std::string args = " --gain 0.8 --noise 0.03 --participants 5 --seed 11 --out ";
  REQUIRE(bwm_cli("simulate --method pet" + args + q(dir / "a.csv")).code == 0);
  REQUIRE(bwm_cli("simulate --method pet" + args + q(dir / "b.csv")).code == 0);
  const auto a = read_text_file(dir / "a.csv");
  CHECK(a == read_text_file(dir / "b.csv"));
  CHECK(line_count(a) == 1 + 5 * 9);
  REQUIRE(bwm_cli("simulate --method objects" + args + q(dir / "c.jsonl")).code == 0);
  CHECK(tasks::load_records(dir / "c.jsonl").size() == 45);
}

TEST_CASE("analyze of a session log equals the served results") {
  testing::TempDir dir("cli_analyze");
  auto store = std::make_shared<service::ModelStore>();
  store->add("small", testing::small_model());
  service::SessionManager m(dir / "data", store);
  service::SessionConfig c;
  c.participant = "p01";
  c.base_kg = 75.0;
  c.model_id = "small";
  c.seed = 4;
  const auto id = m.create(c);
  testing::run_trials(m.get(id), 0, 45, 8);
  const auto log = dir / "data" / "sessions" / (id + ".jsonl");
  REQUIRE(bwm_cli("analyze --records " + q(log) + " --out " + q(dir / "report.json")).code == 0);
  CHECK(read_text_file(dir / "report.json") == tasks::format_report(m.results(id)));
}

TEST_CASE("config file and overrides, flags win") {
  testing::TempDir dir("cli_config");
  REQUIRE(bwm_cli("simulate --method joystick --participants 3 --noise 0.05 --out " + q(dir / "r.csv")).code == 0);
  write_text_file(dir / "bwm.conf", "wilcoxon_exact_max = 0\n");
  const auto from_file = bwm_cli("--config " + q(dir / "bwm.conf") + " analyze --records " + q(dir / "r.csv"));
  REQUIRE(from_file.code == 0);
  CHECK(from_file.out.find("\"exact\": false") != std::string::npos);
  CHECK(from_file.out.find("\"exact\": true") == std::string::npos);
  const auto flag = bwm_cli("--config " + q(dir / "bwm.conf") + " analyze --exact-max 12 --records " + q(dir / "r.csv"));
  CHECK(flag.out.find("\"exact\": true") != std::string::npos);
  const auto set = bwm_cli("--set wilcoxon_exact_max=0 analyze --records " + q(dir / "r.csv"));
  CHECK(set.out == from_file.out);
}

TEST_CASE("exit codes") {
  testing::TempDir dir("cli_exit");
  CHECK(bwm_cli("").code == 2);
  CHECK(bwm_cli("no-such-command").code == 2);
  CHECK(bwm_cli("simulate --out x.csv --participants").code == 2);
  CHECK(bwm_cli("--set bogus=1 analyze --records x.csv").code == 2);
  CHECK(bwm_cli("morph --model m --out o").code == 3);
  CHECK(bwm_cli("analyze --records " + q(dir / "missing.csv")).code == 3);
  write_text_file(dir / "empty.csv", "");
  CHECK(bwm_cli("analyze --records " + q(dir / "empty.csv")).code == 2);
  write_text_file(dir / "bad.csv", std::string(tasks::kRecordsCsvHeader) + "\nnot,a,record\n");
  CHECK(bwm_cli("analyze --records " + q(dir / "bad.csv")).code == 3);
  CHECK(bwm_cli("serve --model " + q(dir / "missing.bwmm") + " --port 0").code == 2);
  // Equal heights leave (D|1) without full column rank.
  REQUIRE(bwm_cli("gen-corpus --subjects 6 --rings 10 --segments 8 --out " + q(dir / "c")).code == 0);
  std::string table = "weight_kg,height_m,armspan_m,inseam_m\n";
  for (int i = 0; i < 6; ++i) table += std::to_string(60 + 5 * i) + ",1.7," + std::to_string(1.6 + 0.03 * i) + ",0.8\n";
  write_text_file(dir / "c" / "measurements.csv", table);
  CHECK(bwm_cli("train --corpus " + q(dir / "c") + " --out " + q(dir / "m.bwmm")).code == 4);
}

TEST_CASE("serve answers health and stops on SIGTERM") {
  testing::TempDir dir("cli_serve");
  shape::save_model(*testing::small_model(), dir / "small.bwmm");
  int fds[2];
  REQUIRE(::pipe(fds) == 0);
  const pid_t pid = ::fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    ::dup2(fds[1], STDOUT_FILENO);
    ::close(fds[0]);
    const std::string model = (dir / "small.bwmm").string();
    const std::string data = (dir / "data").string();
    ::execl(BWM_CLI, BWM_CLI, "serve", "--model", model.c_str(), "--port", "0", "--stream-port", "0", "--data-dir",
            data.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(fds[1]);
  std::string line;
  char ch;
  while (::read(fds[0], &ch, 1) == 1 && ch != '\n') line += ch;
  ::close(fds[0]);
  std::smatch match;
  REQUIRE_MESSAGE(std::regex_search(line, match, std::regex(R"(http://[^:]+:(\d+))")), line);
  const int port = std::stoi(match[1]);
  CHECK(fs::is_directory(dir / "data"));

  httplib::Client client("127.0.0.1", port);
  const auto res = client.Get("/health");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto body = nlohmann::json::parse(res->body);
  CHECK(body["status"] == "ok");
  CHECK(body["models"] == nlohmann::json::array({"small"}));

  ::kill(pid, SIGTERM);
  int status = 0;
  ::waitpid(pid, &status, 0);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
}
