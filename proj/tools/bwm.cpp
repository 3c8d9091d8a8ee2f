#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "bwm/config.hpp"
#include "bwm/error.hpp"
#include "bwm/rigid.hpp"
#include "bwm/server.hpp"
#include "bwm/shape_model.hpp"
#include "bwm/synthetic.hpp"
#include "bwm/tasks.hpp"
#include "bwm/text_io.hpp"

namespace fs = std::filesystem;
using namespace bwm;

namespace {

std::atomic<bool> g_stop{false};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return 2;
    case ErrorKind::Numeric: return 4;
    default: return 3;
  }
}

// "from:to:step" -> inclusive series.
std::vector<double> parse_range(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) fail(ErrorKind::Usage, "range must be from:to:step, got '" + text + "'");
  double from = 0, to = 0, step = 0;
  try {
    from = parse_double(parts[0]);
    to = parse_double(parts[1]);
    step = parse_double(parts[2]);
  } catch (const Error& e) {
    fail(ErrorKind::Usage, e.what());
  }
  if (!(step > 0.0) || to < from) fail(ErrorKind::Usage, "range needs step > 0 and to >= from");
  std::vector<double> out;
  const auto n = static_cast<int>(std::floor((to - from) / step + 1e-9));
  for (int i = 0; i <= n; ++i) out.push_back(from + i * step);
  return out;
}

std::string delta_name(double delta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "morph_%+07.2fkg.obj", delta);
  return buf;
}

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;

  Config load() const {
    Config c = config_file.empty() ? Config{} : load_config(config_file);
    apply_overrides(c, overrides);
    return c;
  }
};

int cmd_gen_corpus(int subjects, std::uint64_t seed, const std::string& out, const shape::SyntheticOptions& opts) {
  if (subjects < 2) fail(ErrorKind::Usage, "need at least 2 subjects");
  const auto data = shape::generate_synthetic_corpus(subjects, seed, opts);
  shape::save_corpus(data.corpus, out, &data.face_region);
  std::cout << "wrote " << subjects << " subjects (" << data.corpus.meshes.front().vertex_count()
            << " vertices, face region " << data.face_region.size() << ") to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& corpus_dir, std::string face_file, int k, const std::string& out) {
  const auto corpus = shape::load_corpus(corpus_dir);
  if (face_file.empty()) face_file = (fs::path(corpus_dir) / "face_region.txt").string();
  const auto face = mesh::load_region(face_file, corpus.meshes.front().vertex_count());
  const auto body_rows = 3 * (face.vertex_count() - face.size());
  const int cap = static_cast<int>(std::min<std::size_t>(body_rows, corpus.size() - 1));
  if (k < 1) fail(ErrorKind::Usage, "k must be >= 1");
  if (k > cap) {
    std::cerr << "warning: k = " << k << " exceeds min(3V, M-1) = " << cap << "; using " << cap << "\n";
    k = cap;
  }
  const auto model = shape::ShapeModel::train(corpus, face, k);
  shape::save_model(model, out);
  const auto reloaded = shape::load_model(out);
  std::cout << "trained k = " << k << " on " << corpus.size() << " subjects; orthonormality error "
            << reloaded.orthonormality_error() << "; wrote " << out << "\n";
  return 0;
}

struct MorphArgs {
  std::string model, mesh, out, sweep, bmi_sweep;
  std::optional<double> delta_kg, height_m, base_kg, tolerance;
};

int cmd_morph(const MorphArgs& a, const Config& config) {
  const auto model = shape::load_model(a.model);
  const auto input = a.mesh.empty() ? model.mean_mesh() : mesh::load_mesh(a.mesh);
  const int modes = int(a.delta_kg.has_value()) + int(!a.sweep.empty()) + int(!a.bmi_sweep.empty());
  if (modes != 1) fail(ErrorKind::Usage, "give exactly one of --delta-kg, --sweep, --bmi-sweep");
  shape::StitchOptions stitch;
  stitch.solver.tolerance = a.tolerance.value_or(config.solver_tolerance);

  std::optional<double> base = a.base_kg;
  if (!base && model.base()) base = model.base()->weight_kg;

  if (a.delta_kg) {
    const auto result = model.modify_weight(input, *a.delta_kg, stitch);
    mesh::save_mesh(result, a.out);
    std::cout << "delta_kg," << format_double(*a.delta_kg);
    if (base) std::cout << ",weight_from_volume_kg," << format_double(shape::weight_from_volume(result, input, *base));
    std::cout << "\n";
    return 0;
  }

  std::vector<double> deltas;
  if (!a.sweep.empty()) {
    deltas = parse_range(a.sweep);
  } else {
    if (!base) fail(ErrorKind::Usage, "--bmi-sweep needs --base-kg (the model has no base measurements)");
    const double h = a.height_m.value_or(model.base() ? model.base()->height_m : 0.0);
    if (!(h > 0.0)) fail(ErrorKind::Usage, "--bmi-sweep needs --height-m");
    for (double b : parse_range(a.bmi_sweep)) deltas.push_back(b * h * h - *base);
  }
  fs::create_directories(a.out);
  std::cout << "delta_kg,weight_from_volume_kg,file\n";
  for (double d : deltas) {
    const auto result = model.modify_weight(input, d, stitch);
    const auto path = fs::path(a.out) / delta_name(d);
    mesh::save_mesh(result, path);
    std::cout << format_double(d) << "," << (base ? format_double(shape::weight_from_volume(result, input, *base)) : "")
              << "," << path.string() << "\n";
  }
  return 0;
}

struct SimulateArgs {
  std::string method = "pet";
  double gain = 1.0, noise = 0.0;
  int participants = 12;
  std::uint64_t seed = 1;
  std::optional<double> reference_kg;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  tasks::SimulationOptions o;
  if (a.method == "pet") {
    o.kind = tasks::TaskKind::Pet;
  } else {
    o.kind = tasks::TaskKind::Amt;
    try {
      o.method = interaction::parse_method(a.method);
    } catch (const Error&) {
      fail(ErrorKind::Usage, "--method must be pet, gesture, joystick or objects");
    }
  }
  o.gain = a.gain;
  o.noise = a.noise;
  o.seed = a.seed;
  o.reference_kg = a.reference_kg;
  const auto records = tasks::simulate_cohort(o, a.participants);
  tasks::save_records(records, a.out);
  std::cout << "wrote " << records.size() << " records to " << a.out << "\n";
  return 0;
}

int cmd_analyze(const std::string& records_path, const std::string& out, std::optional<int> exact_max,
                const Config& config) {
  const auto records = tasks::load_records(records_path);
  tasks::AnalysisOptions o;
  o.exact_max = exact_max.value_or(config.wilcoxon_exact_max);
  const auto text = tasks::format_report(tasks::analysis_report(records, o));
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text_file(out, text);
  }
  return 0;
}

struct ServeArgs {
  std::vector<std::string> models;
  std::string host = "127.0.0.1";
  int port = 8080;
  int stream_port = -1;
  std::string data_dir = "data";
  std::optional<double> deadzone, spacing;
};

int cmd_serve(const ServeArgs& a, const Config& config) {
  auto store = std::make_shared<service::ModelStore>();
  for (const auto& m : a.models) {
    if (!fs::exists(m)) fail(ErrorKind::Usage, "model file not found: " + m);
    store->load(m);
  }
  service::ServiceOptions o;
  o.interaction.joystick_deadzone = a.deadzone.value_or(config.joystick_deadzone);
  o.morph_spacing_kg = a.spacing.value_or(config.morph_grid_spacing_kg);
  o.stitch.solver.tolerance = config.solver_tolerance;
  o.analysis.exact_max = config.wilcoxon_exact_max;
  service::SessionManager manager(a.data_dir, store, o);
  service::Server server(manager, {a.host, a.port, a.stream_port});
  server.start();
  std::cout << "serving http://" << a.host << ":" << server.port() << " (stream ws://" << a.host << ":"
            << server.stream_port() << "), data " << a.data_dir << std::endl;
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

int cmd_calibrate(const std::string& src, const std::string& dst, std::optional<double> contact,
                  std::optional<double> radius, const Config& config) {
  const auto a = rigid::load_points_csv(src);
  const auto b = rigid::load_points_csv(dst);
  const auto t = rigid::kabsch_align(a, b);
  nlohmann::json rotation = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rotation.push_back({t.rotation(r, 0), t.rotation(r, 1), t.rotation(r, 2)});
  nlohmann::json out{{"rotation", rotation},
                     {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}},
                     {"rmsd_m", rigid::rmsd(t, a, b)}};
  if (contact) out["ground_offset_m"] = rigid::ground_offset(*contact, radius.value_or(config.controller_radius_m));
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Body-weight modification engine"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_file, "key=value settings file")->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides, "override a setting (key=value), repeatable");

  int subjects = 40;
  std::uint64_t seed = 1;
  std::string out;
  shape::SyntheticOptions synth;
  auto* gen = app.add_subcommand("gen-corpus", "write a synthetic registered corpus");
  gen->add_option("--subjects", subjects, "number of subjects");
  gen->add_option("--seed", seed, "random seed");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--rings", synth.rings, "template rings");
  gen->add_option("--segments", synth.segments, "template segments per ring");
  gen->add_option("--noise", synth.noise, "shape noise amplitude (m)");

  std::string corpus, face;
  int k = 30;
  auto* train = app.add_subcommand("train", "train a shape model");
  train->add_option("--corpus", corpus, "corpus directory")->required();
  train->add_option("--face-region", face, "face region file (default: corpus/face_region.txt)");
  train->add_option("--k", k, "principal components (capped at min(3V, M-1))");
  train->add_option("--out", out, "model file (.bwmm)")->required();

  MorphArgs morph_args;
  auto* morph = app.add_subcommand("morph", "change the weight of a mesh");
  morph->add_option("--model", morph_args.model, "model file")->required();
  morph->add_option("--mesh", morph_args.mesh, "input OBJ (default: model mean)");
  morph->add_option("--delta-kg", morph_args.delta_kg, "weight change");
  morph->add_option("--sweep", morph_args.sweep, "from:to:step weight changes; --out is a directory");
  morph->add_option("--bmi-sweep", morph_args.bmi_sweep, "from:to:step BMI values; --out is a directory");
  morph->add_option("--height-m", morph_args.height_m, "height for --bmi-sweep");
  morph->add_option("--base-kg", morph_args.base_kg, "weight of the input mesh");
  morph->add_option("--tolerance", morph_args.tolerance, "solver tolerance");
  morph->add_option("--out", morph_args.out, "output OBJ or directory")->required();

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "simulate estimation records");
  simulate->add_option("--method", sim.method, "pet, gesture, joystick or objects");
  simulate->add_option("--gain", sim.gain, "contraction gain g");
  simulate->add_option("--noise", sim.noise, "response noise (fraction of true weight)");
  simulate->add_option("--participants", sim.participants, "participants");
  simulate->add_option("--seed", sim.seed, "random seed");
  simulate->add_option("--reference-kg", sim.reference_kg, "reference weight (default: own base)");
  simulate->add_option("--out", sim.out, "records file (.csv or .jsonl)")->required();

  std::string records;
  std::optional<int> exact_max;
  auto* analyze = app.add_subcommand("analyze", "analyze records or a session log");
  analyze->add_option("--records", records, "records CSV, JSON Lines or session log")->required();
  analyze->add_option("--out", out, "report file (default: stdout)");
  analyze->add_option("--exact-max", exact_max, "largest m for the exact Wilcoxon test");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "run the session service");
  serve->add_option("--model", serve_args.models, "model file(s); id = file stem")->required();
  serve->add_option("--host", serve_args.host, "bind address");
  serve->add_option("--port", serve_args.port, "HTTP port");
  serve->add_option("--stream-port", serve_args.stream_port, "WebSocket port (default: port + 1)");
  serve->add_option("--data-dir", serve_args.data_dir, "session log directory");
  serve->add_option("--deadzone", serve_args.deadzone, "joystick deadzone");
  serve->add_option("--spacing", serve_args.spacing, "morph grid spacing (kg)");

  std::string src, dst;
  std::optional<double> contact, radius;
  auto* calibrate = app.add_subcommand("calibrate", "rigid alignment of paired points");
  calibrate->add_option("--src", src, "tracked points CSV")->required();
  calibrate->add_option("--dst", dst, "virtual points CSV")->required();
  calibrate->add_option("--floor-contact", contact, "controller height when resting on the floor (m)");
  calibrate->add_option("--controller-radius", radius, "controller radius (m)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const Config config = common.load();
    if (gen->parsed()) return cmd_gen_corpus(subjects, seed, out, synth);
    if (train->parsed()) return cmd_train(corpus, face, k, out);
    if (morph->parsed()) return cmd_morph(morph_args, config);
    if (simulate->parsed()) return cmd_simulate(sim);
    if (analyze->parsed()) return cmd_analyze(records, out, exact_max, config);
    if (serve->parsed()) return cmd_serve(serve_args, config);
    if (calibrate->parsed()) return cmd_calibrate(src, dst, contact, radius, config);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
