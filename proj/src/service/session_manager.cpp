#include <algorithm>
#include <cstdio>
#include <random>

#include "bwm/error.hpp"
#include "bwm/service.hpp"

namespace bwm::service {

nlohmann::json MorphAssets::to_json() const {
  const auto& topology = model->topology();
  nlohmann::json faces = nlohmann::json::array();
  for (const auto& f : topology.faces())
    for (int v : f) faces.push_back(v);
  auto flat = [](const std::vector<shape::Vec3>& buffer) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : buffer) {
      a.push_back(p.x());
      a.push_back(p.y());
      a.push_back(p.z());
    }
    return a;
  };
  const auto& samples = table.samples();
  const auto zero = static_cast<std::size_t>(std::find(samples.begin(), samples.end(), 0.0) - samples.begin());
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& b : table.buffers()) targets.push_back(flat(b));
  return {{"model_id", model_id},
          {"base_kg", base_kg},
          {"vertex_count", topology.vertex_count()},
          {"faces", faces},
          {"base", flat(table.buffers()[zero])},
          {"delta_kg", samples},
          {"bounds", {{"min_delta_kg", samples.front()}, {"max_delta_kg", samples.back()}}},
          {"targets", targets}};
}

void ModelStore::add(const std::string& id, std::shared_ptr<const shape::ShapeModel> model) {
  if (id.empty()) fail(ErrorKind::Usage, "model id must not be empty");
  std::lock_guard lock(mutex_);
  models_[id] = std::move(model);
  assets_.erase(id);
}

void ModelStore::load(const std::filesystem::path& path) {
  add(path.stem().string(), std::make_shared<const shape::ShapeModel>(shape::load_model(path)));
}

bool ModelStore::contains(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return models_.count(id) > 0;
}

std::shared_ptr<const shape::ShapeModel> ModelStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = models_.find(id);
  if (it == models_.end()) fail(ErrorKind::NotFound, "unknown model '" + id + "'");
  return it->second;
}

std::shared_ptr<const MorphAssets> ModelStore::assets(const std::string& id, double spacing_kg,
                                                      const shape::StitchOptions& stitch) {
  const auto model = get(id);
  std::lock_guard lock(mutex_);
  if (auto it = assets_.find(id); it != assets_.end()) return it->second;
  if (!model->base()) fail(ErrorKind::Data, "model '" + id + "' has no base measurements");
  const double base = model->base()->weight_kg;
  const auto grid = shape::morph_grid(base, interaction::kClampFraction, spacing_kg);
  auto table = shape::precompute_morph_targets(*model, model->mean_mesh(), grid, stitch);
  auto assets = std::make_shared<const MorphAssets>(MorphAssets{id, base, model, std::move(table)});
  assets_.emplace(id, assets);
  return assets;
}

std::vector<std::string> ModelStore::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, m] : models_) out.push_back(id);
  return out;
}

SessionManager::SessionManager(std::filesystem::path data_dir, std::shared_ptr<ModelStore> models,
                               ServiceOptions options)
    : data_dir_(std::move(data_dir)), models_(std::move(models)), options_(options) {
  std::error_code ec;
  std::filesystem::create_directories(session_dir(), ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + session_dir().string() + ": " + ec.message());
  std::vector<std::filesystem::path> logs;
  for (const auto& entry : std::filesystem::directory_iterator(session_dir())) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& path : logs) {
    auto session = Session::restore(path, options_.interaction);
    if (session->id() != path.stem().string()) fail(ErrorKind::Data, path.string() + ": id does not match file name");
    sessions_.emplace(session->id(), std::move(session));
  }
}

std::string SessionManager::create(const SessionConfig& config) {
  config.validate();
  if (!models_->contains(config.model_id)) fail(ErrorKind::NotFound, "unknown model '" + config.model_id + "'");
  std::lock_guard lock(mutex_);
  static thread_local std::mt19937_64 rng(std::random_device{}());
  std::string id;
  do {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "s%012llx", static_cast<unsigned long long>(rng() & 0xffffffffffffull));
    id = buf;
  } while (sessions_.count(id) || std::filesystem::exists(session_dir() / (id + ".jsonl")));
  auto session = Session::create(id, config, session_dir() / (id + ".jsonl"), options_.interaction);
  sessions_.emplace(id, std::move(session));
  return id;
}

Session& SessionManager::get(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(ErrorKind::NotFound, "unknown session '" + id + "'");
  return *it->second;
}

std::vector<std::string> SessionManager::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

nlohmann::json SessionManager::results(const std::string& id) {
  const auto records = tasks::parse_records_jsonl(get(id).log_text());
  if (records.empty()) fail(ErrorKind::Protocol, "session '" + id + "' has no completed trials");
  return tasks::analysis_report(records, options_.analysis);
}

std::vector<shape::Vec3> SessionManager::display(const std::string& id) {
  auto& s = get(id);
  const auto assets = models_->assets(s.config().model_id, options_.morph_spacing_kg, options_.stitch);
  const double relative = s.display_weight() / s.config().base_kg - 1.0;
  return assets->table.interpolate(relative * assets->base_kg);
}

std::string SessionManager::export_log(const std::string& id) { return get(id).log_text(); }

}  // namespace bwm::service
