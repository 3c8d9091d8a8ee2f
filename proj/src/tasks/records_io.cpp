#include <sstream>

#include "bwm/error.hpp"
#include "bwm/tasks.hpp"
#include "bwm/text_io.hpp"

namespace bwm::tasks {

nlohmann::json to_json(const EstimationRecord& r) {
  nlohmann::json j;
  j["kind"] = to_string(r.kind);
  j["method"] = r.method ? nlohmann::json(interaction::to_string(*r.method)) : nlohmann::json(nullptr);
  j["participant"] = r.participant;
  j["trial"] = r.trial;
  j["base_kg"] = r.base_kg;
  j["level_pct"] = r.level_pct;
  j["shown_kg"] = r.shown_kg;
  j["response_kg"] = r.response_kg;
  j["rt_s"] = r.rt_s;
  return j;
}

EstimationRecord record_from_json(const nlohmann::json& j) {
  try {
    EstimationRecord r;
    r.kind = parse_task_kind(j.at("kind").get<std::string>());
    if (j.contains("method") && !j["method"].is_null()) r.method = interaction::parse_method(j["method"].get<std::string>());
    r.participant = j.at("participant").get<std::string>();
    r.trial = j.at("trial").get<int>();
    r.base_kg = j.at("base_kg").get<double>();
    r.level_pct = j.at("level_pct").get<double>();
    r.shown_kg = j.at("shown_kg").get<double>();
    r.response_kg = j.at("response_kg").get<double>();
    r.rt_s = j.at("rt_s").get<double>();
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, std::string("invalid record: ") + e.what());
  }
}

std::string format_records_csv(std::span<const EstimationRecord> records) {
  std::string out = std::string(kRecordsCsvHeader) + "\n";
  for (const auto& r : records) {
    out += std::string(to_string(r.kind)) + ",";
    if (r.method) out += interaction::to_string(*r.method);
    out += "," + r.participant + "," + std::to_string(r.trial) + "," + format_double(r.base_kg) + "," +
           format_double(r.level_pct) + "," + format_double(r.shown_kg) + "," + format_double(r.response_kg) + "," +
           format_double(r.rt_s) + "\n";
  }
  return out;
}

std::vector<EstimationRecord> parse_records_csv(std::string_view text) {
  std::vector<EstimationRecord> out;
  bool header = false;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != kRecordsCsvHeader) fail(ErrorKind::Data, "records CSV header must be: " + std::string(kRecordsCsvHeader));
      header = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 9) fail(ErrorKind::Data, "records CSV line " + std::to_string(line_no) + ": expected 9 columns");
    try {
      EstimationRecord r;
      r.kind = parse_task_kind(trim(cells[0]));
      if (!trim(cells[1]).empty()) r.method = interaction::parse_method(trim(cells[1]));
      r.participant = std::string(trim(cells[2]));
      r.trial = static_cast<int>(parse_int(cells[3]));
      r.base_kg = parse_double(cells[4]);
      r.level_pct = parse_double(cells[5]);
      r.shown_kg = parse_double(cells[6]);
      r.response_kg = parse_double(cells[7]);
      r.rt_s = parse_double(cells[8]);
      r.validate();
      out.push_back(std::move(r));
    } catch (const Error& e) {
      fail(ErrorKind::Data, "records CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) fail(ErrorKind::Data, "records CSV has no header");
  return out;
}

std::string format_records_jsonl(std::span<const EstimationRecord> records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

std::vector<EstimationRecord> parse_records_jsonl(std::string_view text) {
  std::vector<EstimationRecord> out;
  const auto lines = split(text, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      // A crash can leave the last line of a log half-written.
      const bool unterminated = i + 1 == lines.size();
      if (unterminated) break;
      fail(ErrorKind::Data, "JSON Lines line " + std::to_string(i + 1) + " is not valid JSON");
    }
    if (!j.is_object()) fail(ErrorKind::Data, "JSON Lines line " + std::to_string(i + 1) + " is not an object");
    if (j.contains("type")) {
      if (j["type"] == "estimate" && j.contains("record")) out.push_back(record_from_json(j["record"]));
      continue;
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

std::vector<EstimationRecord> load_records(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const auto body = trim(text);
  if (body.empty()) fail(ErrorKind::Usage, "records file " + path.string() + " is empty");
  auto records = body.front() == '{' ? parse_records_jsonl(text) : parse_records_csv(text);
  if (records.empty()) fail(ErrorKind::Usage, "records file " + path.string() + " contains no records");
  return records;
}

void save_records(std::span<const EstimationRecord> records, const std::filesystem::path& path) {
  const bool jsonl = path.extension() == ".jsonl" || path.extension() == ".json";
  write_text_file(path, jsonl ? format_records_jsonl(records) : format_records_csv(records));
}

}  // namespace bwm::tasks
