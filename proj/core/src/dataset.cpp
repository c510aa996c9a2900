#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "selfens/eval.hpp"

namespace selfens {

namespace {

DatasetRecord parse_record(const std::string& line, const std::string& where) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DatasetError(where + ": invalid JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw DatasetError(where + ": expected a JSON object");

  auto require = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw DatasetError(where + ": missing field \"" + key + "\"");
    return j.at(key);
  };
  const auto& id = require("id");
  const auto& question = require("question");
  const auto& choices = require("choices");
  const auto& answer = require("answer_index");
  if (!id.is_string()) throw DatasetError(where + ": \"id\" must be a string");
  if (!question.is_string()) throw DatasetError(where + ": \"question\" must be a string");
  if (!choices.is_array() || choices.empty()) {
    throw DatasetError(where + ": \"choices\" must be a non-empty array");
  }
  if (!answer.is_number_integer()) {
    throw DatasetError(where + ": \"answer_index\" must be an integer");
  }

  DatasetRecord r;
  r.id = id.get<std::string>();
  r.question = question.get<std::string>();
  std::unordered_set<std::string> seen;
  for (const auto& c : choices) {
    if (!c.is_string()) throw DatasetError(where + ": every choice must be a string");
    auto text = c.get<std::string>();
    if (text.empty()) throw DatasetError(where + ": empty choice text");
    if (!seen.insert(text).second) {
      throw DatasetError(where + ": duplicate choice \"" + text + "\"");
    }
    r.choices.push_back(std::move(text));
  }
  const auto idx = answer.get<std::int64_t>();
  if (idx < 0 || static_cast<std::size_t>(idx) >= r.choices.size()) {
    throw DatasetError(where + ": answer_index " + std::to_string(idx) + " out of range for " +
                       std::to_string(r.choices.size()) + " choices");
  }
  r.answer_index = static_cast<std::size_t>(idx);
  return r;
}

}  // namespace

std::vector<DatasetRecord> parse_dataset(std::istream& in, const std::string& source_name) {
  std::vector<DatasetRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    records.push_back(parse_record(line, source_name + ":" + std::to_string(line_no)));
  }
  return records;
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(path.string() + ": cannot open dataset");
  return parse_dataset(in, path.string());
}

}  // namespace selfens
