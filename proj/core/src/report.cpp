#include <cstdio>
#include <fstream>

#include "selfens/eval.hpp"

namespace selfens {

std::string format_fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

// Quotes a field when it carries a comma, quote or newline.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  const auto summary_path = dir / "summary.csv";
  auto summary = open_csv(summary_path);
  summary << "method,m,trials,seed,prob_mode,accuracy\n"
          << to_string(report.method) << ',' << report.group_size << ',' << report.num_trials
          << ',' << report.base_seed << ',' << to_string(report.prob_mode) << ','
          << format_fixed6(report.accuracy) << '\n';
  finish(summary, summary_path);

  const auto per_question_path = dir / "per_question.csv";
  auto per_question = open_csv(per_question_path);
  per_question << "id,chosen_index,gold_index,confidence,correct\n";
  for (const auto& q : report.per_question) {
    per_question << csv_field(q.id) << ',' << q.chosen_index << ',' << q.gold_index << ','
                 << format_fixed6(q.confidence) << ',' << (q.correct ? 1 : 0) << '\n';
  }
  finish(per_question, per_question_path);

  const auto curve_path = dir / "curve.csv";
  auto curve = open_csv(curve_path);
  curve << "tau,correct_prop,incorrect_prop\n";
  for (const auto& p : report.curve) {
    curve << format_fixed6(p.tau) << ',' << format_fixed6(p.correct_prop) << ','
          << format_fixed6(p.incorrect_prop) << '\n';
  }
  finish(curve, curve_path);
}

void write_ablation(std::span<const AblationRow> rows, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / "ablation.csv";
  auto out = open_csv(path);
  out << "choices,method,m,trials,accuracy\n";
  for (const auto& row : rows) {
    out << row.num_choices << ',' << to_string(row.report.method) << ','
        << row.report.group_size << ',' << row.report.num_trials << ','
        << format_fixed6(row.report.accuracy) << '\n';
  }
  finish(out, path);
}

}  // namespace selfens
