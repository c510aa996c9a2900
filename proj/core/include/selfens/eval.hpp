#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "selfens/encoding.hpp"
#include "selfens/ensemble.hpp"
#include "selfens/transformer.hpp"

namespace selfens {

struct DatasetRecord {
  std::string id;
  std::string question;
  std::vector<std::string> choices;
  std::size_t answer_index = 0;
};

/// Missing file or schema violation. The message names the source and line.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSONL, one object per line: {"id": str, "question": str, "choices": [str],
/// "answer_index": int}. Blank lines are skipped. Fails on the first bad line.
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path);
std::vector<DatasetRecord> parse_dataset(std::istream& in, const std::string& source_name);

enum class Method { Standard, SelfEnsemble };

std::string_view to_string(Method method);
/// Accepts "standard" and "self-ensemble".
std::optional<Method> parse_method(std::string_view text);

struct EvalConfig {
  Method method = Method::SelfEnsemble;
  std::size_t group_size = 4;
  std::size_t num_trials = 20;
  std::uint64_t base_seed = 0;
  ProbMode prob_mode = ProbMode::FullVocab;
  PromptTemplate prompt;
  std::size_t workers = 1;
};

/// Group size and trial count used when the user gives none: 8 choices ->
/// (4, 20), 6 -> (3, 6), 10 -> (5, 40), otherwise (ceil(K/2), 2K).
EnsembleConfig default_ensemble_settings(std::size_t num_choices);

struct QuestionOutcome {
  std::string id;
  std::size_t chosen_index = 0;
  std::size_t gold_index = 0;
  double confidence = 0.0;
  bool correct = false;
};

struct CurvePoint {
  double tau = 0.0;
  double correct_prop = 0.0;
  double incorrect_prop = 0.0;
};

struct SkippedRecord {
  std::string id;
  std::string reason;
};

struct EvalReport {
  Method method = Method::Standard;
  std::size_t group_size = 0;  // for standard: the largest K seen
  std::size_t num_trials = 0;  // for standard: 1
  std::uint64_t base_seed = 0;
  ProbMode prob_mode = ProbMode::FullVocab;
  double accuracy = 0.0;
  std::vector<QuestionOutcome> per_question;
  std::vector<CurvePoint> curve;
  std::vector<SkippedRecord> skipped;
};

inline constexpr std::size_t kCurvePoints = 21;

/// tau in {0.00, 0.05, ..., 1.00}; for each tau the share of correct and of
/// incorrect predictions whose confidence is strictly greater than tau. An
/// empty population yields 0 everywhere.
std::vector<CurvePoint> confidence_curve(std::span<const QuestionOutcome> outcomes);

/// Runs the configured method on every record. Records that fail (bad
/// choice text, prompt overflow, ...) are listed in `skipped` and left out of
/// accuracy and curve. Throws std::invalid_argument on an empty record list.
EvalReport evaluate(const LanguageModel& model, std::span<const DatasetRecord> records,
                    const EvalConfig& config);

/// Keeps the gold choice and the first (k - 1) distractors in dataset order,
/// preserving relative order. Throws std::invalid_argument for k < 2 or a
/// record with fewer than k choices.
DatasetRecord truncate_choices(const DatasetRecord& record, std::size_t k);

struct AblationRow {
  std::size_t num_choices = 0;
  EvalReport report;
};

std::vector<AblationRow> choice_count_ablation(const LanguageModel& model,
                                               std::span<const DatasetRecord> records,
                                               std::span<const std::size_t> counts,
                                               const EvalConfig& config);

/// Writes summary.csv, per_question.csv and curve.csv into `dir` (created if
/// needed). Floats use six decimals; output is byte-deterministic.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

/// Writes ablation.csv (choices,method,m,trials,accuracy) into `dir`.
void write_ablation(std::span<const AblationRow> rows, const std::filesystem::path& dir);

std::string format_fixed6(double value);

}  // namespace selfens
