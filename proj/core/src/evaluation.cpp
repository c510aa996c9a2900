#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <variant>

#include "selfens/eval.hpp"

namespace selfens {

std::string_view to_string(Method method) {
  return method == Method::Standard ? "standard" : "self-ensemble";
}

std::optional<Method> parse_method(std::string_view text) {
  if (text == "standard") return Method::Standard;
  if (text == "self-ensemble") return Method::SelfEnsemble;
  return std::nullopt;
}

EnsembleConfig default_ensemble_settings(std::size_t num_choices) {
  switch (num_choices) {
    case 8: return {4, 20, 0};
    case 6: return {3, 6, 0};
    case 10: return {5, 40, 0};
    default: return {(num_choices + 1) / 2, 2 * num_choices, 0};
  }
}

std::vector<CurvePoint> confidence_curve(std::span<const QuestionOutcome> outcomes) {
  std::size_t n_correct = 0;
  for (const auto& o : outcomes) n_correct += o.correct ? 1 : 0;
  const std::size_t n_incorrect = outcomes.size() - n_correct;

  std::vector<CurvePoint> curve;
  curve.reserve(kCurvePoints);
  for (std::size_t step = 0; step < kCurvePoints; ++step) {
    const double tau = static_cast<double>(step) / static_cast<double>(kCurvePoints - 1);
    std::size_t above_correct = 0;
    std::size_t above_incorrect = 0;
    for (const auto& o : outcomes) {
      if (o.confidence > tau) (o.correct ? above_correct : above_incorrect) += 1;
    }
    CurvePoint p;
    p.tau = tau;
    p.correct_prop = n_correct ? static_cast<double>(above_correct) / n_correct : 0.0;
    p.incorrect_prop = n_incorrect ? static_cast<double>(above_incorrect) / n_incorrect : 0.0;
    curve.push_back(p);
  }
  return curve;
}

namespace {

QuestionOutcome evaluate_record(const LanguageModel& model, const DatasetRecord& record,
                                const EvalConfig& config) {
  const ChoiceSet choices(record.choices);
  if (record.answer_index >= choices.size()) {
    throw std::invalid_argument("answer_index out of range");
  }
  InferenceResult result =
      config.method == Method::Standard
          ? standard_inference(model, record.question, choices, config.prompt, config.prob_mode)
          : self_ensemble(model, record.question, choices,
                          EnsembleConfig{config.group_size, config.num_trials, config.base_seed},
                          config.prompt, config.prob_mode);
  QuestionOutcome o;
  o.id = record.id;
  o.chosen_index = result.prediction.chosen_index;
  o.gold_index = record.answer_index;
  o.confidence = result.prediction.confidence;
  o.correct = o.chosen_index == o.gold_index;
  return o;
}

}  // namespace

EvalReport evaluate(const LanguageModel& model, std::span<const DatasetRecord> records,
                    const EvalConfig& config) {
  if (records.empty()) throw std::invalid_argument("evaluate: no records");
  if (config.method == Method::SelfEnsemble &&
      (config.group_size == 0 || config.num_trials == 0)) {
    throw std::invalid_argument("evaluate: m and trials must be >= 1");
  }

  using Slot = std::variant<std::monostate, QuestionOutcome, std::string>;
  std::vector<Slot> slots(records.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      try {
        slots[i] = evaluate_record(model, records[i], config);
      } catch (const std::exception& e) {
        slots[i] = std::string(e.what());
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(config.workers, 1, records.size());
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  EvalReport report;
  report.method = config.method;
  report.base_seed = config.base_seed;
  report.prob_mode = config.prob_mode;
  if (config.method == Method::Standard) {
    std::size_t max_k = 0;
    for (const auto& r : records) max_k = std::max(max_k, r.choices.size());
    report.group_size = max_k;
    report.num_trials = 1;
  } else {
    report.group_size = config.group_size;
    report.num_trials = config.num_trials;
  }

  std::size_t n_correct = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (auto* o = std::get_if<QuestionOutcome>(&slots[i])) {
      n_correct += o->correct ? 1 : 0;
      report.per_question.push_back(std::move(*o));
    } else {
      report.skipped.push_back({records[i].id, std::get<std::string>(slots[i])});
    }
  }
  report.accuracy = report.per_question.empty()
                        ? 0.0
                        : static_cast<double>(n_correct) /
                              static_cast<double>(report.per_question.size());
  report.curve = confidence_curve(report.per_question);
  return report;
}

DatasetRecord truncate_choices(const DatasetRecord& record, std::size_t k) {
  if (k < 2) throw std::invalid_argument("choice count must be >= 2 (needs a distractor)");
  if (record.choices.size() < k) {
    throw std::invalid_argument("record " + record.id + " has " +
                                std::to_string(record.choices.size()) + " choices, need " +
                                std::to_string(k));
  }
  DatasetRecord out{record.id, record.question, {}, 0};
  std::size_t distractors = 0;
  for (std::size_t i = 0; i < record.choices.size(); ++i) {
    if (i == record.answer_index) {
      out.answer_index = out.choices.size();
      out.choices.push_back(record.choices[i]);
    } else if (distractors < k - 1) {
      ++distractors;
      out.choices.push_back(record.choices[i]);
    }
  }
  return out;
}

std::vector<AblationRow> choice_count_ablation(const LanguageModel& model,
                                               std::span<const DatasetRecord> records,
                                               std::span<const std::size_t> counts,
                                               const EvalConfig& config) {
  if (counts.empty()) throw std::invalid_argument("ablation: no choice counts given");
  std::vector<AblationRow> rows;
  for (std::size_t k : counts) {
    std::vector<DatasetRecord> truncated;
    truncated.reserve(records.size());
    for (const auto& r : records) truncated.push_back(truncate_choices(r, k));
    rows.push_back({k, evaluate(model, truncated, config)});
  }
  return rows;
}

}  // namespace selfens
