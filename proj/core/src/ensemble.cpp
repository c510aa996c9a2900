#include "selfens/ensemble.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace selfens {

std::string_view to_string(ProbMode mode) {
  return mode == ProbMode::FullVocab ? "full-vocab" : "group-renorm";
}

std::optional<ProbMode> parse_prob_mode(std::string_view text) {
  if (text == "full-vocab") return ProbMode::FullVocab;
  if (text == "group-renorm") return ProbMode::GroupRenorm;
  return std::nullopt;
}

std::vector<double> TrialResult::per_choice(std::size_t num_choices) const {
  std::vector<double> out(num_choices, 0.0);
  std::vector<bool> seen(num_choices, false);
  for (const ChoiceReading& r : readings) {
    if (r.choice_index >= num_choices) {
      throw std::invalid_argument("trial reads choice " + std::to_string(r.choice_index) +
                                  " outside 0.." + std::to_string(num_choices - 1));
    }
    if (seen[r.choice_index]) {
      throw std::invalid_argument("trial reads choice " + std::to_string(r.choice_index) +
                                  " twice");
    }
    seen[r.choice_index] = true;
    out[r.choice_index] = r.probability;
  }
  for (std::size_t i = 0; i < num_choices; ++i) {
    if (!seen[i]) throw std::invalid_argument("trial misses choice " + std::to_string(i));
  }
  return out;
}

std::vector<double> choice_probabilities(std::span<const double> logits_row,
                                         std::span<const TokenId> label_tokens, ProbMode mode) {
  for (TokenId t : label_tokens) {
    if (t >= logits_row.size()) {
      throw std::invalid_argument("label token " + std::to_string(t) +
                                  " is outside the model vocabulary");
    }
  }
  std::vector<double> out;
  out.reserve(label_tokens.size());
  if (mode == ProbMode::FullVocab) {
    const auto probs = softmax_row(logits_row);
    for (TokenId t : label_tokens) out.push_back(probs[t]);
  } else {
    std::vector<double> sub;
    sub.reserve(label_tokens.size());
    for (TokenId t : label_tokens) sub.push_back(logits_row[t]);
    out = softmax_row(sub);
  }
  return out;
}

namespace {

void read_groups(const Logits& logits, const RenderedPrompt& prompt, ProbMode mode,
                 std::size_t first_group, std::size_t group_count, TrialResult& result) {
  for (std::size_t g = first_group; g < first_group + group_count; ++g) {
    const auto probs = choice_probabilities(logits.row(prompt.group_end_indices[g]),
                                            prompt.label_token_ids[g], mode);
    for (std::size_t local = 0; local < probs.size(); ++local) {
      result.readings.push_back({prompt.group_choices[g][local], probs[local]});
    }
  }
}

void check_fits(const LanguageModel& model, const RenderedPrompt& prompt) {
  if (prompt.size() > model.max_seq_len()) {
    throw std::length_error("prompt of " + std::to_string(prompt.size()) +
                            " tokens exceeds max_seq_len " +
                            std::to_string(model.max_seq_len()));
  }
}

}  // namespace

TrialResult run_trial(const LanguageModel& model, std::string_view question,
                      const ChoiceSet& choices, const GroupPartition& partition,
                      const PromptTemplate& tmpl, ProbMode mode, EncodingOptions options) {
  const RenderedPrompt prompt = render_prompt(question, partition, choices, tmpl);
  check_fits(model, prompt);
  const EncodingPlan plan = build_encoding_plan(prompt, options);
  const Logits logits = model.forward(prompt.tokens, plan.mask, plan.positions);
  TrialResult result{partition, {}};
  result.readings.reserve(choices.size());
  read_groups(logits, prompt, mode, 0, prompt.group_spans.size(), result);
  return result;
}

TrialResult run_trial_separately(const LanguageModel& model, std::string_view question,
                                 const ChoiceSet& choices, const GroupPartition& partition,
                                 const PromptTemplate& tmpl, ProbMode mode) {
  validate_partition(partition);
  TrialResult result{partition, {}};
  for (const ChoiceGroup& group : partition.groups) {
    const RenderedPrompt prompt = render_groups(question, {group}, choices, tmpl);
    check_fits(model, prompt);
    const Logits logits = model.forward(prompt.tokens);
    read_groups(logits, prompt, mode, 0, 1, result);
  }
  return result;
}

ChoiceDistribution aggregate(std::span<const TrialResult> trials, std::size_t num_choices) {
  if (trials.empty()) throw std::invalid_argument("aggregate: no trials");
  if (num_choices == 0) throw std::invalid_argument("aggregate: zero choices");
  ChoiceDistribution dist{std::vector<double>(num_choices, 0.0), trials.size()};
  // Running mean in trial order: identical trials reproduce their values
  // exactly, and the result never depends on completion order.
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const auto probs = trials[t].per_choice(num_choices);
    const double count = static_cast<double>(t + 1);
    for (std::size_t i = 0; i < num_choices; ++i) {
      dist.per_choice[i] += (probs[i] - dist.per_choice[i]) / count;
    }
  }
  return dist;
}

Prediction decide(const ChoiceDistribution& dist) {
  if (dist.per_choice.empty()) throw std::invalid_argument("decide: empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.per_choice.size(); ++i) {
    if (dist.per_choice[i] > dist.per_choice[best]) best = i;
  }
  return Prediction{best, dist.per_choice[best], std::nullopt};
}

InferenceResult standard_inference(const LanguageModel& model, std::string_view question,
                                   const ChoiceSet& choices, const PromptTemplate& tmpl,
                                   ProbMode mode) {
  const TrialResult trial =
      run_trial(model, question, choices, single_group_partition(choices.size()), tmpl, mode);
  ChoiceDistribution dist = aggregate(std::span(&trial, 1), choices.size());
  Prediction pred = decide(dist);
  return {std::move(dist), pred};
}

InferenceResult self_ensemble(const LanguageModel& model, std::string_view question,
                              const ChoiceSet& choices, const EnsembleConfig& config,
                              const PromptTemplate& tmpl, ProbMode mode) {
  const TrialPlan plan =
      make_trial_plan(choices, config.group_size, config.num_trials, config.base_seed);
  std::vector<TrialResult> trials;
  trials.reserve(plan.partitions.size());
  for (const GroupPartition& partition : plan.partitions) {
    trials.push_back(run_trial(model, question, choices, partition, tmpl, mode));
  }
  ChoiceDistribution dist = aggregate(trials, choices.size());
  Prediction pred = decide(dist);
  return {std::move(dist), pred};
}

}  // namespace selfens
