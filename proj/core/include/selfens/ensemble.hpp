#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "selfens/encoding.hpp"
#include "selfens/grouping.hpp"
#include "selfens/transformer.hpp"

namespace selfens {

/// How a group-end logits row becomes choice probabilities.
enum class ProbMode {
  FullVocab,    // softmax over the whole vocabulary, read the label tokens
  GroupRenorm,  // softmax over the group's label logits only
};

std::string_view to_string(ProbMode mode);
/// Accepts "full-vocab" and "group-renorm".
std::optional<ProbMode> parse_prob_mode(std::string_view text);

struct ChoiceReading {
  std::size_t choice_index = 0;
  double probability = 0.0;
};

/// Probabilities read for one partition, one entry per choice in reading
/// order (group by group).
struct TrialResult {
  GroupPartition partition;
  std::vector<ChoiceReading> readings;

  /// Probabilities indexed by global choice. Throws if coverage is broken.
  std::vector<double> per_choice(std::size_t num_choices) const;
};

struct ChoiceDistribution {
  std::vector<double> per_choice;
  std::size_t num_trials = 0;
};

struct Prediction {
  std::size_t chosen_index = 0;
  double confidence = 0.0;
  std::optional<bool> correct;
};

struct InferenceResult {
  ChoiceDistribution distribution;
  Prediction prediction;
};

struct EnsembleConfig {
  std::size_t group_size = 4;
  std::size_t num_trials = 20;
  std::uint64_t base_seed = 0;
};

/// Probabilities of `label_tokens` from one logits row.
std::vector<double> choice_probabilities(std::span<const double> logits_row,
                                         std::span<const TokenId> label_tokens, ProbMode mode);

/// One forward pass over [Q, G1, G2, ...] with the group mask and re-encoded
/// positions; each group's probabilities come from the logits row at that
/// group's last token. `options` exists for the ablation arms only.
TrialResult run_trial(const LanguageModel& model, std::string_view question,
                      const ChoiceSet& choices, const GroupPartition& partition,
                      const PromptTemplate& tmpl, ProbMode mode, EncodingOptions options = {});

/// Reference route: one standard causal forward per [Q, Gj]. Results must
/// match run_trial up to floating-point noise.
TrialResult run_trial_separately(const LanguageModel& model, std::string_view question,
                                 const ChoiceSet& choices, const GroupPartition& partition,
                                 const PromptTemplate& tmpl, ProbMode mode);

/// Per-choice mean over trials, reduced in trial order. Throws
/// std::invalid_argument if trials is empty or a trial misses or repeats a
/// choice.
ChoiceDistribution aggregate(std::span<const TrialResult> trials, std::size_t num_choices);

/// Argmax with ties going to the lowest index.
Prediction decide(const ChoiceDistribution& dist);

InferenceResult standard_inference(const LanguageModel& model, std::string_view question,
                                   const ChoiceSet& choices, const PromptTemplate& tmpl,
                                   ProbMode mode);

InferenceResult self_ensemble(const LanguageModel& model, std::string_view question,
                              const ChoiceSet& choices, const EnsembleConfig& config,
                              const PromptTemplate& tmpl, ProbMode mode);

}  // namespace selfens
