#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "selfens/encoding.hpp"
#include "selfens/ensemble.hpp"
#include "selfens/grouping.hpp"
#include "selfens/transformer.hpp"

namespace selfens {

/// A random question with K distinct choices and one partition of them.
struct EquivalenceCase {
  std::string question;
  ChoiceSet choices;
  GroupPartition partition;
};

struct EquivalenceOptions {
  std::size_t samples = 50;
  std::uint64_t seed = 0;
  std::size_t min_choices = 4;
  std::size_t max_choices = 10;
  std::size_t min_group_size = 2;
  std::size_t max_group_size = 5;
  ProbMode mode = ProbMode::FullVocab;
  PromptTemplate prompt;
};

/// Draws case `index` of a sample stream. K is uniform in
/// [min_choices, max_choices] and m uniform in [min_group_size,
/// min(max_group_size, K - 1)], so every case has at least two groups.
EquivalenceCase make_equivalence_case(const EquivalenceOptions& options, std::size_t index);

/// max |a - b| / max(|b|, 1e-300) over choices; b is the reference.
double max_relative_deviation(const TrialResult& a, const TrialResult& b,
                              std::size_t num_choices);

struct CaseDeviation {
  std::size_t num_choices = 0;
  std::size_t group_size = 0;
  std::size_t num_groups = 0;
  double deviation = 0.0;
};

struct EquivalenceArm {
  EncodingOptions encoding;
  std::vector<CaseDeviation> cases;
  double max_deviation = 0.0;

  std::size_t cases_exceeding(double tolerance) const;
};

/// Compares the single masked pass (with `encoding`) against one standalone
/// pass per group over the same case stream.
EquivalenceArm compare_single_pass(const LanguageModel& model, const EquivalenceOptions& options,
                                   EncodingOptions encoding);

struct EquivalenceReport {
  double tolerance = 0.0;
  EquivalenceArm primary;         // the arm under test (full mechanism by default)
  EquivalenceArm without_mask;    // causal mask, re-encoded positions
  EquivalenceArm without_reencoding;  // group mask, physical positions

  bool primary_passes() const { return primary.max_deviation <= tolerance; }
  /// An ablation arm "fails equivalence" when its worst case exceeds tolerance.
  bool ablations_break() const;
  bool passed() const { return primary_passes() && ablations_break(); }
};

EquivalenceReport verify_equivalence(const LanguageModel& model, const EquivalenceOptions& options,
                                     double tolerance, EncodingOptions primary = {});

}  // namespace selfens
