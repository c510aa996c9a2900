#include "selfens/verification.hpp"

#include <algorithm>
#include <cmath>

#include "selfens/rng.hpp"

namespace selfens {

namespace {

constexpr std::string_view kWords[] = {
    "river", "stone", "light", "plant", "energy", "cell",  "heat",  "water", "motion",
    "sound", "metal", "wind",  "seed",  "orbit", "force", "wave",  "salt",  "cloud",
    "root",  "leaf",  "magnet", "ice",  "fuel",  "sugar", "gas",   "shell", "storm"};

std::string random_phrase(SplitMix64& rng, std::size_t min_words, std::size_t max_words) {
  const std::size_t n = min_words + rng.uniform_below(max_words - min_words + 1);
  std::string out;
  for (std::size_t w = 0; w < n; ++w) {
    if (w) out += ' ';
    out += kWords[rng.uniform_below(std::size(kWords))];
  }
  return out;
}

}  // namespace

EquivalenceCase make_equivalence_case(const EquivalenceOptions& options, std::size_t index) {
  SplitMix64 rng(options.seed * 0x100000001b3ULL + index);
  const std::size_t k = options.min_choices +
      rng.uniform_below(options.max_choices - options.min_choices + 1);
  const std::size_t max_m = std::max(options.min_group_size,
                                     std::min(options.max_group_size, k - 1));
  const std::size_t m = options.min_group_size +
      rng.uniform_below(max_m - options.min_group_size + 1);

  std::string question = random_phrase(rng, 3, 8) + "?";
  std::vector<std::string> texts;
  while (texts.size() < k) {
    std::string t = random_phrase(rng, 1, 3);
    if (std::find(texts.begin(), texts.end(), t) == texts.end()) texts.push_back(std::move(t));
  }
  ChoiceSet choices(std::move(texts));
  GroupPartition partition = partition_choices(choices, m, rng.next());
  return EquivalenceCase{std::move(question), std::move(choices), std::move(partition)};
}

double max_relative_deviation(const TrialResult& a, const TrialResult& b,
                              std::size_t num_choices) {
  const auto pa = a.per_choice(num_choices);
  const auto pb = b.per_choice(num_choices);
  double worst = 0.0;
  for (std::size_t i = 0; i < num_choices; ++i) {
    const double denom = std::max(std::abs(pb[i]), 1e-300);
    worst = std::max(worst, std::abs(pa[i] - pb[i]) / denom);
  }
  return worst;
}

std::size_t EquivalenceArm::cases_exceeding(double tolerance) const {
  return static_cast<std::size_t>(std::count_if(
      cases.begin(), cases.end(), [&](const CaseDeviation& c) { return c.deviation > tolerance; }));
}

EquivalenceArm compare_single_pass(const LanguageModel& model, const EquivalenceOptions& options,
                                   EncodingOptions encoding) {
  EquivalenceArm arm;
  arm.encoding = encoding;
  for (std::size_t s = 0; s < options.samples; ++s) {
    const EquivalenceCase c = make_equivalence_case(options, s);
    const TrialResult fused =
        run_trial(model, c.question, c.choices, c.partition, options.prompt, options.mode, encoding);
    const TrialResult separate = run_trial_separately(model, c.question, c.choices, c.partition,
                                                      options.prompt, options.mode);
    const double dev = max_relative_deviation(fused, separate, c.choices.size());
    arm.cases.push_back({c.choices.size(), c.partition.group_size, c.partition.groups.size(), dev});
    arm.max_deviation = std::max(arm.max_deviation, dev);
  }
  return arm;
}

bool EquivalenceReport::ablations_break() const {
  return without_mask.max_deviation > tolerance && without_reencoding.max_deviation > tolerance;
}

EquivalenceReport verify_equivalence(const LanguageModel& model, const EquivalenceOptions& options,
                                     double tolerance, EncodingOptions primary) {
  EquivalenceReport report;
  report.tolerance = tolerance;
  report.primary = compare_single_pass(model, options, primary);
  report.without_mask = compare_single_pass(model, options, {false, true});
  report.without_reencoding = compare_single_pass(model, options, {true, false});
  return report;
}

}  // namespace selfens
