#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "selfens/ensemble.hpp"
#include "selfens/rng.hpp"
#include "stub_models.hpp"

using namespace selfens;
using selfens::testing::LabelScoringStub;
using selfens::testing::PlantedTokenStub;
using selfens::testing::small_config;

namespace {

ChoiceSet letters_choices(std::size_t k) {
  std::vector<std::string> c;
  for (std::size_t i = 0; i < k; ++i) c.push_back("option " + std::to_string(i));
  return ChoiceSet(std::move(c));
}

class CountingModel final : public LanguageModel {
 public:
  explicit CountingModel(const LanguageModel& inner) : inner_(inner) {}
  std::size_t vocab_size() const override { return inner_.vocab_size(); }
  std::size_t max_seq_len() const override { return inner_.max_seq_len(); }
  using LanguageModel::forward;
  Logits forward(std::span<const TokenId> t, const AttentionMask& m,
                 const PositionIndices& p) const override {
    ++calls;
    return inner_.forward(t, m, p);
  }
  mutable std::atomic<int> calls{0};

 private:
  const LanguageModel& inner_;
};

TrialResult make_trial(std::vector<ChoiceReading> readings) {
  return TrialResult{GroupPartition{}, std::move(readings)};
}

}  // namespace

TEST(ChoiceProbabilities, Modes) {
  std::vector<double> row(256, 0.0);
  row['A'] = 2.0;
  row['B'] = 1.0;
  const std::vector<TokenId> labels{'A', 'B'};
  const auto full = choice_probabilities(row, labels, ProbMode::FullVocab);
  const double z = std::exp(2.0) + std::exp(1.0) + 254.0;
  EXPECT_NEAR(full[0], std::exp(2.0) / z, 1e-15);
  EXPECT_NEAR(full[1], std::exp(1.0) / z, 1e-15);
  const auto renorm = choice_probabilities(row, labels, ProbMode::GroupRenorm);
  EXPECT_NEAR(renorm[0], std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
  EXPECT_NEAR(renorm[0] + renorm[1], 1.0, 1e-15);
  const std::vector<TokenId> outside{'A', 300};
  EXPECT_THROW(choice_probabilities(row, outside, ProbMode::FullVocab), std::invalid_argument);
}

TEST(ProbModeNames, RoundTrip) {
  EXPECT_EQ(parse_prob_mode(to_string(ProbMode::FullVocab)), ProbMode::FullVocab);
  EXPECT_EQ(parse_prob_mode(to_string(ProbMode::GroupRenorm)), ProbMode::GroupRenorm);
  EXPECT_FALSE(parse_prob_mode("softmax"));
}

TEST(RunTrial, PlantedFirstLabelWinsEveryGroup) {
  const PlantedTokenStub stub('A', 10.0);
  const auto choices = letters_choices(7);
  const auto partition = partition_choices(choices, 3, 4);
  const auto trial = run_trial(stub, "q?", choices, partition, PromptTemplate{}, ProbMode::FullVocab);
  const auto probs = trial.per_choice(7);
  for (const auto& group : partition.groups) {
    for (std::size_t local = 1; local < group.size(); ++local) {
      EXPECT_GT(probs[group[0]], probs[group[local]]);
    }
  }
}

TEST(RunTrial, GroupRenormSumsToOnePerGroup) {
  const Transformer model(init_weights(small_config(), 3));
  const auto choices = letters_choices(9);
  const auto partition = partition_choices(choices, 4, 1);
  const auto trial =
      run_trial(model, "Which?", choices, partition, PromptTemplate{}, ProbMode::GroupRenorm);
  const auto probs = trial.per_choice(9);
  for (const auto& group : partition.groups) {
    double sum = 0.0;
    for (auto idx : group) sum += probs[idx];
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(RunTrial, OneForwardPerTrialAndFullCoverage) {
  const Transformer model(init_weights(small_config(), 3));
  CountingModel counting(model);
  const auto choices = letters_choices(10);
  const auto partition = partition_choices(choices, 3, 2);
  const auto trial =
      run_trial(counting, "Which?", choices, partition, PromptTemplate{}, ProbMode::FullVocab);
  EXPECT_EQ(counting.calls.load(), 1);
  EXPECT_EQ(trial.readings.size(), 10u);
  EXPECT_NO_THROW(trial.per_choice(10));
  for (double p : trial.per_choice(10)) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(RunTrial, SeparateRouteMatchesFusedRoute) {
  const Transformer model(init_weights(small_config(), 5));
  const auto choices = letters_choices(8);
  const auto partition = partition_choices(choices, 3, 9);
  const auto fused = run_trial(model, "Why?", choices, partition, PromptTemplate{}, ProbMode::FullVocab);
  const auto separate =
      run_trial_separately(model, "Why?", choices, partition, PromptTemplate{}, ProbMode::FullVocab);
  const auto a = fused.per_choice(8);
  const auto b = separate.per_choice(8);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(a[i], b[i], 1e-5 * b[i]);
}

TEST(RunTrial, OverflowRejected) {
  ModelConfig cfg = small_config();
  cfg.max_seq_len = 32;
  const Transformer model(init_weights(cfg, 1));
  const auto choices = letters_choices(6);
  EXPECT_THROW(run_trial(model, "a long question text", choices, single_group_partition(6),
                         PromptTemplate{}, ProbMode::FullVocab),
               std::length_error);
}

TEST(Aggregate, SingleTrialIsIdentity) {
  const TrialResult t = make_trial({{1, 0.3}, {0, 0.2}, {2, 0.9}});
  const auto d = aggregate(std::span(&t, 1), 3);
  EXPECT_EQ(d.per_choice, (std::vector<double>{0.2, 0.3, 0.9}));
  EXPECT_EQ(d.num_trials, 1u);
}

TEST(Aggregate, TwoTrialMean) {
  const std::vector<TrialResult> trials{make_trial({{0, 0.6}, {1, 0.1}}),
                                        make_trial({{1, 0.3}, {0, 0.8}})};
  const auto d = aggregate(trials, 2);
  EXPECT_NEAR(d.per_choice[0], 0.7, 1e-12);
  EXPECT_NEAR(d.per_choice[1], 0.2, 1e-12);
}

TEST(Aggregate, IdenticalTrialsReproduceExactly) {
  const Transformer model(init_weights(small_config(), 8));
  const auto choices = letters_choices(6);
  const auto partition = partition_choices(choices, 2, 3);
  std::vector<TrialResult> trials;
  for (int i = 0; i < 7; ++i)
    trials.push_back(run_trial(model, "Q?", choices, partition, PromptTemplate{}, ProbMode::FullVocab));
  EXPECT_EQ(aggregate(trials, 6).per_choice, trials[0].per_choice(6));
}

TEST(Aggregate, CoverageErrors) {
  const std::vector<TrialResult> missing{make_trial({{0, 0.5}})};
  EXPECT_THROW(aggregate(missing, 2), std::invalid_argument);
  const std::vector<TrialResult> duplicated{make_trial({{0, 0.5}, {0, 0.4}})};
  EXPECT_THROW(aggregate(duplicated, 2), std::invalid_argument);
  const std::vector<TrialResult> outside{make_trial({{0, 0.5}, {5, 0.4}})};
  EXPECT_THROW(aggregate(outside, 2), std::invalid_argument);
  EXPECT_THROW(aggregate(std::span<const TrialResult>{}, 2), std::invalid_argument);
}

TEST(Aggregate, WithinTrialRange) {
  SplitMix64 rng(31);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + rng.uniform_below(8);
    std::vector<TrialResult> trials(1 + rng.uniform_below(10));
    for (auto& tr : trials)
      for (std::size_t i = 0; i < k; ++i) tr.readings.push_back({i, rng.uniform01()});
    const auto d = aggregate(trials, k);
    for (std::size_t i = 0; i < k; ++i) {
      double lo = 1.0, hi = 0.0;
      for (const auto& tr : trials) {
        lo = std::min(lo, tr.readings[i].probability);
        hi = std::max(hi, tr.readings[i].probability);
      }
      EXPECT_GE(d.per_choice[i], lo);
      EXPECT_LE(d.per_choice[i], hi);
    }
  }
}

TEST(Decide, ArgmaxAndTies) {
  auto p = decide({{0.1, 0.7, 0.2}, 1});
  EXPECT_EQ(p.chosen_index, 1u);
  EXPECT_DOUBLE_EQ(p.confidence, 0.7);
  EXPECT_EQ(decide({{0.5, 0.5}, 1}).chosen_index, 0u);
  EXPECT_THROW(decide({{}, 1}), std::invalid_argument);
}

TEST(Decide, ScaleInvariant) {
  SplitMix64 rng(12);
  for (int t = 0; t < 200; ++t) {
    ChoiceDistribution d{std::vector<double>(1 + rng.uniform_below(10)), 1};
    for (auto& v : d.per_choice) v = rng.uniform01();
    ChoiceDistribution scaled = d;
    const double c = rng.uniform(0.01, 100.0);
    for (auto& v : scaled.per_choice) v *= c;
    EXPECT_EQ(decide(d).chosen_index, decide(scaled).chosen_index);
  }
}

TEST(StandardInference, PlantedLabelC) {
  const PlantedTokenStub stub('C', 8.0);
  const auto r = standard_inference(stub, "q", letters_choices(5), PromptTemplate{},
                                    ProbMode::FullVocab);
  EXPECT_EQ(r.prediction.chosen_index, 2u);
  for (double p : r.distribution.per_choice) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(StandardInference, EqualsSingleGroupTrial) {
  const Transformer model(init_weights(small_config(), 2));
  const auto choices = letters_choices(6);
  const auto std_result = standard_inference(model, "Q?", choices, PromptTemplate{}, ProbMode::FullVocab);
  const auto trial = run_trial(model, "Q?", choices, single_group_partition(6), PromptTemplate{},
                               ProbMode::FullVocab);
  EXPECT_EQ(std_result.distribution.per_choice, trial.per_choice(6));
}

TEST(SelfEnsemble, CollapsesToStandardWhenMCoversK) {
  const Transformer model(init_weights(small_config(), 4));
  const auto choices = letters_choices(5);
  const auto base = standard_inference(model, "Q?", choices, PromptTemplate{}, ProbMode::FullVocab);
  for (std::size_t m : {5u, 6u, 9u}) {
    const auto se = self_ensemble(model, "Q?", choices, {m, 3, 17}, PromptTemplate{}, ProbMode::FullVocab);
    EXPECT_EQ(se.distribution.per_choice, base.distribution.per_choice);
    EXPECT_EQ(se.prediction.chosen_index, base.prediction.chosen_index);
  }
}

TEST(SelfEnsemble, DefaultConfigurationsRun) {
  const Transformer model(init_weights(small_config(), 4));
  CountingModel counting(model);
  const auto qasc = self_ensemble(counting, "Q?", letters_choices(8), {4, 20, 0}, PromptTemplate{},
                                  ProbMode::FullVocab);
  EXPECT_EQ(qasc.distribution.num_trials, 20u);
  EXPECT_EQ(counting.calls.load(), 20);
  const auto tqa = self_ensemble(model, "Q?", letters_choices(6), {3, 6, 0}, PromptTemplate{},
                                 ProbMode::FullVocab);
  EXPECT_EQ(tqa.distribution.num_trials, 6u);
}

TEST(SelfEnsemble, RecoversPlantedGoldAcrossShapes) {
  const LabelScoringStub stub([](std::string_view text, std::size_t) {
    return text == "GOLD" ? 6.0 : 0.0;
  });
  for (std::size_t k = 2; k <= 10; ++k) {
    for (std::size_t gold = 0; gold < k; gold += 3) {
      std::vector<std::string> texts;
      for (std::size_t i = 0; i < k; ++i) texts.push_back(i == gold ? "GOLD" : "wrong " + std::to_string(i));
      const ChoiceSet choices(texts);
      for (std::size_t m = 2; m <= 5; ++m) {
        const auto r = self_ensemble(stub, "pick gold", choices, {m, 4, k * 10 + m},
                                     PromptTemplate{}, ProbMode::FullVocab);
        EXPECT_EQ(r.prediction.chosen_index, gold) << "K=" << k << " m=" << m;
      }
    }
  }
}

TEST(SelfEnsemble, InvalidConfig) {
  const PlantedTokenStub stub('A', 1.0);
  EXPECT_THROW(self_ensemble(stub, "q", letters_choices(4), {0, 2, 0}, PromptTemplate{},
                             ProbMode::FullVocab),
               std::invalid_argument);
  EXPECT_THROW(self_ensemble(stub, "q", letters_choices(4), {2, 0, 0}, PromptTemplate{},
                             ProbMode::FullVocab),
               std::invalid_argument);
}
