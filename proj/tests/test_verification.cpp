#include <gtest/gtest.h>

#include "selfens/verification.hpp"
#include "stub_models.hpp"

using namespace selfens;
using selfens::testing::small_config;

TEST(EquivalenceCases, ShapesWithinBoundsAndMultiGroup) {
  EquivalenceOptions opts;
  opts.seed = 3;
  for (std::size_t s = 0; s < 300; ++s) {
    const auto c = make_equivalence_case(opts, s);
    ASSERT_GE(c.choices.size(), 4u);
    ASSERT_LE(c.choices.size(), 10u);
    ASSERT_GE(c.partition.group_size, 2u);
    ASSERT_LE(c.partition.group_size, 5u);
    ASSERT_GE(c.partition.groups.size(), 2u);
    ASSERT_NO_THROW(validate_partition(c.partition));
  }
  const auto a = make_equivalence_case(opts, 7);
  const auto b = make_equivalence_case(opts, 7);
  EXPECT_EQ(a.question, b.question);
  EXPECT_EQ(a.partition, b.partition);
}

TEST(Equivalence, HealthyMechanismPassesAndAblationsBreak) {
  const Transformer model(init_weights(small_config(), 21));
  EquivalenceOptions opts;
  opts.samples = 12;
  const auto report = verify_equivalence(model, opts, 1e-5);
  EXPECT_LE(report.primary.max_deviation, 1e-5);
  EXPECT_TRUE(report.primary_passes());
  EXPECT_GT(report.without_mask.max_deviation, 1e-5);
  EXPECT_GT(report.without_reencoding.max_deviation, 1e-5);
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.primary.cases.size(), 12u);
}

TEST(Equivalence, DisabledMaskFails) {
  const Transformer model(init_weights(small_config(), 21));
  EquivalenceOptions opts;
  opts.samples = 6;
  EXPECT_FALSE(verify_equivalence(model, opts, 1e-5, {false, true}).passed());
  EXPECT_FALSE(verify_equivalence(model, opts, 1e-5, {true, false}).passed());
}

TEST(Equivalence, GroupRenormModeAlsoHolds) {
  const Transformer model(init_weights(small_config(), 2));
  EquivalenceOptions opts;
  opts.samples = 6;
  opts.mode = ProbMode::GroupRenorm;
  EXPECT_LE(compare_single_pass(model, opts, {}).max_deviation, 1e-5);
}

TEST(RelativeDeviation, Basic) {
  const TrialResult a{GroupPartition{}, {{0, 0.5}, {1, 0.25}}};
  const TrialResult b{GroupPartition{}, {{1, 0.2}, {0, 0.5}}};
  EXPECT_NEAR(max_relative_deviation(a, b, 2), 0.25, 1e-15);
  EXPECT_EQ(max_relative_deviation(a, a, 2), 0.0);
}
