#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace selfens {

/// The K answer options of one question, in dataset order.
class ChoiceSet {
 public:
  /// Throws std::invalid_argument if empty, any choice is empty, or two
  /// choices have identical text.
  explicit ChoiceSet(std::vector<std::string> choices);

  std::size_t size() const { return choices_.size(); }
  const std::string& operator[](std::size_t i) const { return choices_[i]; }
  const std::vector<std::string>& choices() const { return choices_; }

 private:
  std::vector<std::string> choices_;
};

using ChoiceGroup = std::vector<std::size_t>;

/// One seeded split of choice indices 0..K-1 into ceil(K/m) disjoint groups.
struct GroupPartition {
  std::uint64_t seed = 0;
  std::size_t group_size = 0;
  std::size_t num_choices = 0;
  std::vector<ChoiceGroup> groups;

  bool operator==(const GroupPartition&) const = default;
};

struct TrialPlan {
  std::size_t num_trials = 0;
  std::size_t group_size = 0;
  std::uint64_t base_seed = 0;
  std::vector<GroupPartition> partitions;
};

/// Fisher-Yates shuffle of 0..K-1 driven by SplitMix64(seed), chunked into
/// consecutive blocks of m (the last block keeps the remainder). When K <= m
/// no shuffle happens and the single group is the identity order 0..K-1.
GroupPartition partition_indices(std::size_t num_choices, std::size_t group_size,
                                 std::uint64_t seed);
GroupPartition partition_choices(const ChoiceSet& choices, std::size_t group_size,
                                 std::uint64_t seed);

/// N partitions with seeds base_seed, base_seed + 1, ...
TrialPlan make_trial_plan(const ChoiceSet& choices, std::size_t group_size,
                          std::size_t num_trials, std::uint64_t base_seed);

/// The partition holding all K choices in order as one group.
GroupPartition single_group_partition(std::size_t num_choices);

/// Throws std::invalid_argument describing the first violated invariant:
/// disjointness, coverage of 0..K-1, group count ceil(K/m), and full groups
/// everywhere but the last.
void validate_partition(const GroupPartition& partition);

}  // namespace selfens
