#include "selfens/grouping.hpp"

#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "selfens/rng.hpp"

namespace selfens {

ChoiceSet::ChoiceSet(std::vector<std::string> choices) : choices_(std::move(choices)) {
  if (choices_.empty()) throw std::invalid_argument("choice set is empty");
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < choices_.size(); ++i) {
    if (choices_[i].empty()) {
      throw std::invalid_argument("choice " + std::to_string(i) + " is empty");
    }
    if (!seen.insert(choices_[i]).second) {
      throw std::invalid_argument("duplicate choice text \"" + choices_[i] + "\"");
    }
  }
}

GroupPartition partition_indices(std::size_t num_choices, std::size_t group_size,
                                 std::uint64_t seed) {
  if (group_size == 0) throw std::invalid_argument("group size m must be >= 1");
  if (num_choices == 0) throw std::invalid_argument("cannot partition zero choices");

  std::vector<std::size_t> order(num_choices);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (num_choices > group_size) {
    SplitMix64 rng(seed);
    for (std::size_t i = num_choices - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_below(i + 1));
      std::swap(order[i], order[j]);
    }
  }

  GroupPartition p;
  p.seed = seed;
  p.group_size = group_size;
  p.num_choices = num_choices;
  for (std::size_t start = 0; start < num_choices; start += group_size) {
    const std::size_t end = std::min(num_choices, start + group_size);
    p.groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                          order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return p;
}

GroupPartition partition_choices(const ChoiceSet& choices, std::size_t group_size,
                                 std::uint64_t seed) {
  return partition_indices(choices.size(), group_size, seed);
}

TrialPlan make_trial_plan(const ChoiceSet& choices, std::size_t group_size,
                          std::size_t num_trials, std::uint64_t base_seed) {
  if (num_trials == 0) throw std::invalid_argument("number of trials must be >= 1");
  TrialPlan plan;
  plan.num_trials = num_trials;
  plan.group_size = group_size;
  plan.base_seed = base_seed;
  plan.partitions.reserve(num_trials);
  for (std::size_t t = 0; t < num_trials; ++t) {
    plan.partitions.push_back(partition_choices(choices, group_size, base_seed + t));
  }
  return plan;
}

GroupPartition single_group_partition(std::size_t num_choices) {
  return partition_indices(num_choices, num_choices, 0);
}

void validate_partition(const GroupPartition& p) {
  const std::size_t k = p.num_choices;
  const std::size_t m = p.group_size;
  if (m == 0 || k == 0) throw std::invalid_argument("partition: K and m must be >= 1");
  const std::size_t expected_groups = (k + m - 1) / m;
  if (p.groups.size() != expected_groups) {
    throw std::invalid_argument("partition: " + std::to_string(p.groups.size()) +
                                " groups, expected " + std::to_string(expected_groups));
  }
  std::vector<bool> seen(k, false);
  for (std::size_t g = 0; g < p.groups.size(); ++g) {
    const auto& group = p.groups[g];
    const bool last = g + 1 == p.groups.size();
    if (group.empty() || group.size() > m || (!last && group.size() != m)) {
      throw std::invalid_argument("partition: group " + std::to_string(g) + " has size " +
                                  std::to_string(group.size()));
    }
    for (std::size_t idx : group) {
      if (idx >= k) throw std::invalid_argument("partition: choice index out of range");
      if (seen[idx]) {
        throw std::invalid_argument("partition: choice " + std::to_string(idx) +
                                    " appears twice");
      }
      seen[idx] = true;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!seen[i]) throw std::invalid_argument("partition: choice " + std::to_string(i) + " missing");
  }
}

}  // namespace selfens
