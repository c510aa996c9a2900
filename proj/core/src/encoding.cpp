#include "selfens/encoding.hpp"

#include <cstdint>
#include <stdexcept>

namespace selfens {

namespace {

constexpr std::string_view kQuestionSlot = "{q}";
constexpr std::string_view kLabelSlot = "{label}";
constexpr std::string_view kChoiceSlot = "{choice}";

// Single left-to-right pass so substituted text is never re-scanned.
std::string substitute(std::string_view pattern, std::string_view slot_a, std::string_view value_a,
                       std::string_view slot_b = {}, std::string_view value_b = {}) {
  std::string out;
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern.substr(i).starts_with(slot_a)) {
      out += value_a;
      i += slot_a.size();
    } else if (!slot_b.empty() && pattern.substr(i).starts_with(slot_b)) {
      out += value_b;
      i += slot_b.size();
    } else {
      out += pattern[i++];
    }
  }
  return out;
}

}  // namespace

PromptTemplate::PromptTemplate() : PromptTemplate(parse("Question: {q}\n{label}) {choice}\nAnswer:")) {}

PromptTemplate PromptTemplate::parse(std::string_view text) {
  const auto q = text.find(kQuestionSlot);
  const auto label = text.find(kLabelSlot);
  const auto choice = text.find(kChoiceSlot);
  if (q == std::string_view::npos || label == std::string_view::npos ||
      choice == std::string_view::npos) {
    throw std::invalid_argument("prompt template needs {q}, {label} and {choice} placeholders");
  }
  if (!(q < label && label < choice)) {
    throw std::invalid_argument("prompt template placeholders must appear as {q}, {label}, {choice}");
  }
  const auto newline = text.find('\n', choice + kChoiceSlot.size());
  if (newline == std::string_view::npos) {
    throw std::invalid_argument("prompt template needs a newline ending the choice line");
  }
  if (newline + 1 == text.size()) {
    throw std::invalid_argument("prompt template needs a non-empty answer cue");
  }
  return PromptTemplate(std::string(text.substr(0, label)),
                        std::string(text.substr(label, newline + 1 - label)),
                        std::string(text.substr(newline + 1)));
}

std::string_view PromptTemplate::choice_delimiter() const {
  const std::string_view line = choice_line_;
  return line.substr(line.find(kChoiceSlot) + kChoiceSlot.size());
}

std::string PromptTemplate::render_question(std::string_view question) const {
  return substitute(question_block_, kQuestionSlot, question);
}

std::string PromptTemplate::render_choice(std::string_view label, std::string_view choice) const {
  return substitute(choice_line_, kLabelSlot, label, kChoiceSlot, choice);
}

std::string group_label(std::size_t i) {
  if (i >= kMaxGroupLabels) throw std::invalid_argument("group larger than 26 choices");
  return std::string(1, static_cast<char>('A' + i));
}

RenderedPrompt render_groups(std::string_view question, const std::vector<ChoiceGroup>& groups,
                             const ChoiceSet& choices, const PromptTemplate& tmpl) {
  const std::string_view delim = tmpl.choice_delimiter();
  RenderedPrompt p;
  p.full_text = tmpl.render_question(question);
  p.question_span = {0, tokenize(p.full_text).size()};

  for (const ChoiceGroup& group : groups) {
    if (group.empty()) throw std::invalid_argument("render: empty group");
    if (group.size() > kMaxGroupLabels) {
      throw std::invalid_argument("render: group of " + std::to_string(group.size()) +
                                  " choices exceeds the 26-label alphabet");
    }
    std::string block;
    std::vector<TokenId> labels;
    for (std::size_t local = 0; local < group.size(); ++local) {
      const std::size_t idx = group[local];
      if (idx >= choices.size()) throw std::invalid_argument("render: choice index out of range");
      const std::string& text = choices[idx];
      if (!delim.empty() && text.find(delim) != std::string::npos) {
        throw std::invalid_argument("render: choice \"" + text +
                                    "\" contains the template delimiter");
      }
      const std::string label = group_label(local);
      labels.push_back(label_token(label));
      block += tmpl.render_choice(label, text);
    }
    block += tmpl.answer_cue();
    const std::size_t begin =
        p.group_spans.empty() ? p.question_span.end : p.group_spans.back().end;
    const TokenSpan span{begin, begin + tokenize(block).size()};
    p.full_text += block;
    p.group_spans.push_back(span);
    p.group_choices.push_back(group);
    p.label_token_ids.push_back(std::move(labels));
  }
  p.tokens = tokenize(p.full_text);
  p.group_end_indices = group_end_indices(p);
  return p;
}

RenderedPrompt render_prompt(std::string_view question, const GroupPartition& partition,
                             const ChoiceSet& choices, const PromptTemplate& tmpl) {
  if (partition.num_choices != choices.size()) {
    throw std::invalid_argument("render: partition does not match the choice set");
  }
  validate_partition(partition);
  return render_groups(question, partition.groups, choices, tmpl);
}

AttentionMask build_attention_mask(const RenderedPrompt& prompt) {
  const std::size_t n = prompt.size();
  AttentionMask mask(n);
  // Group id per token; question tokens get none.
  std::vector<std::size_t> owner(n, SIZE_MAX);
  for (std::size_t g = 0; g < prompt.group_spans.size(); ++g)
    for (std::size_t t = prompt.group_spans[g].begin; t < prompt.group_spans[g].end; ++t)
      owner[t] = g;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const bool in_question = prompt.question_span.contains(j);
      mask.set(i, j, in_question || owner[i] == owner[j]);
    }
  }
  return mask;
}

PositionIndices build_position_indices(const RenderedPrompt& prompt) {
  PositionIndices pos = PositionIndices::identity(prompt.size());
  std::size_t preceding = 0;
  for (const TokenSpan& span : prompt.group_spans) {
    for (std::size_t i = span.begin; i < span.end; ++i) {
      pos.values[i] = static_cast<std::uint32_t>(i - preceding);
    }
    preceding += span.size();
  }
  return pos;
}

std::vector<std::size_t> group_end_indices(const RenderedPrompt& prompt) {
  std::vector<std::size_t> ends;
  std::size_t cumulative = prompt.question_span.size();
  for (const TokenSpan& span : prompt.group_spans) {
    cumulative += span.size();
    ends.push_back(cumulative - 1);
  }
  return ends;
}

EncodingPlan build_encoding_plan(const RenderedPrompt& prompt, EncodingOptions options) {
  return EncodingPlan{
      options.group_mask ? build_attention_mask(prompt) : AttentionMask::causal(prompt.size()),
      options.reencode_positions ? build_position_indices(prompt)
                                 : PositionIndices::identity(prompt.size())};
}

}  // namespace selfens
