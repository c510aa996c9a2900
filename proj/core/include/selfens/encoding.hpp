#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "selfens/grouping.hpp"
#include "selfens/tokenizer.hpp"
#include "selfens/transformer.hpp"

namespace selfens {

/// Half-open token range [begin, end).
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  std::size_t last() const { return end - 1; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const TokenSpan&) const = default;
};

/// Prompt layout with {q}, {label} and {choice} placeholders. A prompt is
/// the question block once, then for each group its choice lines followed by
/// the answer cue. The default renders
///
///   Question: <q>\nA) <choice>\nB) <choice>\nAnswer:
class PromptTemplate {
 public:
  PromptTemplate();

  /// Splits a one-line template such as "Question: {q}\n{label}) {choice}\nAnswer:".
  /// Everything before {label} is the question block; from {label} through
  /// the first newline after {choice} is the choice line; the remainder is
  /// the answer cue. Throws std::invalid_argument on a malformed template.
  static PromptTemplate parse(std::string_view text);

  const std::string& question_block() const { return question_block_; }
  const std::string& choice_line() const { return choice_line_; }
  const std::string& answer_cue() const { return answer_cue_; }

  /// Text that terminates a choice line; choices may not contain it.
  std::string_view choice_delimiter() const;

  std::string render_question(std::string_view question) const;
  std::string render_choice(std::string_view label, std::string_view choice) const;

 private:
  PromptTemplate(std::string question_block, std::string choice_line, std::string answer_cue)
      : question_block_(std::move(question_block)),
        choice_line_(std::move(choice_line)),
        answer_cue_(std::move(answer_cue)) {}

  std::string question_block_;
  std::string choice_line_;
  std::string answer_cue_;
};

inline constexpr std::size_t kMaxGroupLabels = 26;

/// Local label for position `i` inside a group: "A", "B", ...
std::string group_label(std::size_t i);

/// A question plus one partition's groups concatenated into one sequence.
struct RenderedPrompt {
  std::string full_text;
  TokenSequence tokens;
  TokenSpan question_span;
  std::vector<TokenSpan> group_spans;
  std::vector<ChoiceGroup> group_choices;              // global choice indices per group
  std::vector<std::vector<TokenId>> label_token_ids;   // per group, label token per member
  std::vector<std::size_t> group_end_indices;          // last token of each group

  std::size_t size() const { return tokens.size(); }
};

/// Renders [Q, G1, G2, ...]. Within each group, choices keep their partition
/// order and are relabelled A, B, ... Throws std::invalid_argument if a
/// choice contains the template's choice delimiter or a group exceeds 26.
RenderedPrompt render_prompt(std::string_view question, const GroupPartition& partition,
                             const ChoiceSet& choices, const PromptTemplate& tmpl);

/// Same as render_prompt for an arbitrary list of groups (they need not
/// cover every choice). Used to build the standalone [Q, Gj] prompts.
RenderedPrompt render_groups(std::string_view question, const std::vector<ChoiceGroup>& groups,
                             const ChoiceSet& choices, const PromptTemplate& tmpl);

/// Allowed(i, j) iff j <= i and (j is a question token or i and j are in the
/// same group).
AttentionMask build_attention_mask(const RenderedPrompt& prompt);

/// Question token i keeps position i; a token of group n at physical index i
/// gets i minus the token lengths of groups before n, so every group starts
/// at |Tk(Q)|.
PositionIndices build_position_indices(const RenderedPrompt& prompt);

/// Physical index of the last token of each group:
/// |Tk(Q)| + sum_{k<=j} |Tk(G_k)| - 1.
std::vector<std::size_t> group_end_indices(const RenderedPrompt& prompt);

/// Toggles for the ablation arms. Turning either off reproduces the
/// "without attention mask" and "without positional re-encoding" variants.
struct EncodingOptions {
  bool group_mask = true;
  bool reencode_positions = true;
};

struct EncodingPlan {
  AttentionMask mask;
  PositionIndices positions;
};

EncodingPlan build_encoding_plan(const RenderedPrompt& prompt, EncodingOptions options = {});

}  // namespace selfens
