#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace selfens {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

/// Byte-level tokenizer: every byte of the UTF-8 input is one token, so the
/// vocabulary needs at least 256 entries and any single-character label is
/// exactly one token.
inline constexpr std::size_t kByteVocabSize = 256;

TokenSequence tokenize(std::string_view text);
std::string detokenize(std::span<const TokenId> tokens);

/// Token id of a one-byte label such as "A". Throws if label is not one byte.
TokenId label_token(std::string_view label);

}  // namespace selfens
