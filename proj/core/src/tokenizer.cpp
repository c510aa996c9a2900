#include "selfens/tokenizer.hpp"

#include <stdexcept>

namespace selfens {

TokenSequence tokenize(std::string_view text) {
  TokenSequence out;
  out.reserve(text.size());
  for (char c : text) out.push_back(static_cast<unsigned char>(c));
  return out;
}

std::string detokenize(std::span<const TokenId> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) {
    if (t >= kByteVocabSize) {
      throw std::out_of_range("detokenize: token id " + std::to_string(t) +
                              " is not a byte");
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
  }
  return out;
}

TokenId label_token(std::string_view label) {
  if (label.size() != 1) {
    throw std::invalid_argument("label '" + std::string(label) +
                                "' does not map to a single token");
  }
  return static_cast<unsigned char>(label.front());
}

}  // namespace selfens
