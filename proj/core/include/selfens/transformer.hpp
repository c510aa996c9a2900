#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfens/tokenizer.hpp"

namespace selfens {

struct ModelConfig {
  std::uint32_t vocab_size = 256;
  std::uint32_t embed_dim = 64;
  std::uint32_t num_heads = 4;
  std::uint32_t num_layers = 2;
  std::uint32_t ffn_dim = 256;
  std::uint32_t max_seq_len = 2048;
  double rope_base = 10000.0;

  std::uint32_t head_dim() const { return embed_dim / num_heads; }

  /// Throws std::invalid_argument if any dimension is zero, embed_dim is not
  /// divisible by num_heads, the head dimension is odd (rotary pairs), or
  /// rope_base is not a positive finite number.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Row-major float matrix.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0f) {}

  float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  float& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

struct LayerWeights {
  Tensor query;     // [embed_dim x embed_dim]
  Tensor key;       // [embed_dim x embed_dim]
  Tensor value;     // [embed_dim x embed_dim]
  Tensor output;    // [embed_dim x embed_dim]
  Tensor ffn_in;    // [embed_dim x ffn_dim]
  Tensor ffn_out;   // [ffn_dim x embed_dim]
};

/// All parameters of the engine. Tensor order here is also the order in the
/// SEW1 weights file.
struct ModelWeights {
  ModelConfig config;
  Tensor token_embedding;  // [vocab_size x embed_dim]
  std::vector<LayerWeights> layers;
  Tensor final_norm_gain;  // [1 x embed_dim]
  Tensor final_norm_bias;  // [1 x embed_dim]
  Tensor unembedding;      // [embed_dim x vocab_size]

  /// Checks every shape against config and that all entries are finite.
  void validate() const;

  /// Visits tensors in file order.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    fn(token_embedding);
    for (const auto& l : layers) {
      fn(l.query); fn(l.key); fn(l.value); fn(l.output); fn(l.ffn_in); fn(l.ffn_out);
    }
    fn(final_norm_gain);
    fn(final_norm_bias);
    fn(unembedding);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn(token_embedding);
    for (auto& l : layers) {
      fn(l.query); fn(l.key); fn(l.value); fn(l.output); fn(l.ffn_in); fn(l.ffn_out);
    }
    fn(final_norm_gain);
    fn(final_norm_bias);
    fn(unembedding);
  }
};

/// Weights with every tensor shaped for config and zero-filled.
ModelWeights allocate_weights(const ModelConfig& config);

/// Deterministic initialization. Every matrix entry is drawn uniformly from
/// [-1/sqrt(embed_dim), 1/sqrt(embed_dim)) by a SplitMix64 stream seeded with
/// `seed`, consumed in file order, row-major. The final norm gain is 1 and
/// its bias 0.
ModelWeights init_weights(const ModelConfig& config, std::uint64_t seed);

/// FNV-1a over the little-endian float bytes of every tensor, in file order.
std::uint64_t weights_checksum(const ModelWeights& weights);

class WeightsFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SEW1 format: "SEW1", six little-endian u32 (vocab_size, embed_dim,
/// num_heads, num_layers, ffn_dim, max_seq_len), one f64 rope_base, then all
/// tensors as little-endian f32 in file order.
void save_weights(const ModelWeights& weights, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path);
std::vector<std::byte> serialize_weights(const ModelWeights& weights);
ModelWeights deserialize_weights(std::span<const std::byte> bytes,
                                 const std::string& source_name = "<memory>");

/// Boolean L x L matrix; allowed(i, j) means row i may attend to token j.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(std::size_t length)
      : length_(length), allowed_(length * length, 0) {}

  static AttentionMask causal(std::size_t length);

  std::size_t size() const { return length_; }
  bool allowed(std::size_t i, std::size_t j) const { return allowed_[i * length_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool value) {
    allowed_[i * length_ + j] = value ? 1 : 0;
  }

  /// True iff no entry above the diagonal is set and every diagonal entry is.
  bool is_valid() const;

  bool operator==(const AttentionMask&) const = default;

 private:
  std::size_t length_ = 0;
  std::vector<std::uint8_t> allowed_;
};

/// Position index per token, fed to the rotary encoding in place of the
/// physical index.
struct PositionIndices {
  std::vector<std::uint32_t> values;

  static PositionIndices identity(std::size_t length);
  std::size_t size() const { return values.size(); }
  bool operator==(const PositionIndices&) const = default;
};

/// Row-major [rows x cols] logits.
struct Logits {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * cols, cols);
  }
  std::span<double> row(std::size_t r) { return std::span<double>(values).subspan(r * cols, cols); }
};

/// Anything that maps (tokens, mask, positions) to per-token next-token
/// logits. The transformer is the real implementation; tests plug in stubs.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t max_seq_len() const = 0;
  virtual Logits forward(std::span<const TokenId> tokens, const AttentionMask& mask,
                         const PositionIndices& positions) const = 0;

  /// Standard causal pass with positions 0..L-1.
  Logits forward(std::span<const TokenId> tokens) const;
};

/// Throws std::invalid_argument unless tokens, mask and positions agree in
/// length, the sequence is non-empty and within max_seq_len, token ids are in
/// the vocabulary and positions are below max_seq_len.
void check_forward_inputs(std::span<const TokenId> tokens, const AttentionMask& mask,
                          const PositionIndices& positions, std::size_t vocab_size,
                          std::size_t max_seq_len);

/// Decoder-only transformer: pre-norm blocks (parameter-free layer norm),
/// multi-head attention with rotary position encoding driven by explicit
/// position indices, tanh-GELU feed-forward, no biases, a final affine layer
/// norm and an untied unembedding. Weights are immutable after construction,
/// so one instance may serve concurrent forward calls.
class Transformer final : public LanguageModel {
 public:
  explicit Transformer(ModelWeights weights);

  const ModelConfig& config() const { return weights_.config; }
  const ModelWeights& weights() const { return weights_; }

  std::size_t vocab_size() const override { return weights_.config.vocab_size; }
  std::size_t max_seq_len() const override { return weights_.config.max_seq_len; }

  using LanguageModel::forward;
  Logits forward(std::span<const TokenId> tokens, const AttentionMask& mask,
                 const PositionIndices& positions) const override;

 private:
  ModelWeights weights_;
  std::vector<double> inv_freq_;  // per rotary pair within a head
};

/// Numerically stable softmax (max subtraction). Throws std::invalid_argument
/// on an empty or non-finite row.
std::vector<double> softmax_row(std::span<const double> logits);

}  // namespace selfens
