#include "selfens/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "selfens/rng.hpp"

namespace selfens {

namespace {

constexpr double kNormEps = 1e-5;

// out[r, :] = a[r, :] * w for every row r. Each output row depends only on
// its own input row, so results do not change with the number of rows.
void matmul(const std::vector<double>& a, std::size_t rows, const Tensor& w,
            std::vector<double>& out) {
  const std::size_t inner = w.rows;
  const std::size_t cols = w.cols;
  out.assign(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in_row = a.data() + r * inner;
    double* out_row = out.data() + r * cols;
    for (std::size_t k = 0; k < inner; ++k) {
      const double s = in_row[k];
      const float* w_row = w.values.data() + k * cols;
      for (std::size_t c = 0; c < cols; ++c) out_row[c] += s * static_cast<double>(w_row[c]);
    }
  }
}

void normalize_rows(const std::vector<double>& x, std::size_t rows, std::size_t dim,
                    std::vector<double>& out) {
  out.resize(rows * dim);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * dim;
    double mean = 0.0;
    for (std::size_t c = 0; c < dim; ++c) mean += in[c];
    mean /= static_cast<double>(dim);
    double var = 0.0;
    for (std::size_t c = 0; c < dim; ++c) var += (in[c] - mean) * (in[c] - mean);
    var /= static_cast<double>(dim);
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    double* o = out.data() + r * dim;
    for (std::size_t c = 0; c < dim; ++c) o[c] = (in[c] - mean) * inv;
  }
}

double gelu(double x) {
  constexpr double kSqrt2OverPi = 0.7978845608028654;
  return 0.5 * x * (1.0 + std::tanh(kSqrt2OverPi * (x + 0.044715 * x * x * x)));
}

void apply_rotary(std::vector<double>& qk, std::size_t rows, const ModelConfig& cfg,
                  const std::vector<double>& inv_freq, const PositionIndices& positions) {
  const std::size_t hd = cfg.head_dim();
  for (std::size_t r = 0; r < rows; ++r) {
    const double pos = static_cast<double>(positions.values[r]);
    for (std::size_t h = 0; h < cfg.num_heads; ++h) {
      double* v = qk.data() + r * cfg.embed_dim + h * hd;
      for (std::size_t p = 0; p < hd / 2; ++p) {
        const double angle = pos * inv_freq[p];
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double x0 = v[2 * p];
        const double x1 = v[2 * p + 1];
        v[2 * p] = x0 * c - x1 * s;
        v[2 * p + 1] = x0 * s + x1 * c;
      }
    }
  }
}

void check_shape(const Tensor& t, std::size_t rows, std::size_t cols, const char* name) {
  if (t.rows != rows || t.cols != cols || t.values.size() != rows * cols) {
    throw std::invalid_argument(std::string("weights: tensor ") + name + " has shape " +
                                std::to_string(t.rows) + "x" + std::to_string(t.cols) +
                                ", expected " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
  for (float v : t.values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string("weights: tensor ") + name +
                                  " has a non-finite entry");
    }
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size == 0 || embed_dim == 0 || num_heads == 0 || num_layers == 0 || ffn_dim == 0 ||
      max_seq_len == 0) {
    throw std::invalid_argument("model config: all dimensions must be >= 1");
  }
  if (embed_dim % num_heads != 0) {
    throw std::invalid_argument("model config: embed_dim must be divisible by num_heads");
  }
  if (head_dim() % 2 != 0) {
    throw std::invalid_argument("model config: head dimension must be even for rotary pairs");
  }
  if (!(rope_base > 0.0) || !std::isfinite(rope_base)) {
    throw std::invalid_argument("model config: rope_base must be positive and finite");
  }
}

void ModelWeights::validate() const {
  config.validate();
  const std::size_t d = config.embed_dim;
  check_shape(token_embedding, config.vocab_size, d, "token_embedding");
  if (layers.size() != config.num_layers) {
    throw std::invalid_argument("weights: layer count does not match config");
  }
  for (const auto& l : layers) {
    check_shape(l.query, d, d, "query");
    check_shape(l.key, d, d, "key");
    check_shape(l.value, d, d, "value");
    check_shape(l.output, d, d, "output");
    check_shape(l.ffn_in, d, config.ffn_dim, "ffn_in");
    check_shape(l.ffn_out, config.ffn_dim, d, "ffn_out");
  }
  check_shape(final_norm_gain, 1, d, "final_norm_gain");
  check_shape(final_norm_bias, 1, d, "final_norm_bias");
  check_shape(unembedding, d, config.vocab_size, "unembedding");
}

ModelWeights allocate_weights(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.embed_dim;
  ModelWeights w;
  w.config = config;
  w.token_embedding = Tensor(config.vocab_size, d);
  w.layers.resize(config.num_layers);
  for (auto& l : w.layers) {
    l.query = Tensor(d, d);
    l.key = Tensor(d, d);
    l.value = Tensor(d, d);
    l.output = Tensor(d, d);
    l.ffn_in = Tensor(d, config.ffn_dim);
    l.ffn_out = Tensor(config.ffn_dim, d);
  }
  w.final_norm_gain = Tensor(1, d);
  w.final_norm_bias = Tensor(1, d);
  w.unembedding = Tensor(d, config.vocab_size);
  return w;
}

ModelWeights init_weights(const ModelConfig& config, std::uint64_t seed) {
  ModelWeights w = allocate_weights(config);
  SplitMix64 rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.embed_dim));
  auto fill = [&](Tensor& t) {
    for (float& v : t.values) v = static_cast<float>(rng.uniform(-scale, scale));
  };
  fill(w.token_embedding);
  for (auto& l : w.layers) {
    fill(l.query);
    fill(l.key);
    fill(l.value);
    fill(l.output);
    fill(l.ffn_in);
    fill(l.ffn_out);
  }
  std::fill(w.final_norm_gain.values.begin(), w.final_norm_gain.values.end(), 1.0f);
  fill(w.unembedding);
  return w;
}

AttentionMask AttentionMask::causal(std::size_t length) {
  AttentionMask m(length);
  for (std::size_t i = 0; i < length; ++i)
    for (std::size_t j = 0; j <= i; ++j) m.set(i, j, true);
  return m;
}

bool AttentionMask::is_valid() const {
  for (std::size_t i = 0; i < length_; ++i) {
    if (!allowed(i, i)) return false;
    for (std::size_t j = i + 1; j < length_; ++j)
      if (allowed(i, j)) return false;
  }
  return true;
}

PositionIndices PositionIndices::identity(std::size_t length) {
  PositionIndices p;
  p.values.resize(length);
  for (std::size_t i = 0; i < length; ++i) p.values[i] = static_cast<std::uint32_t>(i);
  return p;
}

Logits LanguageModel::forward(std::span<const TokenId> tokens) const {
  return forward(tokens, AttentionMask::causal(tokens.size()),
                 PositionIndices::identity(tokens.size()));
}

void check_forward_inputs(std::span<const TokenId> tokens, const AttentionMask& mask,
                          const PositionIndices& positions, std::size_t vocab_size,
                          std::size_t max_seq_len) {
  const std::size_t n = tokens.size();
  if (n == 0) throw std::invalid_argument("forward: empty token sequence");
  if (mask.size() != n || positions.size() != n) {
    throw std::invalid_argument("forward: length mismatch (tokens " + std::to_string(n) +
                                ", mask " + std::to_string(mask.size()) + ", positions " +
                                std::to_string(positions.size()) + ")");
  }
  if (n > max_seq_len) {
    throw std::invalid_argument("forward: sequence length " + std::to_string(n) +
                                " exceeds max_seq_len " + std::to_string(max_seq_len));
  }
  for (TokenId t : tokens) {
    if (t >= vocab_size) {
      throw std::invalid_argument("forward: token id " + std::to_string(t) +
                                  " outside vocabulary");
    }
  }
  for (std::uint32_t p : positions.values) {
    if (p >= max_seq_len) {
      throw std::invalid_argument("forward: position index " + std::to_string(p) +
                                  " exceeds max_seq_len");
    }
  }
  if (!mask.is_valid()) {
    throw std::invalid_argument("forward: mask must be causal with a full diagonal");
  }
}

Transformer::Transformer(ModelWeights weights) : weights_(std::move(weights)) {
  weights_.validate();
  const auto& cfg = weights_.config;
  const std::size_t hd = cfg.head_dim();
  inv_freq_.resize(hd / 2);
  for (std::size_t p = 0; p < hd / 2; ++p) {
    inv_freq_[p] =
        std::pow(cfg.rope_base, -2.0 * static_cast<double>(p) / static_cast<double>(hd));
  }
}

Logits Transformer::forward(std::span<const TokenId> tokens, const AttentionMask& mask,
                            const PositionIndices& positions) const {
  const ModelConfig& cfg = weights_.config;
  check_forward_inputs(tokens, mask, positions, cfg.vocab_size, cfg.max_seq_len);

  const std::size_t n = tokens.size();
  const std::size_t d = cfg.embed_dim;
  const std::size_t hd = cfg.head_dim();
  const double score_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const double neg_inf = -std::numeric_limits<double>::infinity();

  std::vector<double> x(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c)
      x[i * d + c] = weights_.token_embedding.at(tokens[i], c);

  std::vector<double> h, q, k, v, attn(n * d), proj, ff;
  std::vector<double> scores(n);

  for (const LayerWeights& layer : weights_.layers) {
    normalize_rows(x, n, d, h);
    matmul(h, n, layer.query, q);
    matmul(h, n, layer.key, k);
    matmul(h, n, layer.value, v);
    apply_rotary(q, n, cfg, inv_freq_, positions);
    apply_rotary(k, n, cfg, inv_freq_, positions);

    std::fill(attn.begin(), attn.end(), 0.0);
    for (std::size_t head = 0; head < cfg.num_heads; ++head) {
      const std::size_t off = head * hd;
      for (std::size_t i = 0; i < n; ++i) {
        const double* qi = q.data() + i * d + off;
        double max_score = neg_inf;
        for (std::size_t j = 0; j <= i; ++j) {
          if (!mask.allowed(i, j)) {
            scores[j] = neg_inf;
            continue;
          }
          const double* kj = k.data() + j * d + off;
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) s += qi[c] * kj[c];
          scores[j] = s * score_scale;
          max_score = std::max(max_score, scores[j]);
        }
        double denom = 0.0;
        double* out = attn.data() + i * d + off;
        for (std::size_t j = 0; j <= i; ++j) {
          if (!mask.allowed(i, j)) continue;
          const double w = std::exp(scores[j] - max_score);
          denom += w;
          const double* vj = v.data() + j * d + off;
          for (std::size_t c = 0; c < hd; ++c) out[c] += w * vj[c];
        }
        for (std::size_t c = 0; c < hd; ++c) out[c] /= denom;
      }
    }
    matmul(attn, n, layer.output, proj);
    for (std::size_t t = 0; t < n * d; ++t) x[t] += proj[t];

    normalize_rows(x, n, d, h);
    matmul(h, n, layer.ffn_in, ff);
    for (double& f : ff) f = gelu(f);
    matmul(ff, n, layer.ffn_out, proj);
    for (std::size_t t = 0; t < n * d; ++t) x[t] += proj[t];
  }

  normalize_rows(x, n, d, h);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      h[i * d + c] = h[i * d + c] * static_cast<double>(weights_.final_norm_gain.values[c]) +
                     static_cast<double>(weights_.final_norm_bias.values[c]);
    }
  }

  Logits logits;
  logits.rows = n;
  logits.cols = cfg.vocab_size;
  matmul(h, n, weights_.unembedding, logits.values);
  return logits;
}

std::vector<double> softmax_row(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax_row: empty row");
  double max_logit = logits.front();
  for (double l : logits) {
    if (!std::isfinite(l)) throw std::invalid_argument("softmax_row: non-finite logit");
    max_logit = std::max(max_logit, l);
  }
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_logit);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

}  // namespace selfens
