#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "selfens/rng.hpp"
#include "selfens/transformer.hpp"

namespace selfens {

namespace {

constexpr char kMagic[4] = {'S', 'E', 'W', '1'};
constexpr std::size_t kHeaderBytes = 4 + 6 * 4 + 8;

template <typename T>
void put_le(std::vector<std::byte>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::byte>((bits >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(std::span<const std::byte> in, std::size_t& offset) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(std::to_integer<std::uint8_t>(in[offset + i])) << (8 * i);
  }
  offset += sizeof(U);
  return std::bit_cast<T>(bits);
}

std::size_t tensor_floats(const ModelConfig& c) {
  const std::size_t d = c.embed_dim;
  const std::size_t per_layer = 4 * d * d + 2 * d * c.ffn_dim;
  return static_cast<std::size_t>(c.vocab_size) * d + c.num_layers * per_layer + 2 * d +
         d * c.vocab_size;
}

}  // namespace

std::vector<std::byte> serialize_weights(const ModelWeights& weights) {
  weights.validate();
  const ModelConfig& c = weights.config;
  std::vector<std::byte> out;
  out.reserve(kHeaderBytes + 4 * tensor_floats(c));
  for (char m : kMagic) out.push_back(static_cast<std::byte>(m));
  for (std::uint32_t v : {c.vocab_size, c.embed_dim, c.num_heads, c.num_layers, c.ffn_dim,
                          c.max_seq_len}) {
    put_le(out, v);
  }
  put_le(out, c.rope_base);
  weights.for_each_tensor([&](const Tensor& t) {
    for (float v : t.values) put_le(out, v);
  });
  return out;
}

ModelWeights deserialize_weights(std::span<const std::byte> bytes,
                                 const std::string& source_name) {
  if (bytes.size() < kHeaderBytes) {
    throw WeightsFormatError(source_name + ": truncated weights header");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw WeightsFormatError(source_name + ": bad magic (expected SEW1)");
  }
  std::size_t offset = 4;
  ModelConfig c;
  c.vocab_size = get_le<std::uint32_t>(bytes, offset);
  c.embed_dim = get_le<std::uint32_t>(bytes, offset);
  c.num_heads = get_le<std::uint32_t>(bytes, offset);
  c.num_layers = get_le<std::uint32_t>(bytes, offset);
  c.ffn_dim = get_le<std::uint32_t>(bytes, offset);
  c.max_seq_len = get_le<std::uint32_t>(bytes, offset);
  c.rope_base = get_le<double>(bytes, offset);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw WeightsFormatError(source_name + ": " + e.what());
  }
  const std::size_t expected = kHeaderBytes + 4 * tensor_floats(c);
  if (bytes.size() != expected) {
    throw WeightsFormatError(source_name + ": expected " + std::to_string(expected) +
                             " bytes, found " + std::to_string(bytes.size()));
  }
  ModelWeights w = allocate_weights(c);
  w.for_each_tensor([&](Tensor& t) {
    for (float& v : t.values) v = get_le<float>(bytes, offset);
  });
  try {
    w.validate();
  } catch (const std::invalid_argument& e) {
    throw WeightsFormatError(source_name + ": " + e.what());
  }
  return w;
}

void save_weights(const ModelWeights& weights, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(weights);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightsFormatError(path.string() + ": cannot open weights file");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_weights(std::as_bytes(std::span(raw.data(), raw.size())), path.string());
}

std::uint64_t weights_checksum(const ModelWeights& weights) {
  std::vector<std::byte> buf;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  weights.for_each_tensor([&](const Tensor& t) {
    buf.clear();
    for (float v : t.values) put_le(buf, v);
    h = fnv1a64(buf, h);
  });
  return h;
}

}  // namespace selfens
