#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "seb/errors.hpp"
#include "seb/mapping.hpp"
#include "seb/matrix.hpp"
#include "seb/rng.hpp"
#include "seb/serialize.hpp"

namespace seb {

// The four embedding schemes under comparison:
//   Subword       — one learned row per subword id (the leaky baseline).
//   SebAddReal    — byte rows summed per subword, then a 2-layer FFN.
//   SebConcatReal — byte rows concatenated in byte order, then the FFN.
//   SebConcatOneHot — one-hot byte vectors concatenated, then the FFN;
//                     computed by gathering FFN first-layer rows.
enum class Variant { kSubword, kSebAddReal, kSebConcatReal, kSebConcatOneHot };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kSubword: return "subword";
    case Variant::kSebAddReal: return "seb_ar";
    case Variant::kSebConcatReal: return "seb_cr";
    case Variant::kSebConcatOneHot: return "seb_co";
  }
  throw Error("unknown variant");
}

inline Variant variant_from_name(const std::string& name) {
  if (name == "subword") return Variant::kSubword;
  if (name == "seb_ar") return Variant::kSebAddReal;
  if (name == "seb_cr") return Variant::kSebConcatReal;
  if (name == "seb_co") return Variant::kSebConcatOneHot;
  throw ConfigError("unknown embedding variant: " + name);
}

inline bool is_seb_variant(Variant v) { return v != Variant::kSubword; }

struct EmbeddingDims {
  int byte_embed = 512;       // d:  width of one real-valued byte row
  int hidden = 1024;          // h:  FFN hidden width
  int output = 512;           // d': subword embedding width
  int bytes_per_subword = 8;  // n
  int byte_vocab = 256;       // V_b
};

// Width of the FFN input per variant. Zero for the subword baseline,
// which has no FFN.
inline int ffn_input_dim(Variant variant, const EmbeddingDims& dims) {
  switch (variant) {
    case Variant::kSubword: return 0;
    case Variant::kSebAddReal: return dims.byte_embed;
    case Variant::kSebConcatReal:
      return dims.bytes_per_subword * dims.byte_embed;
    case Variant::kSebConcatOneHot:
      return dims.bytes_per_subword * dims.byte_vocab;
  }
  throw Error("unknown variant");
}

// Parameters of one embedding scheme. Doubles throughout: the point of
// this code is auditable gradients, not speed. The same struct doubles as
// the gradient container (see zero_like) since gradient shapes mirror
// parameter shapes exactly.
struct EmbeddingParams {
  Variant variant = Variant::kSubword;
  EmbeddingDims dims;
  int vocab_size = 0;  // V_w
  bool has_biases = false;

  Matrix subword;          // V_w x d'   (Subword only)
  Matrix byte;             // V_b x d    (SebAddReal / SebConcatReal)
  Matrix w1;               // in_dim x h (SEB variants)
  Matrix w2;               // h x d'     (SEB variants)
  std::vector<double> b1;  // h   (when has_biases)
  std::vector<double> b2;  // d'  (when has_biases)
};

inline void validate_dims(Variant variant, const EmbeddingDims& dims,
                          int vocab_size) {
  if (vocab_size < 1) throw ConfigError("vocab size must be >= 1");
  if (dims.output < 1) throw ConfigError("output width must be >= 1");
  if (variant == Variant::kSubword) return;
  if (dims.hidden < 1) throw ConfigError("hidden width must be >= 1");
  if (dims.bytes_per_subword < 1)
    throw ConfigError("bytes per subword must be >= 1");
  if (dims.byte_vocab < 2 || dims.byte_vocab > 256)
    throw ConfigError("byte vocab size must be in [2, 256]");
  if (variant != Variant::kSebConcatOneHot && dims.byte_embed < 1)
    throw ConfigError("byte embedding width must be >= 1");
}

// All entries i.i.d. uniform in [-scale, +scale]; biases start at zero.
inline EmbeddingParams init_params(Variant variant, const EmbeddingDims& dims,
                                   int vocab_size, std::uint64_t seed,
                                   double scale, bool with_biases = false) {
  validate_dims(variant, dims, vocab_size);
  EmbeddingParams p;
  p.variant = variant;
  p.dims = dims;
  p.vocab_size = vocab_size;
  p.has_biases = with_biases && is_seb_variant(variant);

  SplitMix64 rng(derive_seed(seed, Stream::kParamInit));
  auto fill_uniform = [&](Matrix& m, std::size_t rows, std::size_t cols) {
    m = Matrix(rows, cols);
    for (double& x : m.data) x = rng.next_uniform(-scale, scale);
  };

  if (variant == Variant::kSubword) {
    fill_uniform(p.subword, static_cast<std::size_t>(vocab_size),
                 static_cast<std::size_t>(dims.output));
    return p;
  }
  if (variant != Variant::kSebConcatOneHot)
    fill_uniform(p.byte, static_cast<std::size_t>(dims.byte_vocab),
                 static_cast<std::size_t>(dims.byte_embed));
  fill_uniform(p.w1, static_cast<std::size_t>(ffn_input_dim(variant, dims)),
               static_cast<std::size_t>(dims.hidden));
  fill_uniform(p.w2, static_cast<std::size_t>(dims.hidden),
               static_cast<std::size_t>(dims.output));
  if (p.has_biases) {
    p.b1.assign(static_cast<std::size_t>(dims.hidden), 0.0);
    p.b2.assign(static_cast<std::size_t>(dims.output), 0.0);
  }
  return p;
}

// Same shapes, all entries zero — the natural gradient container.
inline EmbeddingParams zero_like(const EmbeddingParams& p) {
  EmbeddingParams z = p;
  z.subword.fill(0.0);
  z.byte.fill(0.0);
  z.w1.fill(0.0);
  z.w2.fill(0.0);
  std::fill(z.b1.begin(), z.b1.end(), 0.0);
  std::fill(z.b2.begin(), z.b2.end(), 0.0);
  return z;
}

inline std::size_t num_scalars(const EmbeddingParams& p) {
  return p.subword.data.size() + p.byte.data.size() + p.w1.data.size() +
         p.w2.data.size() + p.b1.size() + p.b2.size();
}

inline bool all_finite(const EmbeddingParams& p) {
  return all_finite(p.subword) && all_finite(p.byte) && all_finite(p.w1) &&
         all_finite(p.w2) && all_finite(p.b1) && all_finite(p.b2);
}

// dst += src * factor over every tensor.
inline void add_scaled(EmbeddingParams& dst, const EmbeddingParams& src,
                       double factor) {
  add_scaled(dst.subword, src.subword, factor);
  add_scaled(dst.byte, src.byte, factor);
  add_scaled(dst.w1, src.w1, factor);
  add_scaled(dst.w2, src.w2, factor);
  add_scaled(dst.b1, src.b1, factor);
  add_scaled(dst.b2, src.b2, factor);
}

inline void scale_params(EmbeddingParams& p, double factor) {
  for (double& x : p.subword.data) x *= factor;
  for (double& x : p.byte.data) x *= factor;
  for (double& x : p.w1.data) x *= factor;
  for (double& x : p.w2.data) x *= factor;
  for (double& x : p.b1) x *= factor;
  for (double& x : p.b2) x *= factor;
}

inline double squared_norm(const EmbeddingParams& p) {
  double s = squared_norm(p.subword.data) + squared_norm(p.byte.data) +
             squared_norm(p.w1.data) + squared_norm(p.w2.data) +
             squared_norm(p.b1) + squared_norm(p.b2);
  return s;
}

// Number of learned scalars, by formula. With the default no-bias setting
// this matches the literal scalar count of init_params output.
inline std::int64_t param_count(Variant variant, const EmbeddingDims& dims,
                                int vocab_size, bool include_biases) {
  const std::int64_t d = dims.byte_embed;
  const std::int64_t h = dims.hidden;
  const std::int64_t out = dims.output;
  const std::int64_t n = dims.bytes_per_subword;
  const std::int64_t vb = dims.byte_vocab;
  std::int64_t count = 0;
  switch (variant) {
    case Variant::kSubword:
      return static_cast<std::int64_t>(vocab_size) * out;
    case Variant::kSebAddReal:
      count = vb * d + d * h + h * out;
      break;
    case Variant::kSebConcatReal:
      count = vb * d + n * d * h + h * out;
      break;
    case Variant::kSebConcatOneHot:
      count = n * vb * h + h * out;
      break;
  }
  if (include_biases) count += h + out;
  return count;
}

// Intermediates needed by the backward pass. For the subword baseline only
// the ids matter; SEB variants also keep the FFN input (except the one-hot
// variant, whose input is implied by the mapping) and the pre-activation.
struct EmbedCache {
  Variant variant = Variant::kSubword;
  std::vector<int> ids;
  Matrix x;       // m x in_dim FFN input (SebAddReal / SebConcatReal)
  Matrix z;       // m x h pre-activation
  Matrix hidden;  // m x h after the activation
};

inline void check_forward_inputs(const std::vector<int>& ids,
                                 const ByteMapping* mapping,
                                 const EmbeddingParams& params) {
  if (params.variant == Variant::kSubword) {
    for (int id : ids)
      if (id < 0 || id >= params.vocab_size)
        throw Error("subword id out of range");
    return;
  }
  if (mapping == nullptr)
    throw ConfigError("SEB variants require a byte mapping");
  if (mapping->byte_vocab_size != params.dims.byte_vocab ||
      mapping->bytes_per_subword != params.dims.bytes_per_subword ||
      mapping->vocab_size != params.vocab_size)
    throw ConfigError("mapping dimensions disagree with embedding params");
  for (int id : ids)
    if (id < 0 || id >= mapping->vocab_size)
      throw Error("subword id out of range");
}

// Rectifier activation, applied elementwise between the two FFN layers.
inline double activate(double x) { return x > 0.0 ? x : 0.0; }
inline double activate_grad(double pre) { return pre > 0.0 ? 1.0 : 0.0; }

// Maps m subword ids to an m x d' embedding matrix. The cache (optional)
// records what the backward pass needs.
inline Matrix embed_forward(const std::vector<int>& ids,
                            const ByteMapping* mapping,
                            const EmbeddingParams& params,
                            EmbedCache* cache = nullptr) {
  check_forward_inputs(ids, mapping, params);
  const std::size_t m = ids.size();
  const std::size_t out = static_cast<std::size_t>(params.dims.output);
  if (cache) {
    *cache = EmbedCache{};
    cache->variant = params.variant;
    cache->ids = ids;
  }

  if (params.variant == Variant::kSubword) {
    Matrix e(m, out);
    for (std::size_t i = 0; i < m; ++i) {
      auto src = params.subword.row(static_cast<std::size_t>(ids[i]));
      std::copy(src.begin(), src.end(), e.row(i).begin());
    }
    return e;
  }

  const std::size_t h = static_cast<std::size_t>(params.dims.hidden);
  const std::size_t n =
      static_cast<std::size_t>(params.dims.bytes_per_subword);
  const std::size_t d = static_cast<std::size_t>(params.dims.byte_embed);
  const std::size_t vb = static_cast<std::size_t>(params.dims.byte_vocab);

  Matrix z(m, h);
  Matrix x;  // only populated for the real-valued variants
  if (params.variant == Variant::kSebConcatOneHot) {
    // One-hot input times W1 is a gather: row j*V_b + b_ij of W1 per byte.
    for (std::size_t i = 0; i < m; ++i) {
      auto row = mapping->row(ids[i]);
      auto zi = z.row(i);
      for (std::size_t j = 0; j < n; ++j) {
        auto w1_row = params.w1.row(j * vb + row[j]);
        for (std::size_t k = 0; k < h; ++k) zi[k] += w1_row[k];
      }
    }
  } else {
    const std::size_t in_dim =
        static_cast<std::size_t>(ffn_input_dim(params.variant, params.dims));
    x = Matrix(m, in_dim);
    for (std::size_t i = 0; i < m; ++i) {
      auto row = mapping->row(ids[i]);
      auto xi = x.row(i);
      if (params.variant == Variant::kSebAddReal) {
        for (std::size_t j = 0; j < n; ++j) {
          auto b_row = params.byte.row(row[j]);
          for (std::size_t k = 0; k < d; ++k) xi[k] += b_row[k];
        }
      } else {  // SebConcatReal: byte rows side by side, byte order
        for (std::size_t j = 0; j < n; ++j) {
          auto b_row = params.byte.row(row[j]);
          std::copy(b_row.begin(), b_row.end(), xi.begin() + j * d);
        }
      }
    }
    z = matmul(x, params.w1);
  }
  if (params.has_biases)
    for (std::size_t i = 0; i < m; ++i) {
      auto zi = z.row(i);
      for (std::size_t k = 0; k < h; ++k) zi[k] += params.b1[k];
    }

  Matrix hidden(m, h);
  for (std::size_t i = 0; i < z.data.size(); ++i)
    hidden.data[i] = activate(z.data[i]);

  Matrix e = matmul(hidden, params.w2);
  if (params.has_biases)
    for (std::size_t i = 0; i < m; ++i) {
      auto ei = e.row(i);
      for (std::size_t k = 0; k < out; ++k) ei[k] += params.b2[k];
    }

  if (cache) {
    cache->x = std::move(x);
    cache->z = std::move(z);
    cache->hidden = std::move(hidden);
  }
  return e;
}

// Exact gradients of every parameter given dL/dE' (m x d'). Rows of the
// subword/byte matrices (and, for the one-hot variant, of W1) that no
// token in the batch touched come back exactly zero — the structural
// sparsity the extraction attack reads.
inline EmbeddingParams embed_backward(const EmbeddingParams& params,
                                      const ByteMapping* mapping,
                                      const EmbedCache& cache,
                                      const Matrix& upstream) {
  if (cache.variant != params.variant)
    throw Error("cache does not match params");
  const std::size_t m = cache.ids.size();
  if (upstream.rows != m ||
      upstream.cols != static_cast<std::size_t>(params.dims.output))
    throw Error("upstream gradient shape mismatch");

  EmbeddingParams grads = zero_like(params);

  if (params.variant == Variant::kSubword) {
    for (std::size_t i = 0; i < m; ++i) {
      auto dst = grads.subword.row(static_cast<std::size_t>(cache.ids[i]));
      auto g = upstream.row(i);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[k];
    }
    return grads;
  }

  if (mapping == nullptr)
    throw ConfigError("SEB variants require a byte mapping");
  const std::size_t h = static_cast<std::size_t>(params.dims.hidden);
  const std::size_t n =
      static_cast<std::size_t>(params.dims.bytes_per_subword);
  const std::size_t d = static_cast<std::size_t>(params.dims.byte_embed);
  const std::size_t vb = static_cast<std::size_t>(params.dims.byte_vocab);

  // Second layer: E' = hidden * W2 (+ b2).
  grads.w2 = matmul_tn(cache.hidden, upstream);
  if (params.has_biases)
    for (std::size_t i = 0; i < m; ++i) {
      auto g = upstream.row(i);
      for (std::size_t k = 0; k < g.size(); ++k) grads.b2[k] += g[k];
    }

  // Through the activation: dZ = (dE' * W2^T) ⊙ act'(Z).
  Matrix dz = matmul_nt(upstream, params.w2);
  for (std::size_t i = 0; i < dz.data.size(); ++i)
    dz.data[i] *= activate_grad(cache.z.data[i]);
  if (params.has_biases)
    for (std::size_t i = 0; i < m; ++i) {
      auto g = dz.row(i);
      for (std::size_t k = 0; k < h; ++k) grads.b1[k] += g[k];
    }

  if (params.variant == Variant::kSebConcatOneHot) {
    // W1 gradient is dZ scattered to the rows the forward pass gathered.
    for (std::size_t i = 0; i < m; ++i) {
      auto row = mapping->row(cache.ids[i]);
      auto dzi = dz.row(i);
      for (std::size_t j = 0; j < n; ++j) {
        auto dst = grads.w1.row(j * vb + row[j]);
        for (std::size_t k = 0; k < h; ++k) dst[k] += dzi[k];
      }
    }
    return grads;
  }

  // First layer: Z = X * W1.
  grads.w1 = matmul_tn(cache.x, dz);
  Matrix dx = matmul_nt(dz, params.w1);

  // Scatter dX back onto the byte rows used by each token.
  for (std::size_t i = 0; i < m; ++i) {
    auto row = mapping->row(cache.ids[i]);
    auto dxi = dx.row(i);
    if (params.variant == Variant::kSebAddReal) {
      for (std::size_t j = 0; j < n; ++j) {
        auto dst = grads.byte.row(row[j]);
        for (std::size_t k = 0; k < d; ++k) dst[k] += dxi[k];
      }
    } else {  // SebConcatReal: slice j of dX belongs to byte j
      for (std::size_t j = 0; j < n; ++j) {
        auto dst = grads.byte.row(row[j]);
        for (std::size_t k = 0; k < d; ++k) dst[k] += dxi[j * d + k];
      }
    }
  }
  return grads;
}

// Cosine similarity between two subwords' embedding rows, each computed
// with a length-1 forward pass.
inline double embedding_similarity(const EmbeddingParams& params,
                                   const ByteMapping* mapping, int id_a,
                                   int id_b) {
  Matrix ea = embed_forward({id_a}, mapping, params);
  Matrix eb = embed_forward({id_b}, mapping, params);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < ea.cols; ++k) {
    dot += ea.data[k] * eb.data[k];
    na += ea.data[k] * ea.data[k];
    nb += eb.data[k] * eb.data[k];
  }
  if (na == 0.0 || nb == 0.0) throw Error("degenerate embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// -------- Binary parameter checkpoint ("SEBP") --------
//
// Little-endian layout:
//   magic "SEBP" | version u16 | variant name (u16 length + bytes) |
//   has_biases u8 | d u32 | h u32 | d' u32 | n u32 | V_b u32 | V_w u32 |
//   tensors row-major f64 in order: subword, byte, w1, w2, b1, b2
//   (absent tensors contribute zero bytes).

inline constexpr std::uint16_t kParamsFormatVersion = 1;

inline void write_params(std::ostream& os, const EmbeddingParams& p) {
  os.write("SEBP", 4);
  write_u16(os, kParamsFormatVersion);
  write_string(os, variant_name(p.variant));
  write_u8(os, p.has_biases ? 1 : 0);
  write_u32(os, static_cast<std::uint32_t>(p.dims.byte_embed));
  write_u32(os, static_cast<std::uint32_t>(p.dims.hidden));
  write_u32(os, static_cast<std::uint32_t>(p.dims.output));
  write_u32(os, static_cast<std::uint32_t>(p.dims.bytes_per_subword));
  write_u32(os, static_cast<std::uint32_t>(p.dims.byte_vocab));
  write_u32(os, static_cast<std::uint32_t>(p.vocab_size));
  write_doubles(os, p.subword.data);
  write_doubles(os, p.byte.data);
  write_doubles(os, p.w1.data);
  write_doubles(os, p.w2.data);
  write_doubles(os, p.b1);
  write_doubles(os, p.b2);
}

inline EmbeddingParams read_params(std::istream& is) {
  char magic[4];
  read_exact(is, magic, 4);
  if (std::string(magic, 4) != "SEBP")
    throw Error("bad magic in params file");
  if (read_u16(is) != kParamsFormatVersion)
    throw Error("unsupported params file version");
  EmbeddingParams p;
  p.variant = variant_from_name(read_string(is));
  p.has_biases = read_u8(is) != 0;
  p.dims.byte_embed = static_cast<int>(read_u32(is));
  p.dims.hidden = static_cast<int>(read_u32(is));
  p.dims.output = static_cast<int>(read_u32(is));
  p.dims.bytes_per_subword = static_cast<int>(read_u32(is));
  p.dims.byte_vocab = static_cast<int>(read_u32(is));
  p.vocab_size = static_cast<int>(read_u32(is));
  validate_dims(p.variant, p.dims, p.vocab_size);

  auto shaped = init_params(p.variant, p.dims, p.vocab_size, 0, 0.0,
                            p.has_biases);
  p.subword = std::move(shaped.subword);
  p.byte = std::move(shaped.byte);
  p.w1 = std::move(shaped.w1);
  p.w2 = std::move(shaped.w2);
  p.b1 = std::move(shaped.b1);
  p.b2 = std::move(shaped.b2);

  read_doubles(is, p.subword.data);
  read_doubles(is, p.byte.data);
  read_doubles(is, p.w1.data);
  read_doubles(is, p.w2.data);
  read_doubles(is, p.b1);
  read_doubles(is, p.b2);
  return p;
}

inline void save_params(const EmbeddingParams& p,
                        const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write params file: " + path.string());
  write_params(os, p);
  if (!os) throw Error("failed writing params file: " + path.string());
}

inline EmbeddingParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw MissingInputError("cannot open params file: " + path.string());
  return read_params(is);
}

}  // namespace seb
