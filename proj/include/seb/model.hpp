#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "seb/embedding.hpp"
#include "seb/errors.hpp"
#include "seb/mapping.hpp"
#include "seb/matrix.hpp"
#include "seb/text.hpp"

namespace seb {

struct TokenizedSample {
  std::vector<int> ids;
  int label = 0;
};

inline std::vector<TokenizedSample> tokenize_corpus(
    const LabeledCorpus& corpus, const SubwordVocab& vocab) {
  std::vector<TokenizedSample> out;
  out.reserve(corpus.samples.size());
  for (const auto& sample : corpus.samples)
    out.push_back({tokenize(sample.text, vocab), sample.label});
  return out;
}

// Classifier over the embedding layer: mean-pool the token embeddings of a
// sequence, then a linear head. Deliberately minimal so every gradient is
// hand-checkable, while keeping the property the privacy analysis needs —
// the embedding layer sees real token batches.
struct TaskModel {
  EmbeddingParams embedding;
  Matrix head;                    // d' x num_classes
  std::vector<double> head_bias;  // num_classes
  int num_classes = 0;
};

inline TaskModel init_model(Variant variant, const EmbeddingDims& dims,
                            int vocab_size, int num_classes,
                            std::uint64_t seed, double scale,
                            bool with_biases = false) {
  if (num_classes < 2) throw ConfigError("need at least 2 classes");
  TaskModel model;
  model.embedding =
      init_params(variant, dims, vocab_size, seed, scale, with_biases);
  model.num_classes = num_classes;
  SplitMix64 rng(derive_seed(seed, Stream::kParamInit, 1));
  model.head = Matrix(static_cast<std::size_t>(dims.output),
                      static_cast<std::size_t>(num_classes));
  for (double& x : model.head.data) x = rng.next_uniform(-scale, scale);
  model.head_bias.assign(static_cast<std::size_t>(num_classes), 0.0);
  return model;
}

// Full-model gradient, one client batch's worth. Shapes mirror TaskModel.
// truth_ids carries the batch's token sequences for evaluation-side
// scoring only; the extraction attack reads nothing but the gradient
// tensors and metadata.
struct GradientSnapshot {
  EmbeddingParams embedding;  // gradient tensors
  Matrix head;
  std::vector<double> head_bias;
  int client_id = -1;
  int round = -1;
  int batch_size = 0;
  std::vector<std::vector<int>> truth_ids;
};

inline GradientSnapshot zero_snapshot(const TaskModel& model) {
  GradientSnapshot snap;
  snap.embedding = zero_like(model.embedding);
  snap.head = Matrix(model.head.rows, model.head.cols);
  snap.head_bias.assign(model.head_bias.size(), 0.0);
  return snap;
}

inline void add_scaled(GradientSnapshot& dst, const GradientSnapshot& src,
                       double factor) {
  add_scaled(dst.embedding, src.embedding, factor);
  add_scaled(dst.head, src.head, factor);
  add_scaled(dst.head_bias, src.head_bias, factor);
}

inline void scale_snapshot(GradientSnapshot& snap, double factor) {
  scale_params(snap.embedding, factor);
  for (double& x : snap.head.data) x *= factor;
  for (double& x : snap.head_bias) x *= factor;
}

inline double squared_norm(const GradientSnapshot& snap) {
  return squared_norm(snap.embedding) + squared_norm(snap.head.data) +
         squared_norm(snap.head_bias);
}

inline bool all_finite(const GradientSnapshot& snap) {
  return all_finite(snap.embedding) && all_finite(snap.head) &&
         all_finite(snap.head_bias);
}

inline bool all_finite(const TaskModel& model) {
  return all_finite(model.embedding) && all_finite(model.head) &&
         all_finite(model.head_bias);
}

// model += factor * direction, over every parameter tensor.
inline void apply_update(TaskModel& model, const GradientSnapshot& direction,
                         double factor) {
  add_scaled(model.embedding, direction.embedding, factor);
  add_scaled(model.head, direction.head, factor);
  add_scaled(model.head_bias, direction.head_bias, factor);
}

// Everything backward() needs from the forward pass.
struct ModelCache {
  EmbedCache embed_cache;
  std::vector<int> flat_ids;
  std::vector<std::size_t> segment_start;  // per sample, into flat_ids
  std::vector<std::size_t> segment_len;
  std::vector<int> labels;
  Matrix pooled;  // batch x d'
  Matrix probs;   // batch x num_classes (softmax outputs)
};

// <pad> ids are dropped before embedding, which is what masks them out of
// the mean; a sequence with nothing left is replaced by a single <unk>.
inline std::vector<int> effective_ids(const std::vector<int>& ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (int id : ids)
    if (id != kPadId) out.push_back(id);
  if (out.empty()) out.push_back(kUnkId);
  return out;
}

// Mean cross-entropy of the batch, with a numerically stable log-softmax.
inline double forward_loss(const TaskModel& model,
                           const std::vector<TokenizedSample>& batch,
                           const ByteMapping* mapping,
                           ModelCache* cache = nullptr) {
  if (batch.empty()) throw Error("empty batch");
  const std::size_t bsz = batch.size();
  const std::size_t num_classes =
      static_cast<std::size_t>(model.num_classes);
  const std::size_t out_dim = static_cast<std::size_t>(model.embedding.dims.output);

  std::vector<int> flat;
  std::vector<std::size_t> starts(bsz), lens(bsz);
  std::vector<int> labels(bsz);
  for (std::size_t i = 0; i < bsz; ++i) {
    if (batch[i].label < 0 || batch[i].label >= model.num_classes)
      throw Error("label out of range");
    labels[i] = batch[i].label;
    auto ids = effective_ids(batch[i].ids);
    starts[i] = flat.size();
    lens[i] = ids.size();
    flat.insert(flat.end(), ids.begin(), ids.end());
  }

  EmbedCache local_cache;
  Matrix embedded = embed_forward(flat, mapping, model.embedding,
                                  cache ? &cache->embed_cache : &local_cache);

  Matrix pooled(bsz, out_dim);
  for (std::size_t i = 0; i < bsz; ++i) {
    auto dst = pooled.row(i);
    for (std::size_t t = 0; t < lens[i]; ++t) {
      auto src = embedded.row(starts[i] + t);
      for (std::size_t k = 0; k < out_dim; ++k) dst[k] += src[k];
    }
    for (std::size_t k = 0; k < out_dim; ++k)
      dst[k] /= static_cast<double>(lens[i]);
  }

  Matrix logits = matmul(pooled, model.head);
  for (std::size_t i = 0; i < bsz; ++i) {
    auto row = logits.row(i);
    for (std::size_t c = 0; c < num_classes; ++c)
      row[c] += model.head_bias[c];
  }

  Matrix probs(bsz, num_classes);
  double total_loss = 0.0;
  for (std::size_t i = 0; i < bsz; ++i) {
    auto row = logits.row(i);
    double mx = row[0];
    for (std::size_t c = 1; c < num_classes; ++c) mx = std::max(mx, row[c]);
    double sum_exp = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c)
      sum_exp += std::exp(row[c] - mx);
    double log_sum = mx + std::log(sum_exp);
    total_loss += log_sum - row[static_cast<std::size_t>(labels[i])];
    for (std::size_t c = 0; c < num_classes; ++c)
      probs(i, c) = std::exp(row[c] - log_sum);
  }
  double loss = total_loss / static_cast<double>(bsz);

  if (cache) {
    cache->flat_ids = std::move(flat);
    cache->segment_start = std::move(starts);
    cache->segment_len = std::move(lens);
    cache->labels = std::move(labels);
    cache->pooled = std::move(pooled);
    cache->probs = std::move(probs);
  }
  return loss;
}

// Gradients of the MEAN batch loss for every parameter. Embedding
// gradients delegate to embed_backward, inheriting its structural
// sparsity.
inline GradientSnapshot backward(const TaskModel& model,
                                 const ByteMapping* mapping,
                                 const ModelCache& cache) {
  const std::size_t bsz = cache.labels.size();
  if (bsz == 0) throw Error("backward without a forward cache");
  const std::size_t num_classes =
      static_cast<std::size_t>(model.num_classes);
  const std::size_t out_dim =
      static_cast<std::size_t>(model.embedding.dims.output);

  // d(mean loss)/d(logits) = (softmax - onehot(label)) / batch_size.
  Matrix dlogits = cache.probs;
  for (std::size_t i = 0; i < bsz; ++i) {
    dlogits(i, static_cast<std::size_t>(cache.labels[i])) -= 1.0;
    auto row = dlogits.row(i);
    for (std::size_t c = 0; c < num_classes; ++c)
      row[c] /= static_cast<double>(bsz);
  }

  GradientSnapshot snap;
  snap.batch_size = static_cast<int>(bsz);
  snap.head = matmul_tn(cache.pooled, dlogits);
  snap.head_bias.assign(num_classes, 0.0);
  for (std::size_t i = 0; i < bsz; ++i) {
    auto row = dlogits.row(i);
    for (std::size_t c = 0; c < num_classes; ++c)
      snap.head_bias[c] += row[c];
  }

  Matrix dpooled = matmul_nt(dlogits, model.head);
  Matrix dembedded(cache.flat_ids.size(), out_dim);
  for (std::size_t i = 0; i < bsz; ++i) {
    auto src = dpooled.row(i);
    const double inv_len = 1.0 / static_cast<double>(cache.segment_len[i]);
    for (std::size_t t = 0; t < cache.segment_len[i]; ++t) {
      auto dst = dembedded.row(cache.segment_start[i] + t);
      for (std::size_t k = 0; k < out_dim; ++k) dst[k] = src[k] * inv_len;
    }
  }

  snap.embedding =
      embed_backward(model.embedding, mapping, cache.embed_cache, dembedded);
  return snap;
}

// Convenience wrapper: one batch in, one full gradient out.
inline GradientSnapshot compute_gradient(const TaskModel& model,
                                         const std::vector<TokenizedSample>& batch,
                                         const ByteMapping* mapping,
                                         double* loss_out = nullptr) {
  ModelCache cache;
  double loss = forward_loss(model, batch, mapping, &cache);
  if (loss_out) *loss_out = loss;
  GradientSnapshot snap = backward(model, mapping, cache);
  snap.truth_ids.reserve(batch.size());
  for (const auto& sample : batch) snap.truth_ids.push_back(sample.ids);
  return snap;
}

// Argmax accuracy; ties break toward the lower class id.
inline double evaluate(const TaskModel& model,
                       const std::vector<TokenizedSample>& samples,
                       const ByteMapping* mapping) {
  if (samples.empty()) throw Error("empty evaluation set");
  const std::size_t chunk = 128;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < samples.size(); begin += chunk) {
    std::size_t end = std::min(begin + chunk, samples.size());
    std::vector<TokenizedSample> batch(samples.begin() + begin,
                                       samples.begin() + end);
    // Labels are irrelevant for prediction but must pass validation.
    for (auto& s : batch) s.label = 0;
    ModelCache cache;
    forward_loss(model, batch, mapping, &cache);
    Matrix logits = matmul(cache.pooled, model.head);
    for (std::size_t i = 0; i < logits.rows; ++i) {
      auto row = logits.row(i);
      for (std::size_t c = 0; c < row.size(); ++c)
        row[c] += model.head_bias[c];
      std::size_t best = 0;
      for (std::size_t c = 1; c < row.size(); ++c)
        if (row[c] > row[best]) best = c;
      if (static_cast<int>(best) == samples[begin + i].label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

// -------- Model checkpoint: SEBP block + appended head section --------

inline void write_model(std::ostream& os, const TaskModel& model) {
  write_params(os, model.embedding);
  write_u32(os, static_cast<std::uint32_t>(model.num_classes));
  write_doubles(os, model.head.data);
  write_doubles(os, model.head_bias);
}

inline TaskModel read_model(std::istream& is) {
  TaskModel model;
  model.embedding = read_params(is);
  model.num_classes = static_cast<int>(read_u32(is));
  if (model.num_classes < 2) throw Error("model file has < 2 classes");
  model.head = Matrix(static_cast<std::size_t>(model.embedding.dims.output),
                      static_cast<std::size_t>(model.num_classes));
  read_doubles(is, model.head.data);
  model.head_bias.resize(static_cast<std::size_t>(model.num_classes));
  read_doubles(is, model.head_bias);
  return model;
}

inline void save_model(const TaskModel& model,
                       const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write model file: " + path.string());
  write_model(os, model);
  if (!os) throw Error("failed writing model file: " + path.string());
}

inline TaskModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw MissingInputError("cannot open model file: " + path.string());
  return read_model(is);
}

// -------- Gradient snapshot file ("SEBG") --------
//
// Layout: magic "SEBG" | version u16 | client u32 | round u32 |
// batch_size u32 | embedding grads (SEBP block) | num_classes u32 |
// head f64s | head_bias f64s | truth section (u32 count, then per
// sequence u32 length + u32 ids).

inline constexpr std::uint16_t kSnapshotFormatVersion = 1;

inline void save_snapshot(const GradientSnapshot& snap,
                          const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write snapshot file: " + path.string());
  os.write("SEBG", 4);
  write_u16(os, kSnapshotFormatVersion);
  write_u32(os, static_cast<std::uint32_t>(snap.client_id));
  write_u32(os, static_cast<std::uint32_t>(snap.round));
  write_u32(os, static_cast<std::uint32_t>(snap.batch_size));
  write_params(os, snap.embedding);
  write_u32(os, static_cast<std::uint32_t>(snap.head.cols));
  write_doubles(os, snap.head.data);
  write_doubles(os, snap.head_bias);
  write_u32(os, static_cast<std::uint32_t>(snap.truth_ids.size()));
  for (const auto& seq : snap.truth_ids) {
    write_u32(os, static_cast<std::uint32_t>(seq.size()));
    for (int id : seq) write_u32(os, static_cast<std::uint32_t>(id));
  }
  if (!os) throw Error("failed writing snapshot file: " + path.string());
}

inline GradientSnapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw MissingInputError("cannot open snapshot file: " + path.string());
  char magic[4];
  read_exact(is, magic, 4);
  if (std::string(magic, 4) != "SEBG")
    throw Error("bad magic in snapshot file");
  if (read_u16(is) != kSnapshotFormatVersion)
    throw Error("unsupported snapshot file version");
  GradientSnapshot snap;
  snap.client_id = static_cast<int>(read_u32(is));
  snap.round = static_cast<int>(read_u32(is));
  snap.batch_size = static_cast<int>(read_u32(is));
  snap.embedding = read_params(is);
  std::uint32_t num_classes = read_u32(is);
  snap.head = Matrix(static_cast<std::size_t>(snap.embedding.dims.output),
                     num_classes);
  read_doubles(is, snap.head.data);
  snap.head_bias.resize(num_classes);
  read_doubles(is, snap.head_bias);
  std::uint32_t count = read_u32(is);
  snap.truth_ids.resize(count);
  for (auto& seq : snap.truth_ids) {
    seq.resize(read_u32(is));
    for (int& id : seq) id = static_cast<int>(read_u32(is));
  }
  return snap;
}

}  // namespace seb
