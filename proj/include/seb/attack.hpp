#pragma once

// Gradient-inspection attack: recover which tokens appeared in a client's
// training batch from the structural sparsity of its embedding gradients.
//
// For a plain subword table the gradient row of every token in the batch is
// nonzero and every other row is exactly zero, so reading off the nonzero
// rows reveals the batch vocabulary directly.  Byte-composed embeddings only
// leak which *bytes* (or (position, byte) pairs) were touched; an attacker
// must then expand those units back to subword candidates through the
// byte mapping, which is where ambiguity — and the defense — comes from.
//
// The module also implements magnitude-based gradient pruning (the classic
// sparsification defense) so the two mitigations can be compared, plus the
// scoring used throughout: set precision/recall over the batch vocabulary,
// candidate-set size as a fraction of the vocabulary, and ROUGE-1/2/L for a
// naive sequence reconstruction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "seb/errors.hpp"
#include "seb/mapping.hpp"
#include "seb/matrix.hpp"
#include "seb/model.hpp"
#include "seb/rng.hpp"
#include "seb/serialize.hpp"

namespace seb {

// How a set of leaked byte units is expanded into subword candidates.
//  kLooseAny:  a subword is a candidate if ANY of its mapped units leaked.
//  kStrictAll: a subword is a candidate only if ALL of its units leaked.
enum class ExpandRule { kLooseAny, kStrictAll };

// What counts as a leaked unit.
//  kByte:         a byte value, regardless of where it appears in a code.
//  kPositionByte: a (position, byte) pair; only the one-hot concatenation
//                 variant exposes per-position structure in its gradients.
enum class Granularity { kByte, kPositionByte };

inline const char* expand_rule_name(ExpandRule rule) {
  return rule == ExpandRule::kLooseAny ? "loose_any" : "strict_all";
}

inline ExpandRule expand_rule_from_name(const std::string& name) {
  if (name == "loose_any") return ExpandRule::kLooseAny;
  if (name == "strict_all") return ExpandRule::kStrictAll;
  throw ConfigError("unknown expansion rule: " + name);
}

inline const char* granularity_name(Granularity g) {
  return g == Granularity::kByte ? "byte" : "position_byte";
}

inline Granularity granularity_from_name(const std::string& name) {
  if (name == "byte") return Granularity::kByte;
  if (name == "position_byte") return Granularity::kPositionByte;
  throw ConfigError("unknown granularity: " + name);
}

// Default threshold below which a gradient row is considered untouched.
// Rows of unused tokens are exactly zero by construction, so this only
// needs to be far below any genuine gradient magnitude.
inline constexpr double kExtractEpsilon = 1e-12;

// Leaked units plus the mapping geometry needed to interpret them.
// For kByte, units are byte values in [0, byte_vocab).  For kPositionByte,
// units encode (position j, byte b) as j * byte_vocab + b.
struct ExtractedUnits {
  Granularity granularity = Granularity::kByte;
  int byte_vocab = 0;
  int bytes_per_subword = 0;
  std::set<int> units;
};

namespace detail {

inline bool row_touched(std::span<const double> row, double epsilon) {
  return max_abs(row) > epsilon;
}

}  // namespace detail

// Reads the nonzero rows of a subword-table gradient.  Only meaningful for
// the plain subword variant; byte-composed snapshots have no such table.
inline std::set<int> extract_subword_candidates(const GradientSnapshot& snap,
                                                double epsilon = kExtractEpsilon) {
  if (snap.embedding.variant != Variant::kSubword)
    throw Error("subword extraction requires a subword-table gradient");
  std::set<int> out;
  const Matrix& table = snap.embedding.subword;
  for (int i = 0; i < table.rows; ++i)
    if (detail::row_touched(table.row(i), epsilon)) out.insert(i);
  return out;
}

// Reads the leaked byte units from a byte-composed gradient snapshot.
//
// For the real-embedding variants (add / concat), a byte leaks exactly when
// its row of the byte-embedding table has nonzero gradient; these variants
// share one table across positions, so only kByte granularity exists.
// The one-hot concatenation variant has no byte table — its first FFN layer
// consumes the one-hot code directly, so row j*V_b + b of that weight matrix
// is touched exactly when byte b occurred at position j, supporting both
// granularities.
inline ExtractedUnits extract_byte_candidates(const GradientSnapshot& snap,
                                              double epsilon = kExtractEpsilon,
                                              Granularity granularity = Granularity::kByte) {
  const EmbeddingParams& emb = snap.embedding;
  if (!is_seb_variant(emb.variant))
    throw Error("byte extraction requires a byte-composed gradient");

  ExtractedUnits out;
  out.granularity = granularity;
  out.byte_vocab = emb.dims.byte_vocab;
  out.bytes_per_subword = emb.dims.bytes_per_subword;

  if (emb.variant == Variant::kSebConcatOneHot) {
    const int vb = emb.dims.byte_vocab;
    const int n = emb.dims.bytes_per_subword;
    for (int j = 0; j < n; ++j) {
      for (int b = 0; b < vb; ++b) {
        if (!detail::row_touched(emb.w1.row(j * vb + b), epsilon)) continue;
        out.units.insert(granularity == Granularity::kPositionByte ? j * vb + b : b);
      }
    }
    return out;
  }

  if (granularity == Granularity::kPositionByte)
    throw Error("position-byte granularity needs per-position gradients; "
                "shared byte tables only leak byte identity");
  for (int b = 0; b < emb.dims.byte_vocab; ++b)
    if (detail::row_touched(emb.byte.row(b), epsilon)) out.units.insert(b);
  return out;
}

// Expands leaked units into subword candidates by scanning the mapping.
inline std::set<int> expand_candidates(const ExtractedUnits& extracted,
                                       const ByteMapping& mapping,
                                       ExpandRule rule) {
  if (extracted.byte_vocab != mapping.byte_vocab_size ||
      extracted.bytes_per_subword != mapping.bytes_per_subword)
    throw Error("extracted units do not match mapping geometry");
  const int vb = mapping.byte_vocab_size;
  const int n = mapping.bytes_per_subword;
  const int limit = extracted.granularity == Granularity::kByte ? vb : n * vb;
  for (int unit : extracted.units)
    if (unit < 0 || unit >= limit) throw Error("extracted unit out of range");

  const bool positional = extracted.granularity == Granularity::kPositionByte;
  std::set<int> out;
  for (int id = 0; id < mapping.vocab_size; ++id) {
    auto row = mapping.row(id);
    int hits = 0;
    for (int j = 0; j < n; ++j) {
      const int unit = positional ? j * vb + row[j] : row[j];
      if (extracted.units.count(unit)) ++hits;
    }
    const bool keep = rule == ExpandRule::kLooseAny ? hits > 0 : hits == n;
    if (keep) out.insert(id);
  }
  return out;
}

namespace detail {

// Zeros the floor(ratio * size) smallest-magnitude entries of one tensor,
// breaking magnitude ties by flat index so the result is deterministic.
inline void prune_tensor(std::vector<double>& values, double ratio) {
  const std::size_t k =
      static_cast<std::size_t>(ratio * static_cast<double>(values.size()));
  if (k == 0) return;
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = std::fabs(values[a]);
    const double mb = std::fabs(values[b]);
    if (ma != mb) return ma < mb;
    return a < b;
  });
  for (std::size_t i = 0; i < k && i < order.size(); ++i) values[order[i]] = 0.0;
}

inline void prune_tensor(Matrix& m, double ratio) { prune_tensor(m.data, ratio); }

}  // namespace detail

// Magnitude pruning applied independently to every gradient tensor: the
// floor(ratio * numel) smallest-magnitude entries of each tensor are zeroed.
// A defender shares the pruned snapshot instead of the raw one.
inline GradientSnapshot gradient_prune(const GradientSnapshot& snap, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw ConfigError("prune ratio must be in [0, 1]");
  GradientSnapshot out = snap;
  detail::prune_tensor(out.embedding.subword, ratio);
  detail::prune_tensor(out.embedding.byte, ratio);
  detail::prune_tensor(out.embedding.w1, ratio);
  detail::prune_tensor(out.embedding.w2, ratio);
  detail::prune_tensor(out.embedding.b1, ratio);
  detail::prune_tensor(out.embedding.b2, ratio);
  detail::prune_tensor(out.head, ratio);
  detail::prune_tensor(out.head_bias, ratio);
  return out;
}

// One point of the coverage curve: how many subwords, on average, become
// candidates when a uniformly random set of k distinct bytes leaks.
struct CoveragePoint {
  int leaked_bytes = 0;     // k
  double mean_candidates = 0.0;
};

// Estimates candidate coverage as a function of leaked-byte count by Monte
// Carlo over uniform k-subsets of the byte alphabet.  With every byte leaked
// the whole vocabulary is covered; with none, nothing is.
inline std::vector<CoveragePoint> coverage_curve(const ByteMapping& mapping,
                                                 const std::vector<int>& byte_counts,
                                                 int trials,
                                                 std::uint64_t seed,
                                                 ExpandRule rule = ExpandRule::kLooseAny) {
  if (trials < 1) throw ConfigError("coverage trials must be positive");
  for (int k : byte_counts)
    if (k < 0 || k > mapping.byte_vocab_size)
      throw ConfigError("leaked-byte count out of range");

  SplitMix64 rng(derive_seed(seed, Stream::kCoverage));
  std::vector<CoveragePoint> out;
  out.reserve(byte_counts.size());
  for (int k : byte_counts) {
    double total = 0.0;
    for (int t = 0; t < trials; ++t) {
      auto sampled = sample_without_replacement(mapping.byte_vocab_size, k, rng);
      ExtractedUnits units;
      units.granularity = Granularity::kByte;
      units.byte_vocab = mapping.byte_vocab_size;
      units.bytes_per_subword = mapping.bytes_per_subword;
      units.units.insert(sampled.begin(), sampled.end());
      total += static_cast<double>(expand_candidates(units, mapping, rule).size());
    }
    out.push_back({k, total / trials});
  }
  return out;
}

// Per-batch counts behind the “few subwords, many bytes” effect: a handful
// of distinct subwords already touches a large share of the byte alphabet.
struct BatchStats {
  std::size_t tokens = 0;           // total token occurrences
  std::size_t unique_subwords = 0;  // distinct token ids
  std::size_t unique_bytes = 0;     // distinct bytes across their codes
};

inline BatchStats batch_statistics(const std::vector<std::vector<int>>& batch,
                                   const ByteMapping& mapping) {
  BatchStats stats;
  std::set<int> subwords;
  std::set<int> bytes;
  for (const auto& seq : batch) {
    for (int id : seq) {
      if (id < 0 || id >= mapping.vocab_size)
        throw Error("token id out of mapping range");
      ++stats.tokens;
      subwords.insert(id);
      for (uint8_t b : mapping.row(id)) bytes.insert(b);
    }
  }
  stats.unique_subwords = subwords.size();
  stats.unique_bytes = bytes.size();
  return stats;
}

// ROUGE-1/2/L F-scores between two token-id sequences.  Unigram and bigram
// scores use multiset overlap; the L score uses longest common subsequence.
// Identical emptiness (no n-grams on either side) scores 1.0.
struct RougeScores {
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
};

namespace detail {

inline double f_score(double match, double cand_total, double ref_total) {
  if (cand_total == 0.0 && ref_total == 0.0) return 1.0;
  if (cand_total == 0.0 || ref_total == 0.0) return 0.0;
  const double p = match / cand_total;
  const double r = match / ref_total;
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

template <typename Gram>
double ngram_f(const std::vector<Gram>& cand, const std::vector<Gram>& ref) {
  std::map<Gram, std::size_t> counts;
  for (const Gram& g : ref) ++counts[g];
  double match = 0.0;
  for (const Gram& g : cand) {
    auto it = counts.find(g);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      match += 1.0;
    }
  }
  return f_score(match, static_cast<double>(cand.size()),
                 static_cast<double>(ref.size()));
}

inline std::vector<std::pair<int, int>> bigrams(const std::vector<int>& seq) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i)
    out.emplace_back(seq[i], seq[i + 1]);
  return out;
}

inline std::size_t lcs_length(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() || b.empty()) return 0;
  // Rolling single-row dynamic program; O(|a|*|b|) time, O(|b|) space.
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = 0;  // row_{i-1}[j-1]
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = a[i - 1] == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[b.size()];
}

}  // namespace detail

inline RougeScores rouge_scores(const std::vector<int>& candidate,
                                const std::vector<int>& reference) {
  RougeScores s;
  s.rouge1 = detail::ngram_f(candidate, reference);
  s.rouge2 = detail::ngram_f(detail::bigrams(candidate), detail::bigrams(reference));
  const double lcs = static_cast<double>(detail::lcs_length(candidate, reference));
  s.rougeL = detail::f_score(lcs, static_cast<double>(candidate.size()),
                             static_cast<double>(reference.size()));
  return s;
}

// Outcome of attacking one gradient snapshot at one prune ratio.
struct AttackReport {
  int round = -1;
  int client_id = -1;
  ExpandRule rule = ExpandRule::kLooseAny;
  Granularity granularity = Granularity::kByte;
  double prune_ratio = 0.0;
  std::set<int> true_token_ids;       // batch vocabulary (ground truth)
  std::set<int> candidate_ids;        // attacker's reconstruction
  std::size_t extracted_unit_count = 0;  // leaked rows / byte units
  double precision = 0.0;             // |candidates ∩ truth| / |candidates|
  double recall = 0.0;                // |candidates ∩ truth| / |truth|
  double candidate_fraction = 0.0;    // |candidates| / vocabulary size
  RougeScores rouge;
};

struct AttackOptions {
  double epsilon = kExtractEpsilon;
  ExpandRule rule = ExpandRule::kLooseAny;
  Granularity granularity = Granularity::kByte;
  std::vector<double> prune_ratios = {0.0};
};

namespace detail {

inline std::set<int> batch_vocabulary(const GradientSnapshot& snap) {
  std::set<int> truth;
  for (const auto& seq : snap.truth_ids) {
    auto ids = effective_ids(seq);
    truth.insert(ids.begin(), ids.end());
  }
  return truth;
}

inline std::size_t intersection_size(const std::set<int>& a, const std::set<int>& b) {
  const std::set<int>& small = a.size() <= b.size() ? a : b;
  const std::set<int>& large = a.size() <= b.size() ? b : a;
  std::size_t n = 0;
  for (int v : small) n += large.count(v);
  return n;
}

}  // namespace detail

// Runs extraction + expansion on one (possibly pruned) snapshot and scores
// the result against the batch that produced it.  The ROUGE reconstruction
// is deliberately naive: candidates in ascending-id order, truncated to the
// reference length — a floor for what sequence-level recovery could achieve.
inline AttackReport attack_snapshot(const GradientSnapshot& snap,
                                    const ByteMapping* mapping,
                                    const AttackOptions& options,
                                    double prune_ratio) {
  const GradientSnapshot* source = &snap;
  GradientSnapshot pruned;
  if (prune_ratio > 0.0) {
    pruned = gradient_prune(snap, prune_ratio);
    source = &pruned;
  } else if (!(prune_ratio >= 0.0)) {
    throw ConfigError("prune ratio must be in [0, 1]");
  }

  AttackReport report;
  report.round = snap.round;
  report.client_id = snap.client_id;
  report.rule = options.rule;
  report.granularity = options.granularity;
  report.prune_ratio = prune_ratio;
  report.true_token_ids = detail::batch_vocabulary(snap);

  int vocab_size = snap.embedding.vocab_size;
  if (snap.embedding.variant == Variant::kSubword) {
    report.candidate_ids = extract_subword_candidates(*source, options.epsilon);
    report.extracted_unit_count = report.candidate_ids.size();
  } else {
    if (mapping == nullptr)
      throw MissingInputError("byte-composed attack needs the byte mapping");
    auto units = extract_byte_candidates(*source, options.epsilon, options.granularity);
    report.extracted_unit_count = units.units.size();
    report.candidate_ids = expand_candidates(units, *mapping, options.rule);
    vocab_size = mapping->vocab_size;
  }

  const std::size_t hits =
      detail::intersection_size(report.candidate_ids, report.true_token_ids);
  report.precision = report.candidate_ids.empty()
                         ? 0.0
                         : static_cast<double>(hits) / report.candidate_ids.size();
  report.recall = report.true_token_ids.empty()
                      ? 0.0
                      : static_cast<double>(hits) / report.true_token_ids.size();
  report.candidate_fraction =
      vocab_size > 0 ? static_cast<double>(report.candidate_ids.size()) / vocab_size
                     : 0.0;

  std::vector<int> reference;
  for (const auto& seq : snap.truth_ids) {
    auto ids = effective_ids(seq);
    reference.insert(reference.end(), ids.begin(), ids.end());
  }
  std::vector<int> reconstruction(report.candidate_ids.begin(),
                                  report.candidate_ids.end());
  if (reconstruction.size() > reference.size())
    reconstruction.resize(reference.size());
  report.rouge = rouge_scores(reconstruction, reference);
  return report;
}

// Full sweep: every snapshot at every configured prune ratio.
inline std::vector<AttackReport> run_attack(const std::vector<GradientSnapshot>& snapshots,
                                            const ByteMapping* mapping,
                                            const AttackOptions& options) {
  std::vector<AttackReport> reports;
  reports.reserve(snapshots.size() * options.prune_ratios.size());
  for (const auto& snap : snapshots)
    for (double ratio : options.prune_ratios)
      reports.push_back(attack_snapshot(snap, mapping, options, ratio));
  return reports;
}

// -------- Report CSVs --------
//
// Doubles print with round-trip precision so identical runs produce
// byte-identical files.

inline void write_attack_csv(const std::vector<AttackReport>& reports,
                             std::ostream& os) {
  os << "round,client,rule,granularity,prune_ratio,precision,recall,"
        "candidate_fraction,rouge1,rouge2,rougeL\n";
  for (const auto& r : reports) {
    os << r.round << ',' << r.client_id << ',' << expand_rule_name(r.rule) << ','
       << granularity_name(r.granularity) << ',' << format_double(r.prune_ratio)
       << ',' << format_double(r.precision) << ',' << format_double(r.recall)
       << ',' << format_double(r.candidate_fraction) << ','
       << format_double(r.rouge.rouge1) << ',' << format_double(r.rouge.rouge2)
       << ',' << format_double(r.rouge.rougeL) << '\n';
  }
}

inline void save_attack_csv(const std::vector<AttackReport>& reports,
                            const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write attack report: " + path.string());
  write_attack_csv(reports, os);
  if (!os) throw Error("failed writing attack report: " + path.string());
}

inline void write_batch_stats_csv(const std::vector<BatchStats>& stats,
                                  std::ostream& os) {
  os << "batch,tokens,unique_subwords,unique_bytes\n";
  for (std::size_t i = 0; i < stats.size(); ++i)
    os << i << ',' << stats[i].tokens << ',' << stats[i].unique_subwords << ','
       << stats[i].unique_bytes << '\n';
}

inline void write_coverage_csv(const std::vector<CoveragePoint>& points,
                               std::ostream& os) {
  os << "leaked_bytes,mean_candidates\n";
  for (const auto& p : points)
    os << p.leaked_bytes << ',' << format_double(p.mean_candidates) << '\n';
}

}  // namespace seb
