#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seb/errors.hpp"
#include "seb/rng.hpp"

namespace seb {

// Reserved ids shared by every vocabulary.
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kBosId = 2;
inline constexpr int kEosId = 3;
inline constexpr int kNumSpecials = 4;
inline constexpr const char* kSpecialTokens[kNumSpecials] = {"<pad>", "<unk>",
                                                             "<bos>", "<eos>"};

// Bidirectional token table. Ids are dense in [0, size()) and the four
// special tokens always occupy ids 0..3 in fixed order. The '<' and '>'
// characters split as punctuation during tokenization, so no surface word
// can ever collide with a special token.
class SubwordVocab {
 public:
  static SubwordVocab from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < static_cast<std::size_t>(kNumSpecials))
      throw Error("vocabulary missing special tokens");
    for (int i = 0; i < kNumSpecials; ++i) {
      if (tokens[static_cast<std::size_t>(i)] != kSpecialTokens[i])
        throw Error("special tokens must occupy ids 0..3 in order");
    }
    SubwordVocab v;
    v.tokens_ = std::move(tokens);
    v.index_.reserve(v.tokens_.size());
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
      if (v.tokens_[i].empty()) throw Error("empty token in vocabulary");
      auto [_, inserted] = v.index_.emplace(v.tokens_[i], static_cast<int>(i));
      if (!inserted) throw Error("duplicate token: " + v.tokens_[i]);
    }
    return v;
  }

  int size() const { return static_cast<int>(tokens_.size()); }

  const std::vector<std::string>& tokens() const { return tokens_; }

  const std::string& token_of(int id) const {
    if (id < 0 || id >= size()) throw Error("token id out of range");
    return tokens_[static_cast<std::size_t>(id)];
  }

  // Returns the id, or kUnkId for out-of-vocabulary strings.
  int id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& token) const {
    return index_.count(token) > 0;
  }

  bool operator==(const SubwordVocab& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct LabeledSample {
  std::string text;
  int label = 0;
};

struct LabeledCorpus {
  std::vector<LabeledSample> samples;
  int num_classes = 0;
};

// Lowercases ASCII letters, splits on whitespace, and emits each ASCII
// punctuation character as its own single-character token. Bytes >= 0x80
// are kept inside words untouched, so UTF-8 text passes through intact.
inline std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c))
                                 : static_cast<char>(c));
    }
  }
  flush();
  return out;
}

// Frequency-ranked vocabulary over whitespace/punctuation-split tokens.
// Order is deterministic: frequency descending, ties lexicographic. The
// result always starts with the four specials and never exceeds max_size
// entries in total.
inline SubwordVocab build_vocab(const LabeledCorpus& corpus, int min_freq,
                                int max_size) {
  if (corpus.samples.empty()) throw ConfigError("empty corpus");
  if (min_freq < 1) throw ConfigError("min_freq must be >= 1");
  if (max_size < kNumSpecials)
    throw ConfigError("max_size must leave room for the special tokens");

  // std::map iteration is lexicographic, so a stable sort on frequency
  // alone yields the (frequency desc, lexicographic asc) order.
  std::map<std::string, std::int64_t> freq;
  for (const auto& sample : corpus.samples)
    for (const auto& word : split_words(sample.text)) ++freq[word];

  std::vector<std::pair<std::string, std::int64_t>> ranked(freq.begin(),
                                                           freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });

  std::vector<std::string> tokens(kSpecialTokens,
                                  kSpecialTokens + kNumSpecials);
  for (const auto& [word, count] : ranked) {
    if (static_cast<int>(tokens.size()) >= max_size) break;
    if (count < min_freq) break;  // ranked is frequency-descending
    tokens.push_back(word);
  }
  return SubwordVocab::from_tokens(std::move(tokens));
}

// Total function: unknown words map to <unk>, empty text maps to an empty
// sequence, and <pad> is never produced.
inline std::vector<int> tokenize(const std::string& text,
                                 const SubwordVocab& vocab) {
  std::vector<int> ids;
  for (const auto& word : split_words(text)) ids.push_back(vocab.id_of(word));
  return ids;
}

// Space-joins the token strings. For text made of in-vocabulary words,
// tokenize(detokenize(tokenize(text))) == tokenize(text).
inline std::string detokenize(const std::vector<int>& ids,
                              const SubwordVocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ' ';
    out += vocab.token_of(ids[i]);
  }
  return out;
}

// Vocab file: UTF-8, one token per line, LF endings, line number == id.
inline void save_vocab(const SubwordVocab& vocab,
                       const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write vocab file: " + path.string());
  for (const auto& token : vocab.tokens()) os << token << '\n';
  if (!os) throw Error("failed writing vocab file: " + path.string());
}

inline SubwordVocab load_vocab(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("cannot open vocab file: " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return SubwordVocab::from_tokens(std::move(tokens));
}

// -------- Labeled corpus CSV (RFC 4180, header `label,text`) --------

namespace detail {

inline std::string csv_escape(const std::string& field) {
  bool needs_quotes = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// Splits CSV content into records of fields; quoted fields may contain
// commas, doubled quotes, and line breaks.
inline std::vector<std::vector<std::string>> csv_parse(
    const std::string& content, const std::string& origin) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t i = 0;
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(record);
    record.clear();
  };
  while (i < content.size()) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty() && !field_was_quoted) {
      in_quotes = true;
      field_was_quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      end_record();
    } else {
      field += c;
    }
    ++i;
  }
  if (in_quotes) throw ConfigError("unterminated quote in " + origin);
  if (!field.empty() || !record.empty() || field_was_quoted) end_record();
  return records;
}

}  // namespace detail

inline void save_corpus_csv(const LabeledCorpus& corpus,
                            const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write corpus file: " + path.string());
  os << "label,text\n";
  for (const auto& sample : corpus.samples)
    os << sample.label << ',' << detail::csv_escape(sample.text) << '\n';
  if (!os) throw Error("failed writing corpus file: " + path.string());
}

inline LabeledCorpus load_corpus_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw MissingInputError("cannot open corpus file: " + path.string());
  std::string content((std::istreambuf_iterator<char>(is)),
                      std::istreambuf_iterator<char>());
  auto records = detail::csv_parse(content, path.string());
  if (records.empty()) throw ConfigError("empty corpus");
  const auto& header = records.front();
  if (header.size() != 2 || header[0] != "label" || header[1] != "text")
    throw ConfigError("corpus file must start with header 'label,text'");
  LabeledCorpus corpus;
  int max_label = -1;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != 2)
      throw ConfigError("corpus row " + std::to_string(r) +
                        " does not have exactly 2 fields");
    int label;
    try {
      std::size_t consumed;
      label = std::stoi(rec[0], &consumed);
      if (consumed != rec[0].size()) throw std::invalid_argument(rec[0]);
    } catch (const std::exception&) {
      throw ConfigError("corpus row " + std::to_string(r) +
                        " has a non-integer label: " + rec[0]);
    }
    if (label < 0)
      throw ConfigError("corpus row " + std::to_string(r) +
                        " has a negative label");
    max_label = std::max(max_label, label);
    corpus.samples.push_back({rec[1], label});
  }
  if (corpus.samples.empty()) throw ConfigError("empty corpus");
  corpus.num_classes = max_label + 1;
  return corpus;
}

// -------- Synthetic data generators --------

// Class-biased categorical text: each sample mixes shared background words
// with words indicative of its label (roughly half and half), so a linear
// model over embeddings can learn the task. Labels cycle 0..num_classes-1,
// giving balanced classes. Deterministic per seed.
inline LabeledCorpus generate_synthetic_corpus(int num_samples,
                                               int num_classes, int vocab_size,
                                               int tokens_per_sample,
                                               std::uint64_t seed) {
  if (num_samples < 1 || num_classes < 1 || vocab_size < 1 ||
      tokens_per_sample < 1)
    throw ConfigError("synthetic corpus parameters must all be >= 1");

  std::vector<std::string> words(static_cast<std::size_t>(vocab_size));
  for (int i = 0; i < vocab_size; ++i)
    words[static_cast<std::size_t>(i)] = "w" + std::to_string(i);

  // First half of the inventory is shared background; the rest is dealt
  // round-robin to classes as label-indicative words.
  int background = vocab_size / 2;
  std::vector<std::vector<int>> class_words(
      static_cast<std::size_t>(num_classes));
  for (int i = background; i < vocab_size; ++i)
    class_words[static_cast<std::size_t>((i - background) % num_classes)]
        .push_back(i);

  SplitMix64 rng(derive_seed(seed, Stream::kSyntheticCorpus));
  LabeledCorpus corpus;
  corpus.num_classes = num_classes;
  corpus.samples.reserve(static_cast<std::size_t>(num_samples));
  for (int s = 0; s < num_samples; ++s) {
    int label = s % num_classes;
    const auto& indicative = class_words[static_cast<std::size_t>(label)];
    std::string text;
    for (int t = 0; t < tokens_per_sample; ++t) {
      int word_id;
      if (!indicative.empty() && (background == 0 || rng.next_bernoulli(0.5)))
        word_id = indicative[static_cast<std::size_t>(
            rng.next_below(indicative.size()))];
      else if (background > 0)
        word_id = rng.next_int(0, background);
      else
        word_id = rng.next_int(0, vocab_size);
      if (t > 0) text += ' ';
      text += words[static_cast<std::size_t>(word_id)];
    }
    corpus.samples.push_back({std::move(text), label});
  }
  return corpus;
}

// Token-id sentences that imitate topical text: every sentence in the batch
// draws uniformly from one shared pool of `pool_size` ordinary token ids,
// so tokens repeat across the batch the way words repeat within a document.
// Sentence lengths are uniform in [min_tokens, max_tokens]. Ids are in
// [kNumSpecials, vocab_size).
inline std::vector<std::vector<int>> sample_topical_sentences(
    int vocab_size, int pool_size, int num_sentences, int min_tokens,
    int max_tokens, SplitMix64& rng) {
  if (vocab_size <= kNumSpecials)
    throw ConfigError("vocab_size leaves no ordinary tokens");
  if (pool_size < 1 || pool_size > vocab_size - kNumSpecials)
    throw ConfigError("pool_size out of range");
  if (num_sentences < 1 || min_tokens < 1 || max_tokens < min_tokens)
    throw ConfigError("bad sentence counts");

  std::vector<int> pool =
      sample_without_replacement(vocab_size - kNumSpecials, pool_size, rng);
  for (int& id : pool) id += kNumSpecials;

  std::vector<std::vector<int>> sentences(
      static_cast<std::size_t>(num_sentences));
  for (auto& sentence : sentences) {
    int len = rng.next_int(min_tokens, max_tokens + 1);
    sentence.reserve(static_cast<std::size_t>(len));
    for (int t = 0; t < len; ++t)
      sentence.push_back(
          pool[static_cast<std::size_t>(rng.next_below(pool.size()))]);
  }
  return sentences;
}

}  // namespace seb
