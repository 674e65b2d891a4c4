#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "seb/text.hpp"

namespace {

using seb::LabeledCorpus;
using seb::SubwordVocab;

LabeledCorpus corpus_of(std::vector<seb::LabeledSample> samples,
                        int num_classes) {
  LabeledCorpus c;
  c.samples = std::move(samples);
  c.num_classes = num_classes;
  return c;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "seb_text_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

TEST(SplitWords, LowercasesAndSplitsOnWhitespace) {
  auto words = seb::split_words("Hello  World\tfoo\nbar");
  EXPECT_EQ(words,
            (std::vector<std::string>{"hello", "world", "foo", "bar"}));
}

TEST(SplitWords, PunctuationBecomesSingleCharTokens) {
  auto words = seb::split_words("a,b. c!");
  EXPECT_EQ(words, (std::vector<std::string>{"a", ",", "b", ".", "c", "!"}));
}

TEST(SplitWords, AngleBracketsSplitSpecialLookalikes) {
  auto words = seb::split_words("<pad>");
  EXPECT_EQ(words, (std::vector<std::string>{"<", "pad", ">"}));
}

TEST(SplitWords, HighBytesStayInsideWords) {
  std::string word = "na\xc3\xafve";  // "naïve" in UTF-8
  auto words = seb::split_words("The " + word);
  EXPECT_EQ(words, (std::vector<std::string>{"the", word}));
}

TEST(SplitWords, EmptyAndWhitespaceOnly) {
  EXPECT_TRUE(seb::split_words("").empty());
  EXPECT_TRUE(seb::split_words("  \t\n").empty());
}

TEST(BuildVocab, HandCountedFrequencies) {
  auto corpus = corpus_of({{"a a b", 0}}, 1);
  auto vocab = seb::build_vocab(corpus, 1, 10);
  EXPECT_EQ(vocab.size(), 6);
  EXPECT_EQ(vocab.token_of(0), "<pad>");
  EXPECT_EQ(vocab.token_of(1), "<unk>");
  EXPECT_EQ(vocab.token_of(2), "<bos>");
  EXPECT_EQ(vocab.token_of(3), "<eos>");
  EXPECT_EQ(vocab.token_of(4), "a");  // frequency 2 outranks frequency 1
  EXPECT_EQ(vocab.token_of(5), "b");
}

TEST(BuildVocab, MinFreqFiltersRareTokens) {
  auto corpus = corpus_of({{"a a b", 0}}, 1);
  auto vocab = seb::build_vocab(corpus, 2, 10);
  EXPECT_EQ(vocab.size(), 5);
  EXPECT_EQ(vocab.token_of(4), "a");
  EXPECT_FALSE(vocab.contains("b"));
}

TEST(BuildVocab, MaxSizeFourKeepsOnlySpecials) {
  auto corpus = corpus_of({{"a a b", 0}}, 1);
  auto vocab = seb::build_vocab(corpus, 1, 4);
  EXPECT_EQ(vocab.size(), 4);
}

TEST(BuildVocab, TiesBreakLexicographically) {
  auto corpus = corpus_of({{"pear apple pear apple mango", 0}}, 1);
  auto vocab = seb::build_vocab(corpus, 1, 10);
  // apple and pear both have frequency 2; apple sorts first.
  EXPECT_EQ(vocab.token_of(4), "apple");
  EXPECT_EQ(vocab.token_of(5), "pear");
  EXPECT_EQ(vocab.token_of(6), "mango");
}

TEST(BuildVocab, DeterministicAcrossCalls) {
  auto corpus = corpus_of(
      {{"the quick brown fox", 0}, {"the lazy dog", 1}, {"the fox", 0}}, 2);
  auto a = seb::build_vocab(corpus, 1, 50);
  auto b = seb::build_vocab(corpus, 1, 50);
  EXPECT_EQ(a.tokens(), b.tokens());
}

TEST(BuildVocab, EmptyCorpusThrows) {
  LabeledCorpus empty;
  empty.num_classes = 2;
  try {
    seb::build_vocab(empty, 1, 10);
    FAIL() << "expected exception";
  } catch (const seb::ConfigError& e) {
    EXPECT_STREQ(e.what(), "empty corpus");
  }
}

TEST(Tokenize, DirectLookup) {
  auto vocab = SubwordVocab::from_tokens(
      {"<pad>", "<unk>", "<bos>", "<eos>", "a", "b"});
  EXPECT_EQ(seb::tokenize("a b", vocab), (std::vector<int>{4, 5}));
}

TEST(Tokenize, EmptyTextGivesEmptySequence) {
  auto vocab =
      SubwordVocab::from_tokens({"<pad>", "<unk>", "<bos>", "<eos>"});
  EXPECT_TRUE(seb::tokenize("", vocab).empty());
}

TEST(Tokenize, UnknownMapsToUnk) {
  auto vocab = SubwordVocab::from_tokens(
      {"<pad>", "<unk>", "<bos>", "<eos>", "a"});
  EXPECT_EQ(seb::tokenize("zzz", vocab), (std::vector<int>{seb::kUnkId}));
}

TEST(Tokenize, CaseInsensitiveLookup) {
  auto vocab = SubwordVocab::from_tokens(
      {"<pad>", "<unk>", "<bos>", "<eos>", "hello"});
  EXPECT_EQ(seb::tokenize("HELLO Hello hello", vocab),
            (std::vector<int>{4, 4, 4}));
}

TEST(Tokenize, NeverEmitsPadOrOutOfRangeIds) {
  auto corpus = corpus_of({{"some words , here . < pad >", 0}}, 1);
  auto vocab = seb::build_vocab(corpus, 1, 100);
  seb::SplitMix64 rng(12);
  std::string gibberish;
  for (int i = 0; i < 500; ++i)
    gibberish += static_cast<char>(rng.next_int(32, 127));
  for (int id : seb::tokenize(gibberish, vocab)) {
    EXPECT_NE(id, seb::kPadId);
    EXPECT_GE(id, 0);
    EXPECT_LT(id, vocab.size());
  }
}

TEST(Detokenize, RoundTripsInVocabText) {
  auto corpus = corpus_of(
      {{"alpha beta gamma delta , . ! epsilon zeta", 0}}, 1);
  auto vocab = seb::build_vocab(corpus, 1, 100);
  seb::SplitMix64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> ids;
    int len = rng.next_int(1, 12);
    for (int i = 0; i < len; ++i)
      ids.push_back(rng.next_int(seb::kNumSpecials, vocab.size()));
    auto text = seb::detokenize(ids, vocab);
    EXPECT_EQ(seb::tokenize(text, vocab), ids);
  }
}

TEST(VocabFile, SaveLoadRoundTrip) {
  auto corpus = corpus_of({{"x y z z y", 0}}, 1);
  auto vocab = seb::build_vocab(corpus, 1, 100);
  auto path = temp_file("roundtrip.vocab");
  seb::save_vocab(vocab, path);
  auto loaded = seb::load_vocab(path);
  EXPECT_EQ(loaded.tokens(), vocab.tokens());
}

TEST(VocabFile, DuplicateTokenThrows) {
  auto path = temp_file("dup.vocab");
  std::ofstream(path) << "<pad>\n<unk>\n<bos>\n<eos>\na\na\n";
  EXPECT_THROW(seb::load_vocab(path), seb::Error);
}

TEST(VocabFile, MissingSpecialThrows) {
  auto path = temp_file("nospecial.vocab");
  std::ofstream(path) << "<pad>\n<bos>\n<eos>\na\n";
  EXPECT_THROW(seb::load_vocab(path), seb::Error);
}

TEST(VocabFile, MissingFileThrows) {
  EXPECT_THROW(seb::load_vocab(temp_file("does_not_exist.vocab")),
               seb::MissingInputError);
}

TEST(CorpusCsv, RoundTripWithAwkwardCharacters) {
  LabeledCorpus corpus = corpus_of(
      {{"plain text", 0},
       {"has, a comma", 1},
       {"has \"quotes\" inside", 0},
       {"line\nbreak and \r carriage", 1},
       {"", 0}},
      2);
  auto path = temp_file("roundtrip.csv");
  seb::save_corpus_csv(corpus, path);
  auto loaded = seb::load_corpus_csv(path);
  ASSERT_EQ(loaded.samples.size(), corpus.samples.size());
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    EXPECT_EQ(loaded.samples[i].text, corpus.samples[i].text) << "row " << i;
    EXPECT_EQ(loaded.samples[i].label, corpus.samples[i].label) << "row " << i;
  }
  EXPECT_EQ(loaded.num_classes, 2);
}

TEST(CorpusCsv, RejectsBadHeader) {
  auto path = temp_file("badheader.csv");
  std::ofstream(path) << "text,label\nhi,0\n";
  EXPECT_THROW(seb::load_corpus_csv(path), seb::ConfigError);
}

TEST(CorpusCsv, RejectsNonIntegerLabel) {
  auto path = temp_file("badlabel.csv");
  std::ofstream(path) << "label,text\npositive,hi\n";
  EXPECT_THROW(seb::load_corpus_csv(path), seb::ConfigError);
}

TEST(CorpusCsv, MissingFileThrows) {
  EXPECT_THROW(seb::load_corpus_csv(temp_file("nope.csv")),
               seb::MissingInputError);
}

TEST(SyntheticCorpus, DeterministicPerSeed) {
  auto a = seb::generate_synthetic_corpus(50, 2, 40, 10, 123);
  auto b = seb::generate_synthetic_corpus(50, 2, 40, 10, 123);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].text, b.samples[i].text);
    EXPECT_EQ(a.samples[i].label, b.samples[i].label);
  }
  auto c = seb::generate_synthetic_corpus(50, 2, 40, 10, 124);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    if (a.samples[i].text != c.samples[i].text) any_diff = true;
  EXPECT_TRUE(any_diff);
}

TEST(SyntheticCorpus, SingleClassGetsAllZeroLabels) {
  auto corpus = seb::generate_synthetic_corpus(20, 1, 10, 5, 9);
  for (const auto& sample : corpus.samples) EXPECT_EQ(sample.label, 0);
}

TEST(SyntheticCorpus, LabelsBalancedAndInRange) {
  auto corpus = seb::generate_synthetic_corpus(100, 4, 40, 8, 5);
  EXPECT_EQ(corpus.num_classes, 4);
  std::vector<int> counts(4, 0);
  for (const auto& sample : corpus.samples) {
    ASSERT_GE(sample.label, 0);
    ASSERT_LT(sample.label, 4);
    ++counts[static_cast<std::size_t>(sample.label)];
  }
  for (int c : counts) EXPECT_EQ(c, 25);
}

TEST(SyntheticCorpus, SampleShape) {
  auto corpus = seb::generate_synthetic_corpus(7, 2, 40, 13, 1);
  ASSERT_EQ(corpus.samples.size(), 7u);
  for (const auto& sample : corpus.samples)
    EXPECT_EQ(seb::split_words(sample.text).size(), 13u);
}

TEST(SyntheticCorpus, ClassesUseDisjointIndicativeWords) {
  auto corpus = seb::generate_synthetic_corpus(200, 2, 40, 20, 3);
  // Words w20..w39 are indicative; even offsets belong to class 0, odd to
  // class 1. Verify no sample contains the other class's indicative words.
  for (const auto& sample : corpus.samples) {
    for (const auto& word : seb::split_words(sample.text)) {
      int id = std::stoi(word.substr(1));
      if (id < 20) continue;  // shared background
      EXPECT_EQ((id - 20) % 2, sample.label) << word;
    }
  }
}

TEST(TopicalSentences, RespectsPoolAndLengthBounds) {
  seb::SplitMix64 rng(42);
  auto sentences = seb::sample_topical_sentences(1000, 80, 16, 20, 30, rng);
  ASSERT_EQ(sentences.size(), 16u);
  std::set<int> used;
  for (const auto& sentence : sentences) {
    EXPECT_GE(sentence.size(), 20u);
    EXPECT_LE(sentence.size(), 30u);
    for (int id : sentence) {
      EXPECT_GE(id, seb::kNumSpecials);
      EXPECT_LT(id, 1000);
      used.insert(id);
    }
  }
  EXPECT_LE(used.size(), 80u);
}

TEST(TopicalSentences, DeterministicPerRngState) {
  seb::SplitMix64 a(9), b(9);
  auto sa = seb::sample_topical_sentences(500, 40, 4, 5, 10, a);
  auto sb = seb::sample_topical_sentences(500, 40, 4, 5, 10, b);
  EXPECT_EQ(sa, sb);
}

TEST(TopicalSentences, RejectsOversizedPool) {
  seb::SplitMix64 rng(1);
  EXPECT_THROW(seb::sample_topical_sentences(10, 7, 1, 1, 1, rng),
               seb::ConfigError);
}

}  // namespace
