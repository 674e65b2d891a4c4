#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "seb/mapping.hpp"
#include "seb/serialize.hpp"

namespace {

using seb::ByteMapping;
using seb::SplitMix64;

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "seb_mapping_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

TEST(CollisionProbability, MatchesClosedFormSmallCases) {
  // 1 / 16^4 and 1 / 128^8, quoted to limited precision upstream, so the
  // check is 5% relative.
  EXPECT_NEAR(seb::collision_probability(16, 4), 1.5e-5, 0.05 * 1.5e-5);
  EXPECT_NEAR(seb::collision_probability(128, 8), 1.39e-17,
              0.05 * 1.39e-17);
  EXPECT_DOUBLE_EQ(seb::collision_probability(2, 1), 0.5);
}

TEST(CollisionProbability, ExactForPowersOfTwo) {
  EXPECT_DOUBLE_EQ(seb::collision_probability(16, 4), 1.0 / 65536.0);
  EXPECT_DOUBLE_EQ(seb::collision_probability(256, 1), 1.0 / 256.0);
}

TEST(CollisionProbability, UnderflowFlagged) {
  bool underflow = false;
  double p = seb::collision_probability(256, 200, &underflow);
  EXPECT_EQ(p, 0.0);
  EXPECT_TRUE(underflow);

  underflow = true;
  p = seb::collision_probability(256, 8, &underflow);
  EXPECT_GT(p, 0.0);
  EXPECT_FALSE(underflow);
}

TEST(CollisionProbability, RejectsBadArguments) {
  EXPECT_THROW(seb::collision_probability(1, 4), seb::ConfigError);
  EXPECT_THROW(seb::collision_probability(16, 0), seb::ConfigError);
}

TEST(CollisionProbability, EmpiricalRateOfUnconstrainedSampling) {
  // Two independently drawn rows collide with probability 1/V_b^n. With
  // V_b=4, n=2 the rate is 1/16; a million trials must land within 3
  // binomial standard deviations.
  const int trials = 1000000;
  const double p = 1.0 / 16.0;
  SplitMix64 rng(2024);
  int collisions = 0;
  for (int t = 0; t < trials; ++t) {
    auto a = seb::sample_byte_row(4, 2, rng);
    auto b = seb::sample_byte_row(4, 2, rng);
    if (a == b) ++collisions;
  }
  double rate = static_cast<double>(collisions) / trials;
  double sigma = std::sqrt(p * (1.0 - p) / trials);
  EXPECT_NEAR(rate, p, 3.0 * sigma);
}

TEST(BuildMapping, SingleRowShapeAndRange) {
  auto mapping = seb::build_mapping(1, 64, 4, 7);
  EXPECT_EQ(mapping.vocab_size, 1);
  EXPECT_EQ(mapping.table.size(), 4u);
  for (auto b : mapping.row(0)) EXPECT_LT(b, 64);
}

TEST(BuildMapping, SaturatedCodomainForcesPermutation) {
  // V_w = V_b^n means every possible sequence must appear exactly once.
  auto mapping = seb::build_mapping(256, 256, 1, 3);
  std::set<std::uint8_t> values(mapping.table.begin(), mapping.table.end());
  EXPECT_EQ(mapping.table.size(), 256u);
  EXPECT_EQ(values.size(), 256u);
}

TEST(BuildMapping, RowsArePairwiseDistinct) {
  auto mapping = seb::build_mapping(2000, 16, 4, 11);
  std::set<std::vector<std::uint8_t>> rows;
  for (int i = 0; i < mapping.vocab_size; ++i) {
    auto row = mapping.row(i);
    rows.emplace(row.begin(), row.end());
  }
  EXPECT_EQ(rows.size(), 2000u);
}

TEST(BuildMapping, DeterministicPerSeed) {
  auto a = seb::build_mapping(500, 256, 8, 42);
  auto b = seb::build_mapping(500, 256, 8, 42);
  EXPECT_EQ(a.table, b.table);
  auto c = seb::build_mapping(500, 256, 8, 43);
  EXPECT_NE(a.table, c.table);
}

TEST(BuildMapping, VocabOverloadUsesVocabSize) {
  auto vocab = seb::SubwordVocab::from_tokens(
      {"<pad>", "<unk>", "<bos>", "<eos>", "a", "b"});
  auto from_vocab = seb::build_mapping(vocab, 16, 3, 9);
  auto from_size = seb::build_mapping(6, 16, 3, 9);
  EXPECT_EQ(from_vocab.table, from_size.table);
}

TEST(BuildMapping, InfeasibleSizeThrows) {
  try {
    seb::build_mapping(300, 16, 2, 1);  // 16^2 = 256 < 300
    FAIL() << "expected exception";
  } catch (const seb::InfeasibleMappingError& e) {
    EXPECT_STREQ(e.what(), "mapping infeasible");
  }
  EXPECT_THROW(seb::build_mapping(3, 2, 1, 1), seb::InfeasibleMappingError);
}

TEST(BuildMapping, ExactlyFeasibleBoundarySucceeds) {
  auto mapping = seb::build_mapping(256, 16, 2, 0);
  EXPECT_EQ(mapping.table.size(), 512u);
}

TEST(BuildMapping, RejectsBadParameters) {
  EXPECT_THROW(seb::build_mapping(0, 16, 2, 1), seb::ConfigError);
  EXPECT_THROW(seb::build_mapping(10, 1, 2, 1), seb::ConfigError);
  EXPECT_THROW(seb::build_mapping(10, 257, 2, 1), seb::ConfigError);
  EXPECT_THROW(seb::build_mapping(10, 16, 0, 1), seb::ConfigError);
}

TEST(BuildMapping, ExhaustedResampleBudgetThrows) {
  // With a zero budget any duplicate draw errors out. Drawing 2 one-byte
  // rows from a 2-value alphabet collides for about half of all seeds, so
  // a small seed sweep must hit both outcomes.
  int failures = 0;
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    try {
      seb::build_mapping(2, 2, 1, seed, std::uint64_t{0});
      ++successes;
    } catch (const seb::Error& e) {
      EXPECT_STREQ(e.what(), "rejection budget exceeded");
      ++failures;
    }
  }
  EXPECT_GT(failures, 0);
  EXPECT_GT(successes, 0);
}

TEST(MappingFeasible, SaturatesInsteadOfOverflowing) {
  EXPECT_TRUE(seb::mapping_feasible(50000, 256, 8));   // 256^8 = 2^64
  EXPECT_TRUE(seb::mapping_feasible(1000000, 2, 64));  // 2^64 again
  EXPECT_FALSE(seb::mapping_feasible(3, 2, 1));
  EXPECT_TRUE(seb::mapping_feasible(2, 2, 1));
}

TEST(BuildMapping, MarginalByteFrequenciesNearUniform) {
  // Aggregated over 20 seeds, each byte value's frequency must sit within
  // 5 binomial standard deviations of uniform. The load factor is kept low
  // (500 / 8^4) so rejection barely perturbs the marginals.
  const int vb = 8, n = 4, vw = 500, seeds = 20;
  std::vector<std::int64_t> counts(vb, 0);
  for (int s = 0; s < seeds; ++s) {
    auto mapping = seb::build_mapping(vw, vb, n, 1000 + s);
    for (auto b : mapping.table) ++counts[b];
  }
  const double total = static_cast<double>(vw) * n * seeds;
  const double p = 1.0 / vb;
  const double sigma = std::sqrt(total * p * (1.0 - p));
  for (int b = 0; b < vb; ++b) {
    EXPECT_NEAR(static_cast<double>(counts[b]), total * p, 5.0 * sigma)
        << "byte value " << b;
  }
}

TEST(Lookup, ReturnsStoredRow) {
  auto mapping = seb::build_mapping(10, 16, 3, 5);
  auto row = seb::lookup(mapping, 0);
  ASSERT_EQ(row.size(), 3u);
  EXPECT_EQ(row[0], mapping.table[0]);
  EXPECT_EQ(row[1], mapping.table[1]);
  EXPECT_EQ(row[2], mapping.table[2]);
}

TEST(Lookup, OutOfRangeThrows) {
  auto mapping = seb::build_mapping(10, 16, 3, 5);
  EXPECT_THROW(seb::lookup(mapping, 10), seb::Error);
  EXPECT_THROW(seb::lookup(mapping, -1), seb::Error);
}

TEST(MappingFile, RoundTripPreservesEverything) {
  auto mapping = seb::build_mapping(300, 256, 8, 77);
  auto path = temp_file("roundtrip.sebm");
  seb::save_mapping(mapping, path);
  auto loaded = seb::load_mapping(path);
  EXPECT_EQ(loaded.table, mapping.table);
  EXPECT_EQ(loaded.vocab_size, mapping.vocab_size);
  EXPECT_EQ(loaded.byte_vocab_size, mapping.byte_vocab_size);
  EXPECT_EQ(loaded.bytes_per_subword, mapping.bytes_per_subword);
  EXPECT_EQ(loaded.seed, mapping.seed);
  EXPECT_EQ(loaded.prng_id, mapping.prng_id);
  for (int i = 0; i < 300; ++i) {
    auto before = seb::lookup(mapping, i);
    auto after = seb::lookup(loaded, i);
    EXPECT_TRUE(std::equal(before.begin(), before.end(), after.begin()));
  }
}

TEST(MappingFile, TruncatedFileThrows) {
  auto mapping = seb::build_mapping(50, 16, 4, 1);
  auto path = temp_file("truncated.sebm");
  seb::save_mapping(mapping, path);
  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 10);
  EXPECT_THROW(seb::load_mapping(path), seb::Error);
}

TEST(MappingFile, BadMagicThrows) {
  auto path = temp_file("badmagic.sebm");
  std::ofstream(path, std::ios::binary) << "NOPE garbage";
  EXPECT_THROW(seb::load_mapping(path), seb::Error);
}

TEST(MappingFile, ByteVocabOutOfRangeThrows) {
  auto path = temp_file("vb300.sebm");
  {
    std::ofstream os(path, std::ios::binary);
    os.write("SEBM", 4);
    seb::write_u16(os, 1);    // version
    seb::write_u16(os, 300);  // V_b out of range
    seb::write_u16(os, 2);    // n
    seb::write_u32(os, 1);    // V_w
    seb::write_u64(os, 0);    // seed
    seb::write_string(os, "splitmix64");
    os.put(0);
    os.put(1);
  }
  EXPECT_THROW(seb::load_mapping(path), seb::Error);
}

TEST(MappingFile, DuplicateRowsThrow) {
  auto path = temp_file("duprows.sebm");
  {
    std::ofstream os(path, std::ios::binary);
    os.write("SEBM", 4);
    seb::write_u16(os, 1);
    seb::write_u16(os, 16);
    seb::write_u16(os, 2);
    seb::write_u32(os, 2);  // two rows...
    seb::write_u64(os, 0);
    seb::write_string(os, "splitmix64");
    for (int i = 0; i < 2; ++i) {  // ...both (3, 9)
      os.put(3);
      os.put(9);
    }
  }
  try {
    seb::load_mapping(path);
    FAIL() << "expected exception";
  } catch (const seb::Error& e) {
    EXPECT_STREQ(e.what(), "mapping file violates injectivity");
  }
}

TEST(MappingFile, MissingFileThrows) {
  EXPECT_THROW(seb::load_mapping(temp_file("missing.sebm")),
               seb::MissingInputError);
}

}  // namespace
