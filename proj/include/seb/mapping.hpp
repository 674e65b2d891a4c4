#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "seb/errors.hpp"
#include "seb/rng.hpp"
#include "seb/serialize.hpp"
#include "seb/text.hpp"

namespace seb {

// Injective map from subword ids to fixed-length byte sequences. Byte
// values live in the abstract alphabet [0, byte_vocab_size); they are not
// UTF-8 bytes. Row i is the sequence for subword id i.
struct ByteMapping {
  std::vector<std::uint8_t> table;  // vocab_size x bytes_per_subword
  int vocab_size = 0;               // V_w
  int byte_vocab_size = 0;          // V_b, in {2..256}
  int bytes_per_subword = 0;        // n
  std::uint64_t seed = 0;
  std::string prng_id;

  std::span<const std::uint8_t> row(int subword_id) const {
    if (subword_id < 0 || subword_id >= vocab_size)
      throw Error("subword id out of range for mapping");
    return {table.data() +
                static_cast<std::size_t>(subword_id) *
                    static_cast<std::size_t>(bytes_per_subword),
            static_cast<std::size_t>(bytes_per_subword)};
  }
};

inline std::span<const std::uint8_t> lookup(const ByteMapping& mapping,
                                            int subword_id) {
  return mapping.row(subword_id);
}

// True when V_w <= V_b^n, i.e. an injective assignment exists. Saturates
// instead of overflowing (256^8 does not fit in 64 bits).
inline bool mapping_feasible(std::uint64_t vocab_size,
                             std::uint64_t byte_vocab_size,
                             int bytes_per_subword) {
  std::uint64_t capacity = 1;
  for (int i = 0; i < bytes_per_subword; ++i) {
    if (capacity >= vocab_size) return true;
    if (capacity > std::numeric_limits<std::uint64_t>::max() / byte_vocab_size)
      return true;
    capacity *= byte_vocab_size;
  }
  return capacity >= vocab_size;
}

// Probability that two independently drawn byte sequences coincide:
// exactly 1 / V_b^n. Values below the double range come back as 0.0 with
// *underflow set when the caller provides it.
inline double collision_probability(int byte_vocab_size, int bytes_per_subword,
                                    bool* underflow = nullptr) {
  if (byte_vocab_size < 2) throw ConfigError("byte vocab size must be >= 2");
  if (bytes_per_subword < 1)
    throw ConfigError("bytes per subword must be >= 1");
  if (underflow) *underflow = false;
  double denom = std::pow(static_cast<double>(byte_vocab_size),
                          static_cast<double>(bytes_per_subword));
  if (!std::isfinite(denom)) {
    if (underflow) *underflow = true;
    return 0.0;
  }
  double p = 1.0 / denom;
  if (p == 0.0 && underflow) *underflow = true;
  return p;
}

// One uniform row of n byte values in [0, V_b), with replacement. Shared by
// the mapping builder and by collision-rate experiments that sample without
// the injectivity constraint.
inline std::vector<std::uint8_t> sample_byte_row(int byte_vocab_size,
                                                 int bytes_per_subword,
                                                 SplitMix64& rng) {
  std::vector<std::uint8_t> row(static_cast<std::size_t>(bytes_per_subword));
  for (auto& b : row)
    b = static_cast<std::uint8_t>(
        rng.next_below(static_cast<std::uint64_t>(byte_vocab_size)));
  return row;
}

// Builds the mapping by rejection sampling: draw each row uniformly and
// redraw while it duplicates an earlier row. Deterministic per
// (vocab_size, V_b, n, seed). The resample budget (default 1000 * V_w)
// turns a pathological load factor into an error instead of a hang;
// max_resamples exists so tests can exercise that path.
inline ByteMapping build_mapping(
    int vocab_size, int byte_vocab_size, int bytes_per_subword,
    std::uint64_t seed,
    std::optional<std::uint64_t> max_resamples = std::nullopt) {
  if (vocab_size < 1) throw ConfigError("vocab size must be >= 1");
  if (byte_vocab_size < 2 || byte_vocab_size > 256)
    throw ConfigError("byte vocab size must be in [2, 256]");
  if (bytes_per_subword < 1)
    throw ConfigError("bytes per subword must be >= 1");
  if (!mapping_feasible(static_cast<std::uint64_t>(vocab_size),
                        static_cast<std::uint64_t>(byte_vocab_size),
                        bytes_per_subword))
    throw InfeasibleMappingError("mapping infeasible");

  std::uint64_t budget = max_resamples.value_or(
      1000ULL * static_cast<std::uint64_t>(vocab_size));

  ByteMapping mapping;
  mapping.vocab_size = vocab_size;
  mapping.byte_vocab_size = byte_vocab_size;
  mapping.bytes_per_subword = bytes_per_subword;
  mapping.seed = seed;
  mapping.prng_id = kPrngId;
  mapping.table.reserve(static_cast<std::size_t>(vocab_size) *
                        static_cast<std::size_t>(bytes_per_subword));

  SplitMix64 rng(derive_seed(seed, Stream::kMapping));
  std::unordered_set<std::string> seen;
  seen.reserve(static_cast<std::size_t>(vocab_size) * 2);
  std::uint64_t resamples = 0;
  for (int i = 0; i < vocab_size; ++i) {
    for (;;) {
      auto row = sample_byte_row(byte_vocab_size, bytes_per_subword, rng);
      std::string key(reinterpret_cast<const char*>(row.data()), row.size());
      if (seen.insert(std::move(key)).second) {
        mapping.table.insert(mapping.table.end(), row.begin(), row.end());
        break;
      }
      if (++resamples > budget) throw Error("rejection budget exceeded");
    }
  }
  return mapping;
}

inline ByteMapping build_mapping(
    const SubwordVocab& vocab, int byte_vocab_size, int bytes_per_subword,
    std::uint64_t seed,
    std::optional<std::uint64_t> max_resamples = std::nullopt) {
  return build_mapping(vocab.size(), byte_vocab_size, bytes_per_subword, seed,
                       max_resamples);
}

// -------- Binary mapping file ("SEBM") --------
//
// Little-endian layout:
//   magic "SEBM" | version u16 | V_b u16 | n u16 | V_w u32 | seed u64 |
//   prng_id (u16 length + bytes) | table V_w*n bytes row-major

inline constexpr std::uint16_t kMappingFormatVersion = 1;

inline void save_mapping(const ByteMapping& mapping,
                         const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write mapping file: " + path.string());
  os.write("SEBM", 4);
  write_u16(os, kMappingFormatVersion);
  write_u16(os, static_cast<std::uint16_t>(mapping.byte_vocab_size));
  write_u16(os, static_cast<std::uint16_t>(mapping.bytes_per_subword));
  write_u32(os, static_cast<std::uint32_t>(mapping.vocab_size));
  write_u64(os, mapping.seed);
  write_string(os, mapping.prng_id);
  os.write(reinterpret_cast<const char*>(mapping.table.data()),
           static_cast<std::streamsize>(mapping.table.size()));
  if (!os) throw Error("failed writing mapping file: " + path.string());
}

inline ByteMapping load_mapping(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw MissingInputError("cannot open mapping file: " + path.string());
  char magic[4];
  read_exact(is, magic, 4);
  if (std::string(magic, 4) != "SEBM")
    throw Error("bad magic in mapping file");
  std::uint16_t version = read_u16(is);
  if (version != kMappingFormatVersion)
    throw Error("unsupported mapping file version");

  ByteMapping mapping;
  mapping.byte_vocab_size = read_u16(is);
  mapping.bytes_per_subword = read_u16(is);
  mapping.vocab_size = static_cast<int>(read_u32(is));
  mapping.seed = read_u64(is);
  mapping.prng_id = read_string(is);
  if (mapping.byte_vocab_size < 2 || mapping.byte_vocab_size > 256)
    throw Error("mapping file byte vocab size out of range");
  if (mapping.bytes_per_subword < 1)
    throw Error("mapping file bytes-per-subword out of range");
  if (mapping.vocab_size < 1) throw Error("mapping file vocab size invalid");

  std::size_t total = static_cast<std::size_t>(mapping.vocab_size) *
                      static_cast<std::size_t>(mapping.bytes_per_subword);
  mapping.table.resize(total);
  read_exact(is, reinterpret_cast<char*>(mapping.table.data()), total);

  std::unordered_set<std::string> seen;
  seen.reserve(static_cast<std::size_t>(mapping.vocab_size) * 2);
  for (int i = 0; i < mapping.vocab_size; ++i) {
    auto row = mapping.row(i);
    for (auto b : row)
      if (b >= mapping.byte_vocab_size)
        throw Error("mapping file contains byte value out of range");
    if (!seen
             .emplace(reinterpret_cast<const char*>(row.data()), row.size())
             .second)
      throw Error("mapping file violates injectivity");
  }
  return mapping;
}

}  // namespace seb
