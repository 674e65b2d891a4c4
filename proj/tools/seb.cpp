// Command-line front end for the embedding-leakage workbench.
//
// The pipeline is split into independently scriptable stages:
//
//   seb corpus synth    make a synthetic labeled corpus
//   seb vocab build     count words in a corpus into a subword vocabulary
//   seb mapping build   draw an injective subword -> byte-code mapping
//   seb mapping info    describe a stored mapping
//   seb train           run federated training, logging rounds and gradients
//   seb attack          score token extraction against stored gradients
//   seb report          summarize the CSVs a run produced
//
// Every writing command takes an --out directory, refuses to overwrite
// existing files unless --force is given, and finishes by writing a
// run_meta.json manifest describing its settings and outputs.  The
// wall-clock timestamp lives only in run_meta.json, so repeated runs with
// the same settings produce byte-identical data files.
//
// Exit codes: 0 success, 2 configuration error, 3 infeasible mapping,
// 4 training divergence, 5 missing input, 1 anything unexpected.  Errors
// print exactly one "error: ..." line on stderr.  The SEB_SEED environment
// variable, when set, overrides the seed of any command that uses one.

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seb/attack.hpp"
#include "seb/config.hpp"
#include "seb/embedding.hpp"
#include "seb/errors.hpp"
#include "seb/federated.hpp"
#include "seb/mapping.hpp"
#include "seb/model.hpp"
#include "seb/rng.hpp"
#include "seb/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// -------- Shared plumbing --------

// SEB_SEED overrides whatever seed a command was configured with.
void apply_env_seed(std::uint64_t& seed) {
  const char* env = std::getenv("SEB_SEED");
  if (env == nullptr || *env == '\0') return;
  seed = seb::parse_u64(env, "SEB_SEED");
}

std::string iso8601_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// Claims output paths inside one directory, enforcing the overwrite guard
// and remembering every claimed name for the run_meta.json manifest.
class OutputTracker {
 public:
  OutputTracker(fs::path dir, bool force) : dir_(std::move(dir)), force_(force) {
    fs::create_directories(dir_);
  }

  fs::path claim(const std::string& name) {
    fs::path path = dir_ / name;
    if (fs::exists(path) && !force_)
      throw seb::ConfigError("output exists: " + path.string() +
                             " (use --force to overwrite)");
    names_.push_back(name);
    return path;
  }

  // The manifest itself is guarded like any other output but not listed.
  void write_meta(const std::string& command,
                  const std::map<std::string, std::string>& settings,
                  std::uint64_t seed) {
    fs::path path = dir_ / "run_meta.json";
    if (fs::exists(path) && !force_)
      throw seb::ConfigError("output exists: " + path.string() +
                             " (use --force to overwrite)");
    json meta;
    meta["command"] = command;
    meta["config"] = settings;
    meta["config_hash"] = seb::settings_fingerprint(settings);
    meta["seed"] = seed;
    meta["prng_id"] = seb::kPrngId;
    meta["format_versions"] = {{"mapping", seb::kMappingFormatVersion},
                               {"params", seb::kParamsFormatVersion},
                               {"snapshot", seb::kSnapshotFormatVersion}};
    std::sort(names_.begin(), names_.end());
    meta["outputs"] = names_;
    meta["timestamp"] = iso8601_utc_now();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw seb::Error("cannot write manifest: " + path.string());
    os << meta.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  bool force_;
  std::vector<std::string> names_;
};

std::string format_u64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%" PRIu64, v);
  return buf;
}

// -------- corpus synth --------

struct CorpusSynthArgs {
  std::string out;
  int samples = 200;
  int classes = 2;
  int vocab_words = 50;
  int tokens_per_sample = 12;
  std::uint64_t seed = 0;
  bool force = false;
};

void run_corpus_synth(CorpusSynthArgs a) {
  apply_env_seed(a.seed);
  auto corpus = seb::generate_synthetic_corpus(a.samples, a.classes,
                                               a.vocab_words,
                                               a.tokens_per_sample, a.seed);
  OutputTracker outs(a.out, a.force);
  seb::save_corpus_csv(corpus, outs.claim("corpus.csv"));
  outs.write_meta("corpus synth",
                  {{"samples", std::to_string(a.samples)},
                   {"classes", std::to_string(a.classes)},
                   {"vocab_words", std::to_string(a.vocab_words)},
                   {"tokens_per_sample", std::to_string(a.tokens_per_sample)},
                   {"seed", format_u64(a.seed)}},
                  a.seed);
  std::cout << "wrote " << a.samples << " samples, " << a.classes
            << " classes\n";
}

// -------- vocab build --------

struct VocabBuildArgs {
  std::string corpus;
  std::string out;
  int min_freq = 1;
  int max_size = 50000;
  bool force = false;
};

void run_vocab_build(const VocabBuildArgs& a) {
  auto corpus = seb::load_corpus_csv(a.corpus);
  auto vocab = seb::build_vocab(corpus, a.min_freq, a.max_size);
  OutputTracker outs(a.out, a.force);
  seb::save_vocab(vocab, outs.claim("vocab.txt"));
  outs.write_meta("vocab build",
                  {{"corpus", a.corpus},
                   {"min_freq", std::to_string(a.min_freq)},
                   {"max_size", std::to_string(a.max_size)}},
                  0);
  std::cout << "vocabulary size: " << vocab.size() << "\n";
}

// -------- mapping build / info --------

struct MappingBuildArgs {
  std::string vocab;       // path to a vocabulary file...
  int vocab_size = 0;      // ...or an explicit size
  int byte_vocab = 256;
  int code_len = 8;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

void print_mapping_math(int vocab_size, int byte_vocab, int code_len) {
  bool underflow = false;
  double p = seb::collision_probability(byte_vocab, code_len, &underflow);
  std::printf("vocab size: %d\n", vocab_size);
  std::printf("code space: %d^%d\n", byte_vocab, code_len);
  if (underflow)
    std::printf("collision probability: < 1e-300 (underflow)\n");
  else
    std::printf("collision probability: %.6g\n", p);
  bool ok = seb::mapping_feasible(static_cast<std::uint64_t>(vocab_size),
                                  static_cast<std::uint64_t>(byte_vocab),
                                  code_len);
  std::printf("feasible: %s\n", ok ? "yes" : "no");
}

void run_mapping_build(MappingBuildArgs a) {
  apply_env_seed(a.seed);
  int vocab_size = a.vocab_size;
  if (!a.vocab.empty()) {
    if (vocab_size > 0)
      throw seb::ConfigError("give either --vocab or --vocab-size, not both");
    vocab_size = seb::load_vocab(a.vocab).size();
  }
  if (vocab_size <= 0)
    throw seb::ConfigError("one of --vocab or --vocab-size is required");

  print_mapping_math(vocab_size, a.byte_vocab, a.code_len);
  auto mapping = seb::build_mapping(vocab_size, a.byte_vocab, a.code_len, a.seed);
  OutputTracker outs(a.out, a.force);
  seb::save_mapping(mapping, outs.claim("mapping.sebm"));
  outs.write_meta("mapping build",
                  {{"vocab_size", std::to_string(vocab_size)},
                   {"byte_vocab", std::to_string(a.byte_vocab)},
                   {"code_len", std::to_string(a.code_len)},
                   {"seed", format_u64(a.seed)}},
                  a.seed);
}

void run_mapping_info(const std::string& path) {
  auto mapping = seb::load_mapping(path);
  print_mapping_math(mapping.vocab_size, mapping.byte_vocab_size,
                     mapping.bytes_per_subword);
  std::printf("seed: %" PRIu64 "\n", mapping.seed);
  std::printf("prng: %s\n", mapping.prng_id.c_str());
}

// -------- train --------

struct TrainArgs {
  std::string config;
  std::string out;
  bool force = false;
};

std::string snapshot_name(const seb::GradientSnapshot& snap) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "snap_r%03d_c%02d.sebg", snap.round,
                snap.client_id);
  return buf;
}

void run_train(const TrainArgs& a) {
  auto cfg = seb::load_config(a.config);
  seb::reject_unknown_keys(
      cfg, {"corpus", "vocab", "mapping", "variant", "byte_embed", "hidden",
            "output_dim", "with_biases", "init_scale", "clients", "rounds",
            "learning_rate", "batch_size", "participation", "aggregation",
            "seed", "eval_every", "attack_rounds"});

  auto corpus = seb::load_corpus_csv(cfg.require("corpus"));
  auto vocab = seb::load_vocab(cfg.require("vocab"));
  auto variant = seb::variant_from_name(cfg.require("variant"));

  std::optional<seb::ByteMapping> mapping;
  if (seb::is_seb_variant(variant)) {
    mapping = seb::load_mapping(cfg.require("mapping"));
    if (mapping->vocab_size != vocab.size())
      throw seb::ConfigError("mapping covers " +
                             std::to_string(mapping->vocab_size) +
                             " subwords but the vocabulary has " +
                             std::to_string(vocab.size()));
  } else if (cfg.has("mapping")) {
    throw seb::ConfigError("mapping= is only used by byte-composed variants");
  }

  seb::EmbeddingDims dims;
  dims.byte_embed =
      static_cast<int>(seb::parse_int(cfg.get("byte_embed", "512"), "byte_embed"));
  dims.hidden =
      static_cast<int>(seb::parse_int(cfg.get("hidden", "1024"), "hidden"));
  dims.output =
      static_cast<int>(seb::parse_int(cfg.get("output_dim", "512"), "output_dim"));
  if (mapping) {
    dims.byte_vocab = mapping->byte_vocab_size;
    dims.bytes_per_subword = mapping->bytes_per_subword;
  }
  const bool with_biases =
      seb::parse_bool(cfg.get("with_biases", "false"), "with_biases");
  const double init_scale =
      seb::parse_double(cfg.get("init_scale", "0.1"), "init_scale");

  seb::FLConfig fl;
  fl.num_clients =
      static_cast<int>(seb::parse_int(cfg.get("clients", "20"), "clients"));
  fl.rounds = static_cast<int>(seb::parse_int(cfg.get("rounds", "100"), "rounds"));
  fl.learning_rate =
      seb::parse_double(cfg.get("learning_rate", "0.5"), "learning_rate");
  fl.batch_size =
      static_cast<int>(seb::parse_int(cfg.get("batch_size", "16"), "batch_size"));
  fl.participation =
      seb::parse_double(cfg.get("participation", "1.0"), "participation");
  fl.aggregation = seb::aggregation_from_name(cfg.get("aggregation", "mean"));
  fl.seed = seb::parse_u64(cfg.get("seed", "0"), "seed");
  fl.eval_every =
      static_cast<int>(seb::parse_int(cfg.get("eval_every", "10"), "eval_every"));
  for (int r : seb::parse_int_list(cfg.get("attack_rounds", ""), "attack_rounds"))
    fl.attack_rounds.insert(r);
  apply_env_seed(fl.seed);

  auto samples = seb::tokenize_corpus(corpus, vocab);
  auto model = seb::init_model(variant, dims, vocab.size(), corpus.num_classes,
                               fl.seed, init_scale, with_biases);
  auto result =
      seb::train(std::move(model), samples, mapping ? &*mapping : nullptr, fl);

  OutputTracker outs(a.out, a.force);
  seb::write_round_csv(result.logs, outs.claim("rounds.csv"));
  seb::save_model(result.model, outs.claim("model.sebp"));
  std::size_t kept = 0;
  for (const auto& log : result.logs)
    for (const auto& snap : log.snapshots) {
      seb::save_snapshot(snap, outs.claim(snapshot_name(snap)));
      ++kept;
    }

  std::map<std::string, std::string> settings;
  for (const auto& [key, value] : cfg.values) settings[key] = value;
  settings["seed"] = format_u64(fl.seed);  // reflect any SEB_SEED override
  outs.write_meta("train", settings, fl.seed);

  if (result.logs.empty()) {
    std::printf("trained 0 rounds; model saved unchanged\n");
  } else {
    const auto& last = result.logs.back();
    std::printf("trained %d rounds; final loss %.4f, accuracy %.4f; "
                "%zu gradient snapshots kept\n",
                fl.rounds, last.train_loss, last.eval_accuracy, kept);
  }
}

// -------- attack --------

struct AttackArgs {
  std::string config;
  std::string out;
  bool force = false;
};

json report_to_json(const seb::AttackReport& r) {
  json j;
  j["rule"] = seb::expand_rule_name(r.rule);
  j["granularity"] = seb::granularity_name(r.granularity);
  j["prune_ratio"] = r.prune_ratio;
  j["extracted_unit_count"] = r.extracted_unit_count;
  j["candidate_count"] = r.candidate_ids.size();
  j["candidate_ids"] = std::vector<int>(r.candidate_ids.begin(),
                                        r.candidate_ids.end());
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["candidate_fraction"] = r.candidate_fraction;
  j["rouge1"] = r.rouge.rouge1;
  j["rouge2"] = r.rouge.rouge2;
  j["rougeL"] = r.rouge.rougeL;
  return j;
}

void run_attack(const AttackArgs& a) {
  auto cfg = seb::load_config(a.config);
  seb::reject_unknown_keys(
      cfg, {"snapshots", "mapping", "rules", "granularity", "prune_ratios",
            "epsilon", "coverage_ks", "coverage_trials", "batch_stats", "seed"});

  fs::path snapdir = cfg.require("snapshots");
  if (!fs::is_directory(snapdir))
    throw seb::MissingInputError("snapshot directory not found: " +
                                 snapdir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(snapdir))
    if (entry.is_regular_file() && entry.path().extension() == ".sebg")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw seb::MissingInputError("no gradient snapshots in " + snapdir.string());

  std::vector<seb::GradientSnapshot> snapshots;
  snapshots.reserve(files.size());
  bool any_byte_composed = false;
  for (const auto& file : files) {
    snapshots.push_back(seb::load_snapshot(file));
    any_byte_composed |= seb::is_seb_variant(snapshots.back().embedding.variant);
  }

  std::optional<seb::ByteMapping> mapping;
  if (cfg.has("mapping")) mapping = seb::load_mapping(cfg.require("mapping"));
  if (any_byte_composed && !mapping)
    throw seb::MissingInputError(
        "byte-composed snapshots need mapping= in the attack config");

  seb::AttackOptions options;
  options.epsilon = seb::parse_double(cfg.get("epsilon", "1e-12"), "epsilon");
  options.granularity =
      seb::granularity_from_name(cfg.get("granularity", "byte"));
  options.prune_ratios =
      seb::parse_double_list(cfg.get("prune_ratios", "0"), "prune_ratios");
  if (options.prune_ratios.empty()) options.prune_ratios = {0.0};
  std::vector<seb::ExpandRule> rules;
  for (const auto& name : seb::split_list(cfg.get("rules", "loose_any")))
    rules.push_back(seb::expand_rule_from_name(name));
  if (rules.empty()) rules.push_back(seb::ExpandRule::kLooseAny);
  std::uint64_t seed = seb::parse_u64(cfg.get("seed", "0"), "seed");
  apply_env_seed(seed);

  const seb::ByteMapping* map_ptr = mapping ? &*mapping : nullptr;
  OutputTracker outs(a.out, a.force);

  std::vector<seb::AttackReport> all_reports;
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const auto& snap = snapshots[i];
    json j;
    j["round"] = snap.round;
    j["client"] = snap.client_id;
    j["batch_size"] = snap.batch_size;
    json reports = json::array();
    for (seb::ExpandRule rule : rules) {
      options.rule = rule;
      for (double ratio : options.prune_ratios) {
        auto report = seb::attack_snapshot(snap, map_ptr, options, ratio);
        reports.push_back(report_to_json(report));
        if (reports.size() == 1)
          j["true_token_ids"] = std::vector<int>(report.true_token_ids.begin(),
                                                 report.true_token_ids.end());
        all_reports.push_back(std::move(report));
      }
    }
    j["reports"] = std::move(reports);
    char name[64];
    std::snprintf(name, sizeof(name), "attack_%03zu_r%d_c%d.json", i,
                  snap.round, snap.client_id);
    std::ofstream os(outs.claim(name), std::ios::binary);
    os << j.dump(2) << '\n';
    if (!os) throw seb::Error("failed writing attack json");
  }
  seb::save_attack_csv(all_reports, outs.claim("attack.csv"));

  auto coverage_ks =
      seb::parse_int_list(cfg.get("coverage_ks", ""), "coverage_ks");
  if (!coverage_ks.empty()) {
    if (!mapping)
      throw seb::ConfigError("coverage_ks needs mapping= in the attack config");
    int trials = static_cast<int>(
        seb::parse_int(cfg.get("coverage_trials", "200"), "coverage_trials"));
    auto curve = seb::coverage_curve(*mapping, coverage_ks, trials, seed);
    std::ofstream os(outs.claim("coverage.csv"), std::ios::binary);
    seb::write_coverage_csv(curve, os);
    if (!os) throw seb::Error("failed writing coverage.csv");
  }

  if (seb::parse_bool(cfg.get("batch_stats", "false"), "batch_stats")) {
    if (!mapping)
      throw seb::ConfigError("batch_stats needs mapping= in the attack config");
    std::vector<seb::BatchStats> stats;
    for (const auto& snap : snapshots) {
      std::vector<std::vector<int>> batch;
      for (const auto& seq : snap.truth_ids)
        batch.push_back(seb::effective_ids(seq));
      stats.push_back(seb::batch_statistics(batch, *mapping));
    }
    std::ofstream os(outs.claim("batch_stats.csv"), std::ios::binary);
    seb::write_batch_stats_csv(stats, os);
    if (!os) throw seb::Error("failed writing batch_stats.csv");
  }

  std::map<std::string, std::string> settings;
  for (const auto& [key, value] : cfg.values) settings[key] = value;
  settings["seed"] = format_u64(seed);
  outs.write_meta("attack", settings, seed);

  std::printf("attacked %zu snapshots; %zu report rows\n", snapshots.size(),
              all_reports.size());
}

// -------- report --------

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

void summarize_rounds(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::string line;
  std::getline(is, line);  // header
  std::string last_round, last_loss, last_accuracy;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() < 5) continue;
    last_round = fields[0];
    last_loss = fields[2];
    if (!fields[3].empty()) last_accuracy = fields[3];
  }
  std::printf("== training: %s ==\n", path.string().c_str());
  if (last_round.empty()) {
    std::printf("no completed rounds\n");
    return;
  }
  std::printf("final round: %s\n", last_round.c_str());
  std::printf("final loss: %.4f\n", std::strtod(last_loss.c_str(), nullptr));
  if (!last_accuracy.empty())
    std::printf("final accuracy: %.4f\n",
                std::strtod(last_accuracy.c_str(), nullptr));
}

struct MetricSums {
  double precision = 0, recall = 0, fraction = 0;
  double rouge1 = 0, rouge2 = 0, rougeL = 0;
  int count = 0;
};

void summarize_attacks(const std::vector<fs::path>& paths) {
  // Key: rule, granularity, prune ratio (as printed).
  std::map<std::tuple<std::string, std::string, std::string>, MetricSums> groups;
  for (const auto& path : paths) {
    std::ifstream is(path, std::ios::binary);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      auto f = split_fields(line);
      if (f.size() < 11) continue;
      auto& g = groups[{f[2], f[3], f[4]}];
      g.precision += std::strtod(f[5].c_str(), nullptr);
      g.recall += std::strtod(f[6].c_str(), nullptr);
      g.fraction += std::strtod(f[7].c_str(), nullptr);
      g.rouge1 += std::strtod(f[8].c_str(), nullptr);
      g.rouge2 += std::strtod(f[9].c_str(), nullptr);
      g.rougeL += std::strtod(f[10].c_str(), nullptr);
      g.count += 1;
    }
  }
  if (groups.empty()) return;
  std::printf("== attack means (%zu file%s) ==\n", paths.size(),
              paths.size() == 1 ? "" : "s");
  std::printf("%-11s %-14s %-8s %-9s %-9s %-9s %-7s %-7s %-7s %s\n", "rule",
              "granularity", "prune", "precision", "recall", "cand_frac",
              "rouge1", "rouge2", "rougeL", "n");
  for (const auto& [key, g] : groups) {
    const auto& [rule, gran, prune] = key;
    std::printf("%-11s %-14s %-8.4g %-9.4f %-9.4f %-9.4f %-7.4f %-7.4f %-7.4f %d\n",
                rule.c_str(), gran.c_str(), std::strtod(prune.c_str(), nullptr),
                g.precision / g.count, g.recall / g.count, g.fraction / g.count,
                g.rouge1 / g.count, g.rouge2 / g.count, g.rougeL / g.count,
                g.count);
  }
}

void print_param_grid(int hidden, int output) {
  std::printf(
      "embedding parameters (millions), one-hot concat, hidden=%d, "
      "output=%d, no biases\n",
      hidden, output);
  const int byte_vocabs[] = {64, 128, 256};
  const int code_lens[] = {4, 8, 16};
  std::printf("%-10s", "");
  for (int n : code_lens) std::printf(" n=%-6d", n);
  std::printf("\n");
  for (int vb : byte_vocabs) {
    std::printf("vb=%-7d", vb);
    for (int n : code_lens) {
      seb::EmbeddingDims dims;
      dims.hidden = hidden;
      dims.output = output;
      dims.byte_vocab = vb;
      dims.bytes_per_subword = n;
      auto count = seb::param_count(seb::Variant::kSebConcatOneHot, dims, 0,
                                    /*include_biases=*/false);
      std::printf(" %-8.2f", static_cast<double>(count) / 1e6);
    }
    std::printf("\n");
  }
}

void summarize_model(const fs::path& path) {
  auto model = seb::load_model(path);
  const auto& emb = model.embedding;
  std::printf("== model: %s ==\n", path.string().c_str());
  std::printf("variant: %s; vocab: %d; classes: %d\n",
              seb::variant_name(emb.variant), emb.vocab_size, model.num_classes);
  if (seb::is_seb_variant(emb.variant))
    std::printf("code: %d bytes over an alphabet of %d\n",
                emb.dims.bytes_per_subword, emb.dims.byte_vocab);
  auto count = seb::param_count(emb.variant, emb.dims, emb.vocab_size,
                                emb.has_biases);
  std::printf("embedding parameters: %" PRId64 " (%.2f M)\n", count,
              static_cast<double>(count) / 1e6);
}

void run_report(const std::string& dir) {
  fs::path root(dir);
  if (!fs::is_directory(root))
    throw seb::MissingInputError("no results found");
  std::vector<fs::path> rounds, attacks, models;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name == "rounds.csv") rounds.push_back(entry.path());
    else if (name == "attack.csv") attacks.push_back(entry.path());
    else if (entry.path().extension() == ".sebp") models.push_back(entry.path());
  }
  std::sort(rounds.begin(), rounds.end());
  std::sort(attacks.begin(), attacks.end());
  std::sort(models.begin(), models.end());
  if (rounds.empty() && attacks.empty())
    throw seb::MissingInputError("no results found");

  for (const auto& path : rounds) summarize_rounds(path);
  summarize_attacks(attacks);
  for (const auto& path : models) summarize_model(path);
  print_param_grid(1024, 512);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated-learning token-leakage workbench"};
  app.require_subcommand(1);

  CorpusSynthArgs corpus_args;
  auto* corpus = app.add_subcommand("corpus", "corpus utilities");
  corpus->require_subcommand(1);
  auto* synth = corpus->add_subcommand("synth", "generate a labeled corpus");
  synth->add_option("--out", corpus_args.out, "output directory")->required();
  synth->add_option("--samples", corpus_args.samples, "number of samples");
  synth->add_option("--classes", corpus_args.classes, "number of labels");
  synth->add_option("--vocab-words", corpus_args.vocab_words,
                    "distinct words to draw from");
  synth->add_option("--tokens-per-sample", corpus_args.tokens_per_sample,
                    "words per sample");
  synth->add_option("--seed", corpus_args.seed, "generator seed");
  synth->add_flag("--force", corpus_args.force, "overwrite existing outputs");
  synth->callback([&] { run_corpus_synth(corpus_args); });

  VocabBuildArgs vocab_args;
  auto* vocab = app.add_subcommand("vocab", "vocabulary utilities");
  vocab->require_subcommand(1);
  auto* vbuild = vocab->add_subcommand("build", "build a vocabulary from a corpus");
  vbuild->add_option("--corpus", vocab_args.corpus, "corpus CSV")->required();
  vbuild->add_option("--out", vocab_args.out, "output directory")->required();
  vbuild->add_option("--min-freq", vocab_args.min_freq, "minimum word count");
  vbuild->add_option("--max-size", vocab_args.max_size, "vocabulary cap");
  vbuild->add_flag("--force", vocab_args.force, "overwrite existing outputs");
  vbuild->callback([&] { run_vocab_build(vocab_args); });

  MappingBuildArgs mapping_args;
  std::string mapping_info_path;
  auto* mapping = app.add_subcommand("mapping", "byte-code mapping utilities");
  mapping->require_subcommand(1);
  auto* mbuild = mapping->add_subcommand("build", "draw an injective byte-code mapping");
  mbuild->add_option("--vocab", mapping_args.vocab, "vocabulary file");
  mbuild->add_option("--vocab-size", mapping_args.vocab_size,
                     "vocabulary size (alternative to --vocab)");
  mbuild->add_option("--vb", mapping_args.byte_vocab, "byte alphabet size");
  mbuild->add_option("--n", mapping_args.code_len, "bytes per subword");
  mbuild->add_option("--seed", mapping_args.seed, "sampling seed");
  mbuild->add_option("--out", mapping_args.out, "output directory")->required();
  mbuild->add_flag("--force", mapping_args.force, "overwrite existing outputs");
  mbuild->callback([&] { run_mapping_build(mapping_args); });
  auto* minfo = mapping->add_subcommand("info", "describe a stored mapping");
  minfo->add_option("--mapping", mapping_info_path, "mapping file")->required();
  minfo->callback([&] { run_mapping_info(mapping_info_path); });

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run federated training");
  train->add_option("--config", train_args.config, "key=value config file")
      ->required();
  train->add_option("--out", train_args.out, "output directory")->required();
  train->add_flag("--force", train_args.force, "overwrite existing outputs");
  train->callback([&] { run_train(train_args); });

  AttackArgs attack_args;
  auto* attack = app.add_subcommand("attack", "attack stored gradient snapshots");
  attack->add_option("--config", attack_args.config, "key=value config file")
      ->required();
  attack->add_option("--out", attack_args.out, "output directory")->required();
  attack->add_flag("--force", attack_args.force, "overwrite existing outputs");
  attack->callback([&] { run_attack(attack_args); });

  std::string report_dir;
  auto* report = app.add_subcommand("report", "summarize run outputs");
  report->add_option("--dir", report_dir, "directory holding run outputs")
      ->required();
  report->callback([&] { run_report(report_dir); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const seb::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const seb::InfeasibleMappingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const seb::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const seb::MissingInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
