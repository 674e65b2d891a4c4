#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "seb/errors.hpp"
#include "seb/model.hpp"
#include "seb/rng.hpp"

namespace seb {

// SUM applies the literal unweighted-sum update; MEAN divides by the number
// of participating clients (the FedAvg-style default).
enum class Aggregation { kSum, kMean };

inline const char* aggregation_name(Aggregation a) {
  return a == Aggregation::kSum ? "sum" : "mean";
}

inline Aggregation aggregation_from_name(const std::string& name) {
  if (name == "sum") return Aggregation::kSum;
  if (name == "mean") return Aggregation::kMean;
  throw ConfigError("unknown aggregation: " + name);
}

struct FLConfig {
  int num_clients = 20;        // N
  int rounds = 100;            // T
  double learning_rate = 0.5;  // η
  int batch_size = 16;
  double participation = 1.0;  // c, fraction of clients sampled per round
  Aggregation aggregation = Aggregation::kMean;
  std::uint64_t seed = 0;
  std::set<int> attack_rounds;  // rounds whose client gradients are kept
  int eval_every = 10;          // 0: evaluate only after the final round
};

inline void validate(const FLConfig& config) {
  if (config.num_clients < 1) throw ConfigError("num_clients must be >= 1");
  if (config.rounds < 0) throw ConfigError("rounds must be >= 0");
  if (!(config.learning_rate > 0.0))
    throw ConfigError("learning_rate must be > 0");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(config.participation > 0.0) || config.participation > 1.0)
    throw ConfigError("participation must be in (0, 1]");
  if (config.eval_every < 0) throw ConfigError("eval_every must be >= 0");
}

struct RoundLog {
  int round = 0;
  std::vector<int> client_ids;
  std::vector<GradientSnapshot> snapshots;  // rounds in attack_rounds only
  double train_loss = 0.0;       // mean of participating clients' losses
  double eval_accuracy = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = 0.0;        // L2 norm of the aggregated gradient
};

// Uniform random partition into N shards whose sizes differ by at most 1:
// shuffle, then deal round-robin.
inline std::vector<std::vector<std::size_t>> partition_indices(
    std::size_t size, int num_clients, std::uint64_t seed) {
  if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
  if (size < static_cast<std::size_t>(num_clients))
    throw ConfigError("fewer samples than clients");
  std::vector<std::size_t> order(size);
  for (std::size_t i = 0; i < size; ++i) order[i] = i;
  SplitMix64 rng(derive_seed(seed, Stream::kPartition));
  shuffle(order, rng);
  std::vector<std::vector<std::size_t>> shards(
      static_cast<std::size_t>(num_clients));
  for (std::size_t i = 0; i < size; ++i)
    shards[i % static_cast<std::size_t>(num_clients)].push_back(order[i]);
  return shards;
}

inline std::vector<std::vector<TokenizedSample>> partition(
    const std::vector<TokenizedSample>& samples, int num_clients,
    std::uint64_t seed) {
  auto index_shards = partition_indices(samples.size(), num_clients, seed);
  std::vector<std::vector<TokenizedSample>> shards;
  shards.reserve(index_shards.size());
  for (const auto& indices : index_shards) {
    std::vector<TokenizedSample> shard;
    shard.reserve(indices.size());
    for (std::size_t idx : indices) shard.push_back(samples[idx]);
    shards.push_back(std::move(shard));
  }
  return shards;
}

// ceil(c * N), the number of clients participating each round.
inline int clients_per_round(const FLConfig& config) {
  int k = static_cast<int>(std::ceil(config.participation *
                                     static_cast<double>(config.num_clients)));
  return std::clamp(k, 1, config.num_clients);
}

// The clients sampled in round t. A fresh stream per round keeps the
// choice independent of everything else and replayable by the attack side.
inline std::vector<int> round_client_sample(const FLConfig& config, int round) {
  SplitMix64 rng(derive_seed(config.seed, Stream::kClientSample,
                             static_cast<std::uint64_t>(round)));
  return sample_without_replacement(config.num_clients,
                                    clients_per_round(config), rng);
}

// Which shard entries client `client_id` uses in round t: min(batch_size,
// shard size) distinct indices, replayable from (seed, round, client).
inline std::vector<int> client_batch_indices(const FLConfig& config, int round,
                                             int client_id,
                                             std::size_t shard_size) {
  SplitMix64 rng(derive_seed(
      config.seed, Stream::kClientBatch,
      static_cast<std::uint64_t>(round) *
              static_cast<std::uint64_t>(config.num_clients) +
          static_cast<std::uint64_t>(client_id)));
  return sample_without_replacement(static_cast<int>(shard_size),
                                    config.batch_size, rng);
}

// One communication round: sample clients, one mini-batch gradient each on
// the round-start parameters, aggregate, apply θ ← θ − η · agg.
inline RoundLog fed_round(TaskModel& model,
                          const std::vector<std::vector<TokenizedSample>>& shards,
                          const ByteMapping* mapping, const FLConfig& config,
                          int round) {
  validate(config);
  if (shards.size() != static_cast<std::size_t>(config.num_clients))
    throw ConfigError("shard count does not match num_clients");

  RoundLog log;
  log.round = round;
  log.client_ids = round_client_sample(config, round);

  const bool keep_snapshots = config.attack_rounds.count(round) > 0;
  GradientSnapshot aggregate = zero_snapshot(model);
  double loss_sum = 0.0;
  for (int client : log.client_ids) {
    const auto& shard = shards[static_cast<std::size_t>(client)];
    if (shard.empty()) throw ConfigError("client shard is empty");
    std::vector<TokenizedSample> batch;
    for (int idx : client_batch_indices(config, round, client, shard.size()))
      batch.push_back(shard[static_cast<std::size_t>(idx)]);

    double loss = 0.0;
    GradientSnapshot snap = compute_gradient(model, batch, mapping, &loss);
    snap.client_id = client;
    snap.round = round;
    loss_sum += loss;
    add_scaled(aggregate, snap, 1.0);
    if (keep_snapshots) log.snapshots.push_back(std::move(snap));
  }
  if (config.aggregation == Aggregation::kMean)
    scale_snapshot(aggregate,
                   1.0 / static_cast<double>(log.client_ids.size()));

  if (!all_finite(aggregate))
    throw DivergenceError("divergence at round " + std::to_string(round));
  apply_update(model, aggregate, -config.learning_rate);
  if (!all_finite(model))
    throw DivergenceError("divergence at round " + std::to_string(round));

  log.train_loss = loss_sum / static_cast<double>(log.client_ids.size());
  log.grad_norm = std::sqrt(squared_norm(aggregate));
  return log;
}

struct TrainResult {
  TaskModel model;
  std::vector<RoundLog> logs;
};

// Full federated loop. Accuracy is evaluated over the given sample set
// every eval_every rounds (and always after the last round); other rounds
// log NaN for accuracy.
inline TrainResult train(TaskModel model,
                         const std::vector<TokenizedSample>& samples,
                         const ByteMapping* mapping, const FLConfig& config) {
  validate(config);
  TrainResult result;
  if (config.rounds == 0) {
    result.model = std::move(model);
    return result;
  }
  auto shards = partition(samples, config.num_clients, config.seed);
  result.logs.reserve(static_cast<std::size_t>(config.rounds));
  for (int t = 0; t < config.rounds; ++t) {
    RoundLog log = fed_round(model, shards, mapping, config, t);
    bool last = t + 1 == config.rounds;
    if (last || (config.eval_every > 0 && (t + 1) % config.eval_every == 0))
      log.eval_accuracy = evaluate(model, samples, mapping);
    result.logs.push_back(std::move(log));
  }
  result.model = std::move(model);
  return result;
}

// -------- Round log CSV --------
//
// Columns: round,client_ids,loss,accuracy,grad_norm. Client ids are
// semicolon-joined. Doubles print with enough digits to round-trip, so
// identical runs produce byte-identical files. Accuracy is empty on
// rounds that were not evaluated.

inline void write_round_csv(const std::vector<RoundLog>& logs,
                            const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write round log: " + path.string());
  os << "round,client_ids,loss,accuracy,grad_norm\n";
  for (const auto& log : logs) {
    os << log.round << ',';
    for (std::size_t i = 0; i < log.client_ids.size(); ++i) {
      if (i > 0) os << ';';
      os << log.client_ids[i];
    }
    os << ',' << format_double(log.train_loss) << ',';
    if (!std::isnan(log.eval_accuracy))
      os << format_double(log.eval_accuracy);
    os << ',' << format_double(log.grad_norm) << '\n';
  }
  if (!os) throw Error("failed writing round log: " + path.string());
}

}  // namespace seb
