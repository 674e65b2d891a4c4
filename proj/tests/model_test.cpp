#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "seb/model.hpp"

namespace {

using seb::ByteMapping;
using seb::EmbeddingDims;
using seb::GradientSnapshot;
using seb::Matrix;
using seb::ModelCache;
using seb::SplitMix64;
using seb::TaskModel;
using seb::TokenizedSample;
using seb::Variant;

const Variant kAllVariants[] = {Variant::kSubword, Variant::kSebAddReal,
                                Variant::kSebConcatReal,
                                Variant::kSebConcatOneHot};

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "seb_model_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

EmbeddingDims tiny_dims() {
  EmbeddingDims dims;
  dims.byte_embed = 4;
  dims.hidden = 6;
  dims.output = 5;
  dims.bytes_per_subword = 2;
  dims.byte_vocab = 8;
  return dims;
}

std::vector<double*> scalar_ptrs(seb::EmbeddingParams& p) {
  std::vector<double*> out;
  for (double& x : p.subword.data) out.push_back(&x);
  for (double& x : p.byte.data) out.push_back(&x);
  for (double& x : p.w1.data) out.push_back(&x);
  for (double& x : p.w2.data) out.push_back(&x);
  for (double& x : p.b1) out.push_back(&x);
  for (double& x : p.b2) out.push_back(&x);
  return out;
}

std::vector<double*> model_scalar_ptrs(TaskModel& m) {
  auto out = scalar_ptrs(m.embedding);
  for (double& x : m.head.data) out.push_back(&x);
  for (double& x : m.head_bias) out.push_back(&x);
  return out;
}

std::vector<double*> snapshot_scalar_ptrs(GradientSnapshot& s) {
  auto out = scalar_ptrs(s.embedding);
  for (double& x : s.head.data) out.push_back(&x);
  for (double& x : s.head_bias) out.push_back(&x);
  return out;
}

std::vector<TokenizedSample> mixed_batch() {
  return {{{1, 4, 4}, 0},
          {{7, 2}, 1},
          {{}, 0},                  // empty: becomes a single <unk>
          {{5, seb::kPadId, 6}, 1}};  // pad is masked out of the mean
}

TEST(ForwardLoss, ZeroParamsGiveLogNumClasses) {
  EmbeddingDims dims = tiny_dims();
  auto mapping = seb::build_mapping(10, dims.byte_vocab,
                                    dims.bytes_per_subword, 1);
  for (Variant v : kAllVariants) {
    for (int classes : {2, 3, 5}) {
      auto model = seb::init_model(v, dims, 10, classes, 1, 0.0);
      const ByteMapping* map_ptr = v == Variant::kSubword ? nullptr : &mapping;
      double loss = seb::forward_loss(model, mixed_batch() , map_ptr);
      EXPECT_DOUBLE_EQ(loss, std::log(static_cast<double>(classes)))
          << seb::variant_name(v);
    }
  }
}

TEST(ForwardLoss, LargeCorrectLogitDrivesLossToZero) {
  auto model = seb::init_model(Variant::kSubword, tiny_dims(), 10, 2, 1, 0.0);
  model.head_bias = {30.0, 0.0};
  double loss = seb::forward_loss(model, {{{4, 5}, 0}}, nullptr);
  EXPECT_LT(loss, 1e-12);
  EXPECT_GT(loss, 0.0);
}

TEST(ForwardLoss, DuplicatingTheBatchKeepsTheMean) {
  EmbeddingDims dims = tiny_dims();
  auto model = seb::init_model(Variant::kSubword, dims, 10, 2, 3, 0.4);
  auto batch = mixed_batch();
  double once = seb::forward_loss(model, batch, nullptr);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  double twice = seb::forward_loss(model, doubled, nullptr);
  EXPECT_NEAR(once, twice, 1e-12);
}

TEST(ForwardLoss, PermutationInvariantOverTheBatch) {
  EmbeddingDims dims = tiny_dims();
  auto mapping = seb::build_mapping(10, dims.byte_vocab,
                                    dims.bytes_per_subword, 4);
  auto model = seb::init_model(Variant::kSebConcatOneHot, dims, 10, 2, 3, 0.4);
  auto batch = mixed_batch();
  double forward = seb::forward_loss(model, batch, &mapping);
  std::reverse(batch.begin(), batch.end());
  double reversed = seb::forward_loss(model, batch, &mapping);
  EXPECT_NEAR(forward, reversed, 1e-12);
}

TEST(ForwardLoss, PadPositionsAreMaskedFromTheMean) {
  EmbeddingDims dims = tiny_dims();
  auto model = seb::init_model(Variant::kSubword, dims, 10, 2, 5, 0.4);
  double with_pads =
      seb::forward_loss(model, {{{5, seb::kPadId, 6, seb::kPadId}, 1}},
                        nullptr);
  double without = seb::forward_loss(model, {{{5, 6}, 1}}, nullptr);
  EXPECT_DOUBLE_EQ(with_pads, without);
}

TEST(ForwardLoss, EmptySequenceActsAsSingleUnk) {
  auto model = seb::init_model(Variant::kSubword, tiny_dims(), 10, 2, 5, 0.4);
  double empty = seb::forward_loss(model, {{{}, 0}}, nullptr);
  double unk = seb::forward_loss(model, {{{seb::kUnkId}, 0}}, nullptr);
  EXPECT_DOUBLE_EQ(empty, unk);
}

TEST(ForwardLoss, RejectsBadInput) {
  auto model = seb::init_model(Variant::kSubword, tiny_dims(), 10, 2, 1, 0.1);
  EXPECT_THROW(seb::forward_loss(model, {}, nullptr), seb::Error);
  EXPECT_THROW(seb::forward_loss(model, {{{1}, 2}}, nullptr), seb::Error);
  EXPECT_THROW(seb::forward_loss(model, {{{1}, -1}}, nullptr), seb::Error);
}

TEST(Backward, FiniteDifferenceAgreementFullModel) {
  for (Variant v : kAllVariants) {
    EmbeddingDims dims = tiny_dims();
    std::uint64_t seed = 500 + static_cast<std::uint64_t>(v);
    auto mapping = seb::build_mapping(10, dims.byte_vocab,
                                      dims.bytes_per_subword, seed);
    auto model = seb::init_model(v, dims, 10, 3, seed, 0.5, true);
    const ByteMapping* map_ptr = v == Variant::kSubword ? nullptr : &mapping;
    std::vector<TokenizedSample> batch = {
        {{1, 4}, 0}, {{7, 2, 7}, 2}, {{9}, 1}};

    auto snap = seb::compute_gradient(model, batch, map_ptr);
    auto params_view = model_scalar_ptrs(model);
    auto grads_view = snapshot_scalar_ptrs(snap);
    ASSERT_EQ(params_view.size(), grads_view.size());

    const double step = 1e-6;
    for (std::size_t k = 0; k < params_view.size(); ++k) {
      double original = *params_view[k];
      *params_view[k] = original + step;
      double up = seb::forward_loss(model, batch, map_ptr);
      *params_view[k] = original - step;
      double down = seb::forward_loss(model, batch, map_ptr);
      *params_view[k] = original;
      double numeric = (up - down) / (2.0 * step);
      double analytic = *grads_view[k];
      double abs_diff = std::fabs(analytic - numeric);
      double denom = std::max(std::fabs(analytic), std::fabs(numeric));
      double rel = denom > 0.0 ? abs_diff / denom : 0.0;
      EXPECT_TRUE(rel <= 1e-5 || abs_diff <= 1e-8)
          << seb::variant_name(v) << " scalar " << k << " analytic "
          << analytic << " numeric " << numeric;
    }
  }
}

TEST(Backward, RepeatedSampleEqualsSingleSampleGradient) {
  EmbeddingDims dims = tiny_dims();
  auto mapping = seb::build_mapping(10, dims.byte_vocab,
                                    dims.bytes_per_subword, 6);
  auto model = seb::init_model(Variant::kSebAddReal, dims, 10, 2, 6, 0.5);
  TokenizedSample sample{{3, 8, 1}, 1};
  auto single = seb::compute_gradient(model, {sample}, &mapping);
  auto tripled =
      seb::compute_gradient(model, {sample, sample, sample}, &mapping);
  auto a = snapshot_scalar_ptrs(single);
  auto b = snapshot_scalar_ptrs(tripled);
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_NEAR(*a[i], *b[i], 1e-12);
}

TEST(Backward, SymmetricBatchIsAStationaryPointOfTheHead) {
  // Two identical sequences with opposite labels under uniform logits:
  // the per-sample logit gradients cancel exactly.
  auto model = seb::init_model(Variant::kSubword, tiny_dims(), 10, 2, 2, 0.0);
  auto snap = seb::compute_gradient(
      model, {{{4, 7}, 0}, {{4, 7}, 1}}, nullptr);
  for (double x : snap.head.data) EXPECT_EQ(x, 0.0);
  for (double x : snap.head_bias) EXPECT_EQ(x, 0.0);
  for (double x : snap.embedding.subword.data) EXPECT_EQ(x, 0.0);
}

TEST(Backward, PadOnlyPositionsContributeNothing) {
  auto model = seb::init_model(Variant::kSubword, tiny_dims(), 10, 2, 9, 0.5);
  auto snap = seb::compute_gradient(
      model, {{{5, seb::kPadId, 6}, 1}, {{2}, 0}}, nullptr);
  // The pad row of the embedding gradient stays exactly zero.
  EXPECT_EQ(seb::max_abs(snap.embedding.subword.row(seb::kPadId)), 0.0);
}

TEST(Backward, GradientStepReducesLoss) {
  EmbeddingDims dims = tiny_dims();
  auto mapping = seb::build_mapping(12, dims.byte_vocab,
                                    dims.bytes_per_subword, 13);
  for (Variant v : kAllVariants) {
    auto model = seb::init_model(v, dims, 12, 2, 13, 0.5, true);
    const ByteMapping* map_ptr = v == Variant::kSubword ? nullptr : &mapping;
    std::vector<TokenizedSample> batch = {{{4, 5, 6}, 0}, {{7, 8}, 1}};
    double before = seb::forward_loss(model, batch, map_ptr);
    auto snap = seb::compute_gradient(model, batch, map_ptr);
    seb::apply_update(model, snap, -0.05);
    double after = seb::forward_loss(model, batch, map_ptr);
    EXPECT_LT(after, before) << seb::variant_name(v);
  }
}

TEST(ComputeGradient, CarriesTruthIdsAndBatchSize) {
  auto model = seb::init_model(Variant::kSubword, tiny_dims(), 10, 2, 3, 0.2);
  std::vector<TokenizedSample> batch = {{{1, 2}, 0}, {{3}, 1}};
  auto snap = seb::compute_gradient(model, batch, nullptr);
  EXPECT_EQ(snap.batch_size, 2);
  ASSERT_EQ(snap.truth_ids.size(), 2u);
  EXPECT_EQ(snap.truth_ids[0], (std::vector<int>{1, 2}));
  EXPECT_EQ(snap.truth_ids[1], (std::vector<int>{3}));
}

TEST(Evaluate, ConstantPredictorScoresClassBalance) {
  auto model = seb::init_model(Variant::kSubword, tiny_dims(), 10, 2, 1, 0.0);
  model.head_bias = {5.0, 0.0};  // always predicts class 0
  std::vector<TokenizedSample> samples = {
      {{4}, 0}, {{5}, 1}, {{6}, 0}, {{7}, 1}};
  EXPECT_DOUBLE_EQ(seb::evaluate(model, samples, nullptr), 0.5);
}

TEST(Evaluate, TiesBreakTowardLowerClassId) {
  auto model = seb::init_model(Variant::kSubword, tiny_dims(), 10, 3, 1, 0.0);
  // All logits equal: prediction must be class 0 every time.
  std::vector<TokenizedSample> samples = {{{4}, 0}, {{5}, 1}, {{6}, 2}};
  EXPECT_NEAR(seb::evaluate(model, samples, nullptr), 1.0 / 3.0, 1e-12);
}

TEST(Evaluate, EmptyTextSamplesCountTowardAccuracy) {
  auto model = seb::init_model(Variant::kSubword, tiny_dims(), 10, 2, 1, 0.0);
  model.head_bias = {1.0, 0.0};
  std::vector<TokenizedSample> samples = {{{}, 0}, {{}, 1}};
  EXPECT_DOUBLE_EQ(seb::evaluate(model, samples, nullptr), 0.5);
}

TEST(Evaluate, DeterministicAcrossCalls) {
  EmbeddingDims dims = tiny_dims();
  auto mapping = seb::build_mapping(10, dims.byte_vocab,
                                    dims.bytes_per_subword, 2);
  auto model = seb::init_model(Variant::kSebConcatOneHot, dims, 10, 2, 2, 0.3);
  std::vector<TokenizedSample> samples;
  SplitMix64 rng(5);
  for (int i = 0; i < 300; ++i)
    samples.push_back({{rng.next_int(0, 10), rng.next_int(0, 10)},
                       rng.next_int(0, 2)});
  EXPECT_EQ(seb::evaluate(model, samples, &mapping),
            seb::evaluate(model, samples, &mapping));
}

TEST(Training, FullBatchDescentSolvesToyTask) {
  // 2-class task over disjoint token groups; plain gradient descent must
  // separate it quickly.
  EmbeddingDims dims;
  dims.output = 8;
  auto model = seb::init_model(Variant::kSubword, dims, 24, 2, 7, 0.1);
  SplitMix64 rng(11);
  std::vector<TokenizedSample> data;
  for (int i = 0; i < 60; ++i) {
    int label = i % 2;
    std::vector<int> ids;
    for (int t = 0; t < 5; ++t)
      ids.push_back(4 + label * 10 + rng.next_int(0, 10));
    data.push_back({ids, label});
  }
  double initial = seb::forward_loss(model, data, nullptr);
  for (int step = 0; step < 60; ++step) {
    auto snap = seb::compute_gradient(model, data, nullptr);
    seb::apply_update(model, snap, -0.5);
  }
  double final_loss = seb::forward_loss(model, data, nullptr);
  EXPECT_LT(final_loss, initial);
  EXPECT_GT(seb::evaluate(model, data, nullptr), 0.9);
}

TEST(SnapshotHelpers, AccumulateScaleNormFinite) {
  auto model = seb::init_model(Variant::kSebConcatReal, tiny_dims(), 10, 2, 3,
                               0.4, true);
  auto mapping = seb::build_mapping(10, tiny_dims().byte_vocab,
                                    tiny_dims().bytes_per_subword, 3);
  auto g = seb::compute_gradient(model, {{{1, 2, 3}, 0}}, &mapping);
  auto acc = seb::zero_snapshot(model);
  seb::add_scaled(acc, g, 1.0);
  seb::add_scaled(acc, g, 1.0);
  seb::scale_snapshot(acc, 0.5);
  auto a = snapshot_scalar_ptrs(acc);
  auto b = snapshot_scalar_ptrs(g);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(*a[i], *b[i]);

  EXPECT_NEAR(seb::squared_norm(acc), seb::squared_norm(g), 1e-12);
  EXPECT_TRUE(seb::all_finite(acc));
  acc.head(0, 0) = std::nan("");
  EXPECT_FALSE(seb::all_finite(acc));
}

TEST(ModelFile, RoundTripExact) {
  EmbeddingDims dims = tiny_dims();
  auto model = seb::init_model(Variant::kSebConcatOneHot, dims, 10, 3, 21,
                               0.6, true);
  auto path = temp_file("model.sebp");
  seb::save_model(model, path);
  auto loaded = seb::load_model(path);
  EXPECT_EQ(loaded.num_classes, 3);
  EXPECT_EQ(loaded.head.data, model.head.data);
  EXPECT_EQ(loaded.head_bias, model.head_bias);
  EXPECT_EQ(loaded.embedding.w1.data, model.embedding.w1.data);
  EXPECT_EQ(loaded.embedding.variant, model.embedding.variant);
}

TEST(SnapshotFile, RoundTripExact) {
  EmbeddingDims dims = tiny_dims();
  auto mapping = seb::build_mapping(10, dims.byte_vocab,
                                    dims.bytes_per_subword, 8);
  auto model = seb::init_model(Variant::kSebConcatReal, dims, 10, 2, 8, 0.5);
  auto snap = seb::compute_gradient(model, {{{1, 5}, 0}, {{9}, 1}}, &mapping);
  snap.client_id = 7;
  snap.round = 42;
  auto path = temp_file("snap.grad");
  seb::save_snapshot(snap, path);
  auto loaded = seb::load_snapshot(path);
  EXPECT_EQ(loaded.client_id, 7);
  EXPECT_EQ(loaded.round, 42);
  EXPECT_EQ(loaded.batch_size, 2);
  EXPECT_EQ(loaded.truth_ids, snap.truth_ids);
  EXPECT_EQ(loaded.embedding.byte.data, snap.embedding.byte.data);
  EXPECT_EQ(loaded.embedding.w1.data, snap.embedding.w1.data);
  EXPECT_EQ(loaded.head.data, snap.head.data);
  EXPECT_EQ(loaded.head_bias, snap.head_bias);
}

TEST(SnapshotFile, CorruptFilesThrow) {
  auto model = seb::init_model(Variant::kSubword, tiny_dims(), 10, 2, 1, 0.1);
  auto snap = seb::compute_gradient(model, {{{1}, 0}}, nullptr);
  auto path = temp_file("snap_truncated.grad");
  seb::save_snapshot(snap, path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) / 3);
  EXPECT_THROW(seb::load_snapshot(path), seb::Error);

  auto bad = temp_file("snap_bad.grad");
  std::ofstream(bad, std::ios::binary) << "not a snapshot";
  EXPECT_THROW(seb::load_snapshot(bad), seb::Error);
  EXPECT_THROW(seb::load_snapshot(temp_file("snap_missing.grad")),
               seb::MissingInputError);
}

TEST(InitModel, RejectsTooFewClasses) {
  EXPECT_THROW(seb::init_model(Variant::kSubword, tiny_dims(), 10, 1, 1, 0.1),
               seb::ConfigError);
}

}  // namespace
