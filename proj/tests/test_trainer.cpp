#include <gtest/gtest.h>

#include <cstring>

#include "pmri/trainer.hpp"
#include "support/helpers.hpp"

using namespace pmri;
using namespace pmri::testing;

namespace {

const Dataset& tiny_dataset() {
  static const Dataset d = [] {
    DataConfig c;
    c.height = 16;
    c.width = 16;
    c.coils = 2;
    c.train_slices = 6;
    c.validation_slices = 2;
    c.accelerations = {4};
    c.center_fraction = 0.1;
    c.seed = 5;
    return build_dataset(c);
  }();
  return d;
}

ModelConfig tiny16() {
  ModelConfig c = tiny_model(1, 16, 2);
  return c;
}

TrainConfig quick(Phase phase, int epochs = 2) {
  TrainConfig t;
  t.phase = phase;
  t.epochs = epochs;
  t.batch_size = 2;
  t.learning_rate = 1e-3;
  t.seed = 9;
  t.discriminator.widths = {4, 4};
  return t;
}

bool bit_equal(const ParameterSet& a, const ParameterSet& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::memcmp(a[i].values.data(), b[i].values.data(), a[i].values.size() * sizeof(float)) != 0) return false;
  }
  return a.size() == b.size();
}

double distance(const ParameterSet& a, const ParameterSet& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].count(); ++k) s += std::pow(double(a[i].values[k]) - b[i].values[k], 2);
  return std::sqrt(s);
}

}  // namespace

TEST(RmsProp, HandArithmetic) {
  ParameterSet p({Parameter{"w", {1}, {1.0f}}});
  RmsState s = zero_state(p);
  rmsprop_step(p, {{1.0}}, s, 0.1, 0.9, 0.0);
  EXPECT_NEAR(s[0][0], 0.1, 1e-15);
  EXPECT_NEAR(p[0].values[0], 1.0 - 0.1 / std::sqrt(0.1), 1e-6);
}

TEST(RmsProp, ZeroGradientOnlyDecaysState) {
  ParameterSet p({Parameter{"w", {2}, {0.5f, -0.25f}}});
  RmsState s{{4.0, 2.0}};
  rmsprop_step(p, {{0.0, 0.0}}, s, 0.1, 0.9, 1e-8);
  EXPECT_EQ(p[0].values[0], 0.5f);
  EXPECT_EQ(p[0].values[1], -0.25f);
  EXPECT_NEAR(s[0][0], 3.6, 1e-15);
  EXPECT_NEAR(s[0][1], 1.8, 1e-15);
}

TEST(RmsProp, ShapeMismatchRejected) {
  ParameterSet p({Parameter{"w", {2}, {0.5f, -0.25f}}});
  RmsState s = zero_state(p);
  EXPECT_THROW(rmsprop_step(p, {{1.0}}, s, 0.1, 0.9, 0.0), DimensionError);
  EXPECT_THROW(rmsprop_step(p, {}, s, 0.1, 0.9, 0.0), DimensionError);
}

TEST(TrainConfigValidation, RejectsBadValues) {
  TrainConfig t;
  t.rho = 1.0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.learning_rate = 0.0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  EXPECT_EQ(phase_from_string("sn-gan-finetune"), Phase::SnGanFinetune);
  EXPECT_THROW(phase_from_string("gan"), ConfigError);
}

TEST(TrainSn, ZeroEpochsReturnsInitialization) {
  const TrainResult r = train_sn(tiny_dataset(), tiny16(), quick(Phase::SnPretrain, 0));
  EXPECT_TRUE(bit_equal(r.checkpoint.params, init_model(tiny16())));
  EXPECT_TRUE(r.report.epochs.empty());
  EXPECT_EQ(r.checkpoint.tag, LossTag::SN);
}

TEST(TrainSn, DeterministicAndImproving) {
  const TrainResult a = train_sn(tiny_dataset(), tiny16(), quick(Phase::SnPretrain, 3));
  const TrainResult b = train_sn(tiny_dataset(), tiny16(), quick(Phase::SnPretrain, 3));
  EXPECT_TRUE(bit_equal(a.checkpoint.params, b.checkpoint.params));
  ASSERT_EQ(a.report.epochs.size(), 3u);
  EXPECT_LT(a.report.epochs.back().loss, a.report.epochs.front().loss);
  EXPECT_FALSE(bit_equal(a.checkpoint.params, init_model(tiny16())));
  EXPECT_EQ(a.report.validation.size(), 1u);
  EXPECT_NE(a.report.to_json().find("\"phase\": \"sn-pretrain\""), std::string::npos);

  TrainConfig reseeded = quick(Phase::SnPretrain, 3);
  reseeded.seed = 10;
  EXPECT_FALSE(bit_equal(train_sn(tiny_dataset(), tiny16(), reseeded).checkpoint.params, a.checkpoint.params));
}

TEST(TrainSn, GridMismatchRejected) {
  ModelConfig wrong = tiny16();
  wrong.height = 8;
  wrong.width = 8;
  EXPECT_THROW(train_sn(tiny_dataset(), wrong, quick(Phase::SnPretrain, 1)), DimensionError);
}

TEST(TrainSn, DivergenceGuard) {
  TrainConfig t = quick(Phase::SnPretrain, 3);
  t.learning_rate = 1e38;
  EXPECT_THROW(train_sn(tiny_dataset(), tiny16(), t), DivergenceError);
}

TEST(Finetune, ZeroEpochsAndArchitecturePreserved) {
  const TrainResult pre = train_sn(tiny_dataset(), tiny16(), quick(Phase::SnPretrain, 1));
  const TrainResult same = finetune_sn(pre.checkpoint, tiny_dataset(), quick(Phase::SnFinetune, 0));
  EXPECT_TRUE(bit_equal(same.checkpoint.params, pre.checkpoint.params));

  const TrainResult gan = finetune_sn_gan(pre.checkpoint, tiny_dataset(), quick(Phase::SnGanFinetune, 1));
  EXPECT_EQ(gan.checkpoint.tag, LossTag::SNGAN);
  EXPECT_EQ(gan.checkpoint.descriptor(), pre.checkpoint.descriptor());
  EXPECT_TRUE(validate_compatibility(gan.checkpoint, pre.checkpoint).ok);
  const TrainResult again = finetune_sn_gan(pre.checkpoint, tiny_dataset(), quick(Phase::SnGanFinetune, 1));
  EXPECT_TRUE(bit_equal(gan.checkpoint.params, again.checkpoint.params));
  EXPECT_NE(gan.report.to_json().find("discriminator_loss"), std::string::npos);
}

TEST(Finetune, LargeGammaApproachesSnFinetuning) {
  const TrainResult pre = train_sn(tiny_dataset(), tiny16(), quick(Phase::SnPretrain, 1));
  const TrainResult sn = finetune_sn(pre.checkpoint, tiny_dataset(), quick(Phase::SnFinetune, 2));
  TrainConfig low = quick(Phase::SnGanFinetune, 2), high = low;
  low.loss.gamma = 0.1;
  high.loss.gamma = 1e3;
  const double d_low = distance(finetune_sn_gan(pre.checkpoint, tiny_dataset(), low).checkpoint.params, sn.checkpoint.params);
  const double d_high = distance(finetune_sn_gan(pre.checkpoint, tiny_dataset(), high).checkpoint.params, sn.checkpoint.params);
  EXPECT_LT(d_high, d_low);
}

TEST(Dispatch, FinetuneNeedsPretrained) {
  EXPECT_THROW(train(tiny_dataset(), tiny16(), quick(Phase::SnGanFinetune, 1), nullptr), UsageError);
  const TrainResult pre = train_sn(tiny_dataset(), tiny16(), quick(Phase::SnPretrain, 0));
  ModelConfig other = tiny16();
  other.cascades = 2;
  EXPECT_THROW(train(tiny_dataset(), other, quick(Phase::SnFinetune, 1), &pre.checkpoint), IncompatibleModelsError);
}
