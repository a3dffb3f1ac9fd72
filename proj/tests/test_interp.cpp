#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "pmri/interp.hpp"
#include "support/helpers.hpp"
#include "support/tempdir.hpp"

using namespace pmri;
using namespace pmri::testing;

namespace {

ModelCheckpoint checkpoint(const ModelConfig& c, std::uint64_t seed, LossTag tag = LossTag::SN) {
  ModelConfig s = c;
  s.seed = seed;
  ModelCheckpoint k;
  k.config = c;
  k.tag = tag;
  k.params = init_model(s);
  return k;
}

ModelCheckpoint filled(const ModelConfig& c, float value) {
  ModelCheckpoint k = checkpoint(c, 1);
  for (auto& p : k.params)
    for (auto& v : p.values) v = value;
  return k;
}

ModelCheckpoint scalar(float value) {
  ModelCheckpoint k;
  k.config = tiny_model(1);
  k.params = ParameterSet({Parameter{"w", {1}, {value}}});
  return k;
}

bool bit_equal(const ParameterSet& a, const ParameterSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].shape != b[i].shape || a[i].values.size() != b[i].values.size()) return false;
    if (std::memcmp(a[i].values.data(), b[i].values.data(), a[i].values.size() * sizeof(float)) != 0) return false;
  }
  return true;
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(Checkpoint, SaveLoadIsBitExact) {
  TempDir dir("ckpt");
  ModelCheckpoint a = checkpoint(tiny_model(2), 5, LossTag::SNGAN);
  a.params[0].values[0] = -0.0f;
  a.params[1].values[0] = std::numeric_limits<float>::denorm_min();
  save_checkpoint(a, dir / "a.mrin");
  const ModelCheckpoint b = load_checkpoint(dir / "a.mrin");
  EXPECT_TRUE(bit_equal(a.params, b.params));
  EXPECT_EQ(b.tag, LossTag::SNGAN);
  EXPECT_EQ(b.descriptor(), a.descriptor());
  save_checkpoint(b, dir / "b.mrin");
  EXPECT_EQ(slurp(dir / "a.mrin"), slurp(dir / "b.mrin"));
}

TEST(Checkpoint, ProvenanceSurvivesRoundTrip) {
  TempDir dir("prov");
  const ModelCheckpoint a = checkpoint(tiny_model(1), 1), b = checkpoint(tiny_model(1), 2);
  const ModelCheckpoint mid = interpolate(InterpSpec::pair(a, b, 0.25));
  save_checkpoint(mid, dir / "m.mrin");
  const ModelCheckpoint back = load_checkpoint(dir / "m.mrin");
  EXPECT_EQ(back.tag, LossTag::Interp);
  EXPECT_EQ(back.provenance.sources, (std::vector<std::string>{"SN", "SN-GAN"}));
  EXPECT_EQ(back.provenance.coefficients, (std::vector<double>{0.75, 0.25}));
}

TEST(CheckpointFaults, EachCorruptionHasItsErrorClass) {
  TempDir dir("ckpt_faults");
  save_checkpoint(checkpoint(tiny_model(1), 1), dir / "good.mrin");
  const std::vector<char> good = slurp(dir / "good.mrin");

  auto bad = good;
  bad[1] = 'Z';
  spit(dir / "magic.mrin", bad);
  EXPECT_THROW(load_checkpoint(dir / "magic.mrin"), BadMagicError);

  bad = good;
  bad[4] = 2;
  spit(dir / "version.mrin", bad);
  EXPECT_THROW(load_checkpoint(dir / "version.mrin"), VersionError);

  // Descriptor length field pointing past the end of the file.
  bad = good;
  const std::uint32_t huge = 0x7fffffff;
  std::memcpy(bad.data() + 8, &huge, 4);
  spit(dir / "length.mrin", bad);
  EXPECT_THROW(load_checkpoint(dir / "length.mrin"), TruncationError);

  bad.assign(good.begin(), good.end() - 3);
  spit(dir / "short.mrin", bad);
  EXPECT_THROW(load_checkpoint(dir / "short.mrin"), TruncationError);

  // Descriptor claims two cascades, records hold one.
  const ModelCheckpoint one = checkpoint(tiny_model(1), 1);
  std::vector<std::uint8_t> bytes = encode_checkpoint(one);
  const std::string d1 = tiny_model(1).descriptor(), d2 = tiny_model(2).descriptor();
  ASSERT_EQ(d1.size(), d2.size());
  auto pos = std::search(bytes.begin(), bytes.end(), d1.begin(), d1.end());
  ASSERT_NE(pos, bytes.end());
  std::copy(d2.begin(), d2.end(), pos);
  EXPECT_THROW(decode_checkpoint(bytes), DescriptorError);

  bad = good;
  bad.push_back(0);
  spit(dir / "trailing.mrin", bad);
  EXPECT_THROW(load_checkpoint(dir / "trailing.mrin"), DescriptorError);
}

TEST(CheckpointFaults, ReshapedTensorNamedInMismatch) {
  // Swap the dims of the first weight tensor in a doctored file.
  ModelConfig c = tiny_model(1);
  c.widths = {4, 3};
  const ModelCheckpoint a = checkpoint(c, 1);
  std::vector<std::uint8_t> bytes = encode_checkpoint(a);
  const std::string name = "cascade0.enc.weight";
  auto pos = std::search(bytes.begin(), bytes.end(), name.begin(), name.end());
  ASSERT_NE(pos, bytes.end());
  std::uint32_t dims[4];
  std::memcpy(dims, &*(pos + name.size() + 4), 16);
  std::swap(dims[0], dims[1]);
  std::memcpy(&*(pos + name.size() + 4), dims, 16);
  try {
    decode_checkpoint(bytes);
    FAIL() << "expected DescriptorError";
  } catch (const DescriptorError& e) {
    EXPECT_NE(std::string(e.what()).find(name), std::string::npos) << e.what();
  }
}

TEST(Compatibility, ReportsFirstDifference) {
  const ModelCheckpoint a = checkpoint(tiny_model(3), 1);
  EXPECT_TRUE(validate_compatibility(a, a).ok);
  const CompatibilityReport r = validate_compatibility(a, checkpoint(tiny_model(4), 1));
  EXPECT_FALSE(r.ok);
  EXPECT_NE(r.mismatch.find("cascades"), std::string::npos) << r.mismatch;

  ModelCheckpoint reshaped = a;
  reshaped.params[2].shape = {reshaped.params[2].shape[0], reshaped.params[2].shape[1], 1, 9};
  const CompatibilityReport s = validate_compatibility(a, reshaped);
  EXPECT_FALSE(s.ok);
  EXPECT_NE(s.mismatch.find(a.params[2].name), std::string::npos) << s.mismatch;
}

TEST(Interpolate, EndpointsAreExactCopies) {
  const ModelCheckpoint a = checkpoint(tiny_model(2), 1), b = checkpoint(tiny_model(2), 2, LossTag::SNGAN);
  EXPECT_TRUE(bit_equal(interpolate(InterpSpec::pair(a, b, 0.0)).params, a.params));
  EXPECT_TRUE(bit_equal(interpolate(InterpSpec::pair(a, b, 1.0)).params, b.params));
}

TEST(Interpolate, HandValues) {
  const ModelCheckpoint two = scalar(2.0f), four = scalar(4.0f);
  EXPECT_EQ(interpolate(InterpSpec::pair(two, four, 0.5)).params[0].values[0], 3.0f);
  const ModelCheckpoint one = scalar(1.0f), three = scalar(3.0f);
  InterpSpec three_way{{&one, &two, &three}, {}, {0.2, 0.3, 0.5}, false};
  EXPECT_NEAR(interpolate(three_way).params[0].values[0], 2.3, 1e-6);

  const ModelCheckpoint fa = filled(tiny_model(1), 2.0f), fb = filled(tiny_model(1), 4.0f);
  for (const auto& p : interpolate(InterpSpec::pair(fa, fb, 0.5)).params)
    for (float v : p.values) EXPECT_EQ(v, 3.0f);
}

TEST(Interpolate, LinearityAndComposition) {
  const ModelCheckpoint a = checkpoint(tiny_model(2), 3), b = checkpoint(tiny_model(2), 4);
  for (double alpha : {0.1, 0.3, 0.5, 0.77}) {
    const ModelCheckpoint p = interpolate(InterpSpec::pair(a, b, alpha));
    const ModelCheckpoint q = interpolate(InterpSpec::pair(a, b, 1.0 - alpha));
    for (std::size_t i = 0; i < a.params.size(); ++i)
      for (std::size_t k = 0; k < a.params[i].count(); ++k)
        EXPECT_NEAR(p.params[i].values[k] + q.params[i].values[k], a.params[i].values[k] + b.params[i].values[k], 1e-6);
  }
  const ModelCheckpoint quarter = interpolate(InterpSpec::pair(a, b, 0.25));
  const ModelCheckpoint half = interpolate(InterpSpec::pair(a, b, 0.5));
  const ModelCheckpoint composed = interpolate(InterpSpec::pair(a, half, 0.5));
  for (std::size_t i = 0; i < a.params.size(); ++i)
    for (std::size_t k = 0; k < a.params[i].count(); ++k)
      EXPECT_NEAR(quarter.params[i].values[k], composed.params[i].values[k], 1e-6);
}

TEST(Interpolate, SpecValidation) {
  const ModelCheckpoint a = checkpoint(tiny_model(1), 1), b = checkpoint(tiny_model(1), 2);
  EXPECT_THROW(interpolate(InterpSpec::pair(a, b, 1.5)), InterpSpecError);
  EXPECT_THROW(interpolate(InterpSpec::pair(a, b, -0.1)), InterpSpecError);
  InterpSpec ext = InterpSpec::pair(a, b, 1.5);
  ext.allow_extrapolation = true;
  EXPECT_NO_THROW(interpolate(ext));
  EXPECT_THROW(interpolate(InterpSpec{{&a, &b}, {}, {0.5, 0.6}, false}), InterpSpecError);
  EXPECT_THROW(interpolate(InterpSpec{{&a}, {}, {1.0}, false}), InterpSpecError);
  EXPECT_THROW(interpolate(InterpSpec{{&a, &b}, {}, {1.0}, false}), InterpSpecError);
  const ModelCheckpoint c = checkpoint(tiny_model(2), 1);
  EXPECT_THROW(interpolate(InterpSpec::pair(a, c, 0.5)), IncompatibleModelsError);
}

TEST(Sweep, RowsAndLazyEvaluation) {
  const ModelCheckpoint a = scalar(0.0f), b = scalar(1.0f);
  int calls = 0;
  const SweepTable t = sweep({0.0, 0.5, 1.0}, a, b, [&](const ModelCheckpoint& m, double) {
    ++calls;
    return SweepMetrics{{"w"}, {m.params[0].values[0]}};
  });
  EXPECT_EQ(calls, 3);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[1].values[0], 0.5);
  EXPECT_EQ(t.to_csv().substr(0, 8), "alpha,w\n");
  EXPECT_THROW(sweep({0.0, 1.2}, a, b, [](const ModelCheckpoint&, double) { return SweepMetrics{}; }), InterpSpecError);
  EXPECT_EQ(uniform_grid(5), (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
}
