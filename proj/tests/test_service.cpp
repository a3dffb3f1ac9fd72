#include <gtest/gtest.h>

#include <cstring>
#include <future>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "pmri/png.hpp"
#include "pmri/service.hpp"
#include "pmri/trainer.hpp"
#include "support/helpers.hpp"

using namespace pmri;
using namespace pmri::testing;
using nlohmann::json;

namespace {

struct Fixture {
  ModelCheckpoint sn, gan;
  Dataset dataset;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    DataConfig c;
    c.height = 16;
    c.width = 16;
    c.coils = 2;
    c.train_slices = 4;
    c.validation_slices = 3;
    c.accelerations = {4};
    c.center_fraction = 0.1;
    c.seed = 8;
    Fixture out{{}, {}, build_dataset(c)};
    TrainConfig t;
    t.epochs = 1;
    t.batch_size = 2;
    t.learning_rate = 1e-3;
    t.discriminator.widths = {4, 4};
    out.sn = train_sn(out.dataset, tiny_model(1, 16, 2), t).checkpoint;
    t.phase = Phase::SnGanFinetune;
    out.gan = finetune_sn_gan(out.sn, out.dataset, t).checkpoint;
    return out;
  }();
  return f;
}

std::vector<float> floats(const std::string& body) {
  std::vector<float> v(body.size() / sizeof(float));
  std::memcpy(v.data(), body.data(), v.size() * sizeof(float));
  return v;
}

class ServiceHttp : public ::testing::Test {
 protected:
  void SetUp() override {
    const Fixture& f = fixture();
    service_ = std::make_unique<ReconService>(f.sn, f.gan, f.dataset, 4, 4);
    server_ = std::make_unique<HttpServer>(*service_);
    port_ = server_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_->listen(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 100 && !client_->Get("/api/meta"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }

  std::unique_ptr<ReconService> service_;
  std::unique_ptr<HttpServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST(Png, Encoding) {
  const auto bytes = encode_png_gray8({0, 128, 255, 7}, 2, 2);
  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  ASSERT_GT(bytes.size(), 8u);
  EXPECT_EQ(std::memcmp(bytes.data(), sig, 8), 0);
  EXPECT_EQ(std::string(bytes.begin() + 12, bytes.begin() + 16), "IHDR");
  EXPECT_EQ(std::string(bytes.end() - 8, bytes.end() - 4), "IEND");

  RealImage img(1, 4);
  img.data = {-1.0, 0.0, 0.5, 3.0};
  EXPECT_EQ(window_gray8(img, 1.0), (std::vector<std::uint8_t>{0, 0, 128, 255}));
}

TEST(ReconServiceTest, EndpointsMatchModels) {
  const Fixture& f = fixture();
  ReconService s(f.sn, f.gan, f.dataset, 4, 4);
  EXPECT_EQ(s.slice_count(), 3);
  const int index = f.dataset.validation_indices()[1];
  const PreparedSample sample = prepare_sample(f.dataset, index, 4);
  const RealImage sn = magnitude(pmri::reconstruct(f.sn.model(), sample));
  const RealImage gan = magnitude(pmri::reconstruct(f.gan.model(), sample));
  EXPECT_EQ(s.reconstruct(1, 0.0)->magnitude.data, sn.data);
  EXPECT_EQ(s.reconstruct(1, 1.0)->magnitude.data, gan.data);
  EXPECT_THROW(s.reconstruct(1, 1.5), InterpSpecError);
  EXPECT_THROW(s.reconstruct(1, -0.1), InterpSpecError);
  EXPECT_THROW(s.reconstruct(3, 0.5), DimensionError);
  EXPECT_EQ(s.reconstruct(1, 0.0).get(), s.reconstruct(1, 0.0).get());
}

TEST(ReconServiceTest, CachesAreBounded) {
  const Fixture& f = fixture();
  ReconService s(f.sn, f.gan, f.dataset, 4, 3);
  for (int i = 0; i <= 10; ++i) s.reconstruct(i % 3, i / 10.0);
  EXPECT_LE(s.cached_models(), 3u);
  EXPECT_LE(s.cached_reconstructions(), 3u);
}

TEST(ReconServiceTest, RejectsIncompatiblePair) {
  const Fixture& f = fixture();
  ModelCheckpoint other = f.gan;
  other.config.cascades = 2;
  other.params = init_model(other.config);
  EXPECT_THROW(ReconService(f.sn, other, f.dataset, 4), IncompatibleModelsError);
  EXPECT_THROW(ReconService(f.sn, f.gan, f.dataset, 8), std::exception);
}

TEST_F(ServiceHttp, Meta) {
  const auto res = client_->Get("/api/meta");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const json j = json::parse(res->body);
  EXPECT_EQ(j["slice_count"], 3);
  EXPECT_EQ(j["height"], 16);
  EXPECT_EQ(j["models"]["alpha0"], "SN");
  EXPECT_EQ(j["models"]["alpha1"], "SN-GAN");
}

TEST_F(ServiceHttp, RawReconMatchesCheckpointForward) {
  const Fixture& f = fixture();
  const PreparedSample sample = prepare_sample(f.dataset, f.dataset.validation_indices()[0], 4);
  const RealImage sn = magnitude(pmri::reconstruct(f.sn.model(), sample));
  const auto res = client_->Get("/api/recon?slice=0&alpha=0&format=raw");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("X-Height"), "16");
  const auto got = floats(res->body);
  ASSERT_EQ(got.size(), sn.data.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], static_cast<float>(sn.data[i]));
  const json m = json::parse(res->get_header_value("X-Metrics"));
  EXPECT_TRUE(m.contains("nmse") && m.contains("psnr") && m.contains("ssim"));
}

TEST_F(ServiceHttp, ImagesAndMetrics) {
  const auto png = client_->Get("/api/recon?slice=2&alpha=0.5");
  ASSERT_TRUE(png);
  EXPECT_EQ(png->status, 200);
  EXPECT_EQ(png->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(png->body.substr(1, 3), "PNG");
  const auto gt = client_->Get("/api/slices/1/groundtruth?format=raw");
  ASSERT_TRUE(gt);
  EXPECT_EQ(gt->body.size(), 16u * 16u * sizeof(float));
  const auto met = client_->Get("/api/recon?slice=1&alpha=0.25&metrics=1");
  ASSERT_TRUE(met);
  const json j = json::parse(met->body);
  EXPECT_DOUBLE_EQ(j["alpha"].get<double>(), 0.25);
  EXPECT_GT(j["metrics"]["ssim"].get<double>(), 0.0);
}

TEST_F(ServiceHttp, BadRequests) {
  EXPECT_EQ(client_->Get("/api/recon?slice=0&alpha=1.5")->status, 400);
  EXPECT_EQ(client_->Get("/api/recon?slice=0&alpha=abc")->status, 400);
  EXPECT_EQ(client_->Get("/api/recon?slice=0")->status, 400);
  EXPECT_EQ(client_->Get("/api/recon?slice=0&alpha=0.5&format=tiff")->status, 400);
  EXPECT_EQ(client_->Get("/api/recon?slice=9&alpha=0.5")->status, 404);
  EXPECT_EQ(client_->Get("/api/slices/9/groundtruth")->status, 404);
}

TEST_F(ServiceHttp, ConcurrentIdenticalRequests) {
  std::vector<std::future<std::string>> jobs;
  for (int i = 0; i < 8; ++i) {
    jobs.push_back(std::async(std::launch::async, [this] {
      httplib::Client c("127.0.0.1", port_);
      const auto r = c.Get("/api/recon?slice=1&alpha=0.3&format=raw");
      return r && r->status == 200 ? r->body : std::string();
    }));
  }
  const std::string first = jobs[0].get();
  ASSERT_FALSE(first.empty());
  for (std::size_t i = 1; i < jobs.size(); ++i) EXPECT_EQ(jobs[i].get(), first);
}
