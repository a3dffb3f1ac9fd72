#include "pmri/service.hpp"

#include <charconv>
#include <cmath>
#include <list>
#include <map>
#include <mutex>

#include "httplib.h"
#include "json.hpp"
#include "pmri/png.hpp"

namespace pmri {

using nlohmann::json;

namespace {

template <typename Key, typename Value>
class LruCache {
 public:
  explicit LruCache(std::size_t capacity) : capacity_(capacity) {}

  std::shared_ptr<const Value> get(const Key& key) {
    std::lock_guard lock(mutex_);
    const auto it = index_.find(key);
    if (it == index_.end()) return nullptr;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
  }

  // Keeps an existing entry if another thread got there first.
  std::shared_ptr<const Value> put(const Key& key, std::shared_ptr<const Value> value) {
    std::lock_guard lock(mutex_);
    const auto it = index_.find(key);
    if (it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return it->second->second;
    }
    order_.emplace_front(key, std::move(value));
    index_[key] = order_.begin();
    if (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
    return order_.front().second;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return order_.size();
  }

 private:
  using Entry = std::pair<Key, std::shared_ptr<const Value>>;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::list<Entry> order_;
  std::map<Key, typename std::list<Entry>::iterator> index_;
};

json metrics_json(const ReconMetrics& m) {
  auto num = [](double v) -> json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  return {{"nmse", num(m.nmse)}, {"psnr", num(m.psnr)}, {"ssim", num(m.ssim)}};
}

std::string raw_floats(const RealImage& image) {
  std::string out(image.data.size() * sizeof(float), '\0');
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    const float v = static_cast<float>(image.data[i]);
    std::memcpy(out.data() + i * sizeof(float), &v, sizeof v);
  }
  return out;
}

double image_max(const RealImage& image) {
  double m = 0.0;
  for (double v : image.data) m = std::max(m, v);
  return m;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_index(const std::string& s, int& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

void error_response(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

}  // namespace

struct ReconService::State {
  ModelCheckpoint sn, gan;
  Dataset dataset;
  int acceleration;
  std::vector<int> slices;
  mutable LruCache<double, ModelCheckpoint> models;
  mutable LruCache<std::pair<int, double>, ReconResult> recons;

  State(ModelCheckpoint a, ModelCheckpoint b, Dataset d, int af, std::size_t entries)
      : sn(std::move(a)), gan(std::move(b)), dataset(std::move(d)), acceleration(af), models(entries), recons(entries) {}
};

ReconService::ReconService(ModelCheckpoint sn, ModelCheckpoint gan, Dataset dataset, int acceleration,
                           std::size_t cache_entries) {
  const CompatibilityReport rep = validate_compatibility(sn, gan);
  if (!rep.ok) throw IncompatibleModelsError("SN and SN-GAN checkpoints are incompatible: " + rep.mismatch);
  require_same_grid(dataset.grid(), {sn.config.height, sn.config.width}, "checkpoint vs dataset");
  if (dataset.manifest().coils != sn.config.coils) throw DimensionError("checkpoint coil count differs from dataset");
  dataset.acceleration_index(acceleration);
  if (cache_entries < 1) throw ConfigError("cache needs at least one entry");
  state_ = std::make_unique<State>(std::move(sn), std::move(gan), std::move(dataset), acceleration, cache_entries);
  state_->slices = state_->dataset.validation_indices();
}

ReconService::~ReconService() = default;

int ReconService::slice_count() const { return static_cast<int>(state_->slices.size()); }

std::string ReconService::meta_json() const {
  const DatasetManifest& m = state_->dataset.manifest();
  const json j = {{"slice_count", slice_count()},
                  {"split", "validation"},
                  {"height", m.height},
                  {"width", m.width},
                  {"coils", m.coils},
                  {"accelerations", m.accelerations},
                  {"acceleration", state_->acceleration},
                  {"models", {{"alpha0", to_string(state_->sn.tag)}, {"alpha1", to_string(state_->gan.tag)}}},
                  {"descriptor", json::parse(state_->sn.descriptor())}};
  return j.dump();
}

RealImage ReconService::ground_truth(int slice) const {
  if (slice < 0 || slice >= slice_count()) throw DimensionError("slice " + std::to_string(slice) + " out of range");
  return magnitude(state_->dataset.ground_truth(state_->slices[slice]));
}

std::shared_ptr<const ReconResult> ReconService::reconstruct(int slice, double alpha) const {
  InterpSpec::pair(state_->sn, state_->gan, alpha).validate();
  if (slice < 0 || slice >= slice_count()) throw DimensionError("slice " + std::to_string(slice) + " out of range");
  const auto key = std::make_pair(slice, alpha);
  if (auto hit = state_->recons.get(key)) return hit;

  auto model = state_->models.get(alpha);
  if (!model) {
    model = state_->models.put(alpha, std::make_shared<const ModelCheckpoint>(
                                          interpolate(InterpSpec::pair(state_->sn, state_->gan, alpha))));
  }
  const int index = state_->slices[slice];
  const PreparedSample sample = prepare_sample(state_->dataset, index, state_->acceleration);
  const ComplexImage x = pmri::reconstruct(model->model(), sample);
  const ComplexImage gt = state_->dataset.ground_truth(index);
  auto result = std::make_shared<ReconResult>();
  result->magnitude = magnitude(x);
  result->metrics = {nmse(x, gt, sample.foreground), psnr(x, gt, sample.foreground),
                     ssim_metric(x, gt, sample.foreground)};
  return state_->recons.put(key, std::move(result));
}

std::size_t ReconService::cached_models() const { return state_->models.size(); }
std::size_t ReconService::cached_reconstructions() const { return state_->recons.size(); }

struct HttpServer::Impl {
  const ReconService& service;
  httplib::Server server;

  explicit Impl(const ReconService& s) : service(s) {}

  void send_image(httplib::Response& res, const RealImage& image, double window, const std::string& format) {
    res.set_header("X-Height", std::to_string(image.height));
    res.set_header("X-Width", std::to_string(image.width));
    if (format == "raw") {
      res.set_content(raw_floats(image), "application/octet-stream");
    } else {
      res.set_content(encode_png_gray8(window_gray8(image, window), image.width, image.height), "image/png");
    }
  }

  void routes() {
    server.Get("/api/meta", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(service.meta_json(), "application/json");
    });

    server.Get(R"(/api/slices/(\d+)/groundtruth)", [this](const httplib::Request& req, httplib::Response& res) {
      int slice = 0;
      if (!parse_index(req.matches[1], slice) || slice >= service.slice_count()) {
        return error_response(res, 404, "no such slice");
      }
      const std::string format = req.has_param("format") ? req.get_param_value("format") : "png";
      if (format != "png" && format != "raw") return error_response(res, 400, "format must be png or raw");
      const RealImage gt = service.ground_truth(slice);
      send_image(res, gt, image_max(gt), format);
    });

    server.Get("/api/recon", [this](const httplib::Request& req, httplib::Response& res) {
      int slice = 0;
      double alpha = 0.0;
      if (!req.has_param("slice") || !parse_index(req.get_param_value("slice"), slice)) {
        return error_response(res, 400, "slice must be a non-negative integer");
      }
      if (!req.has_param("alpha") || !parse_number(req.get_param_value("alpha"), alpha)) {
        return error_response(res, 400, "alpha must be a finite number");
      }
      const std::string format = req.has_param("format") ? req.get_param_value("format") : "png";
      if (format != "png" && format != "raw") return error_response(res, 400, "format must be png or raw");
      if (slice < 0 || slice >= service.slice_count()) return error_response(res, 404, "no such slice");

      std::shared_ptr<const ReconResult> r;
      try {
        r = service.reconstruct(slice, alpha);
      } catch (const InterpSpecError& e) {
        return error_response(res, 400, e.what());
      }
      const std::string metrics = metrics_json(r->metrics).dump();
      res.set_header("X-Metrics", metrics);
      if (req.has_param("metrics") && req.get_param_value("metrics") == "1") {
        res.set_content(json{{"slice", slice}, {"alpha", alpha}, {"metrics", metrics_json(r->metrics)}}.dump(),
                        "application/json");
        return;
      }
      send_image(res, r->magnitude, image_max(service.ground_truth(slice)), format);
    });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        error_response(res, 500, e.what());
      } catch (...) {
        error_response(res, 500, "unknown error");
      }
    });
  }
};

HttpServer::HttpServer(const ReconService& service) : impl_(std::make_unique<Impl>(service)) { impl_->routes(); }

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host + " to any port");
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace pmri
