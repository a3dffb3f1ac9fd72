#include "pmri/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "json.hpp"
#include "pmri/datasim.hpp"
#include "pmri/sense.hpp"

namespace pmri {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'R', 'D', 'S'};

std::vector<std::complex<float>> to_float(std::span<const Complex> v) {
  std::vector<std::complex<float>> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = {static_cast<float>(v[i].real()), static_cast<float>(v[i].imag())};
  }
  return out;
}

std::vector<Complex> to_double(const std::vector<std::complex<float>>& v) {
  std::vector<Complex> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = {v[i].real(), v[i].imag()};
  return out;
}

struct Field {
  std::string name;
  std::string type;  // "complex64" or "uint8"
  std::vector<int> shape;
  std::uint64_t bytes;
};

std::vector<Field> record_layout(const DatasetManifest& m) {
  const std::uint64_t px = static_cast<std::uint64_t>(m.height) * m.width;
  std::vector<Field> f{{"ground_truth", "complex64", {m.height, m.width}, px * 8},
                       {"foreground", "uint8", {m.height, m.width}, px},
                       {"support", "uint8", {m.height, m.width}, px},
                       {"sensitivities", "complex64", {m.coils, m.height, m.width}, px * m.coils * 8}};
  for (int af : m.accelerations) {
    f.push_back({"mask_af" + std::to_string(af), "uint8", {m.height, m.width}, px});
    f.push_back({"kspace_af" + std::to_string(af), "complex64", {m.coils, m.height, m.width}, px * m.coils * 8});
  }
  return f;
}

std::uint64_t record_size(const DatasetManifest& m) {
  std::uint64_t n = 0;
  for (const auto& f : record_layout(m)) n += f.bytes;
  return n;
}

json manifest_to_json(const DatasetManifest& m) {
  json layout = json::array();
  std::uint64_t offset = 0;
  for (const auto& f : record_layout(m)) {
    layout.push_back({{"name", f.name}, {"type", f.type}, {"shape", f.shape}, {"offset", offset}, {"bytes", f.bytes}});
    offset += f.bytes;
  }
  return {{"format", "MRDS"},
          {"slice_count", m.slice_count},
          {"train_count", m.train_count},
          {"validation_count", m.validation_count},
          {"height", m.height},
          {"width", m.width},
          {"coils", m.coils},
          {"accelerations", m.accelerations},
          {"center_fraction", m.center_fraction},
          {"noise_sigma", m.noise_sigma},
          {"seed", m.seed},
          {"record_bytes", m.record_bytes},
          {"record_layout", layout},
          {"offsets", m.offsets}};
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  try {
    m.slice_count = j.at("slice_count").get<int>();
    m.train_count = j.at("train_count").get<int>();
    m.validation_count = j.at("validation_count").get<int>();
    m.height = j.at("height").get<int>();
    m.width = j.at("width").get<int>();
    m.coils = j.at("coils").get<int>();
    m.accelerations = j.at("accelerations").get<std::vector<int>>();
    m.center_fraction = j.at("center_fraction").get<double>();
    m.noise_sigma = j.at("noise_sigma").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.record_bytes = j.at("record_bytes").get<std::uint64_t>();
    m.offsets = j.at("offsets").get<std::vector<std::uint64_t>>();
  } catch (const json::exception& e) {
    throw DescriptorError(std::string("dataset manifest is incomplete: ") + e.what());
  }
  if (m.height < 1 || m.width < 1 || m.coils < 1 || m.slice_count < 0 || m.accelerations.empty()) {
    throw DescriptorError("dataset manifest has invalid dimensions");
  }
  if (m.train_count < 0 || m.validation_count < 0 || m.train_count + m.validation_count != m.slice_count) {
    throw DescriptorError("dataset manifest split counts do not add up to slice_count");
  }
  if (m.offsets.size() != static_cast<std::size_t>(m.slice_count)) {
    throw DescriptorError("dataset manifest offset count does not match slice_count");
  }
  for (std::size_t i = 1; i < m.offsets.size(); ++i) {
    if (m.offsets[i] <= m.offsets[i - 1]) throw DescriptorError("dataset manifest offsets are not strictly increasing");
  }
  if (m.record_bytes != record_size(m)) throw DescriptorError("dataset manifest record size disagrees with its layout");
  if (j.at("record_layout") != manifest_to_json(m).at("record_layout")) {
    throw DescriptorError("dataset manifest record layout is not the version-1 layout");
  }
  return m;
}

}  // namespace

void DataConfig::validate() const {
  if (height < 16 || width < 16) throw ConfigError("data: grid must be at least 16x16");
  if (coils < 1) throw ConfigError("data: coils must be >= 1");
  if (train_slices < 0 || validation_slices < 0 || train_slices + validation_slices < 1) {
    throw ConfigError("data: need at least one slice");
  }
  if (accelerations.empty()) throw ConfigError("data: at least one acceleration factor is required");
  for (int af : accelerations) MaskSpec{static_cast<double>(af), center_fraction, 0}.validate();
  if (!(noise_sigma >= 0.0)) throw ConfigError("data: noise_sigma must be >= 0");
  if (support_margin < 0) throw ConfigError("data: support_margin must be >= 0");
}

Dataset::Dataset(DatasetManifest manifest, std::vector<SliceRecord> slices)
    : manifest_(std::move(manifest)), slices_(std::move(slices)) {
  if (slices_.size() != static_cast<std::size_t>(manifest_.slice_count)) {
    throw DescriptorError("dataset slice count disagrees with its manifest");
  }
}

std::vector<int> Dataset::train_indices() const {
  std::vector<int> v(manifest_.train_count);
  for (int i = 0; i < manifest_.train_count; ++i) v[i] = i;
  return v;
}

std::vector<int> Dataset::validation_indices() const {
  std::vector<int> v(manifest_.validation_count);
  for (int i = 0; i < manifest_.validation_count; ++i) v[i] = manifest_.train_count + i;
  return v;
}

int Dataset::acceleration_index(int acceleration) const {
  const auto& a = manifest_.accelerations;
  auto it = std::find(a.begin(), a.end(), acceleration);
  if (it == a.end()) throw ConfigError("dataset has no data for acceleration factor " + std::to_string(acceleration));
  return static_cast<int>(it - a.begin());
}

ComplexImage Dataset::ground_truth(int slice) const {
  return ComplexImage(manifest_.height, manifest_.width, to_double(slices_.at(slice).ground_truth));
}

BinaryMask Dataset::foreground(int slice) const {
  return BinaryMask(manifest_.height, manifest_.width, slices_.at(slice).foreground);
}

SensitivityMaps Dataset::sensitivities(int slice) const {
  const auto& rec = slices_.at(slice);
  CoilStack maps(manifest_.coils, manifest_.height, manifest_.width, to_double(rec.sensitivities));
  // Stored maps are 32-bit; allow for their rounding.
  return SensitivityMaps::from_normalized(std::move(maps), BinaryMask(manifest_.height, manifest_.width, rec.support),
                                          1e-5);
}

SamplingMask Dataset::mask(int slice, int acceleration) const {
  return SamplingMask::from_array(manifest_.height, manifest_.width,
                                  slices_.at(slice).masks.at(acceleration_index(acceleration)));
}

MultiCoilKSpace Dataset::kspace(int slice, int acceleration) const {
  return MultiCoilKSpace(manifest_.coils, manifest_.height, manifest_.width,
                         to_double(slices_.at(slice).kspace.at(acceleration_index(acceleration))));
}

Dataset build_dataset(const DataConfig& config) {
  config.validate();
  DatasetManifest m;
  m.slice_count = config.train_slices + config.validation_slices;
  m.train_count = config.train_slices;
  m.validation_count = config.validation_slices;
  m.height = config.height;
  m.width = config.width;
  m.coils = config.coils;
  m.accelerations = config.accelerations;
  m.center_fraction = config.center_fraction;
  m.noise_sigma = config.noise_sigma;
  m.seed = config.seed;
  m.record_bytes = record_size(m);
  for (int i = 0; i < m.slice_count; ++i) m.offsets.push_back(static_cast<std::uint64_t>(i) * m.record_bytes);

  std::vector<SliceRecord> slices(m.slice_count);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < m.slice_count; ++i) {
    const PhantomSlice phantom = generate_phantom(m.height, m.width, derive_seed(config.seed, i, 0));
    const BinaryMask support = dilate(phantom.foreground, config.support_margin);
    const SensitivityMaps maps = generate_sensitivities(m.coils, m.height, m.width, support);
    SliceRecord& rec = slices[i];
    rec.ground_truth = to_float(phantom.image.data());
    rec.foreground.assign(phantom.foreground.data().begin(), phantom.foreground.data().end());
    rec.support.assign(support.data().begin(), support.data().end());
    rec.sensitivities = to_float(maps.maps().data());
    for (int af : m.accelerations) {
      const MaskSpec spec{static_cast<double>(af), config.center_fraction, derive_seed(config.seed, i, 1 + af)};
      const SamplingMask mask = generate_vd_mask(m.height, m.width, spec);
      const MultiCoilKSpace y =
          simulate_acquisition(phantom, maps, mask, config.noise_sigma, derive_seed(config.seed, i, 1000 + af));
      rec.masks.push_back(mask.to_array());
      rec.kspace.push_back(to_float(y.data()));
    }
  }
  return Dataset(std::move(m), std::move(slices));
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  const DatasetManifest& m = dataset.manifest();
  const std::string manifest = manifest_to_json(m).dump();
  io::ByteWriter w;
  w.bytes(kMagic, 4);
  w.u32(kDatasetVersion);
  w.u64(manifest.size());
  w.text(manifest);
  for (const auto& rec : dataset.slices()) {
    w.complex_floats(rec.ground_truth);
    w.u8s(rec.foreground);
    w.u8s(rec.support);
    w.complex_floats(rec.sensitivities);
    for (std::size_t a = 0; a < m.accelerations.size(); ++a) {
      w.u8s(rec.masks[a]);
      w.complex_floats(rec.kspace[a]);
    }
  }
  io::write_file(path, w.buffer());
}

Dataset read_dataset(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = io::read_file(path);
  io::ByteReader r(bytes, "dataset '" + path.string() + "'");
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw BadMagicError(r.context() + ": not an MRDS file (bad magic bytes)");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) {
    throw VersionError(r.context() + ": unsupported format version " + std::to_string(version));
  }
  const std::uint64_t manifest_len = r.u64();
  const std::string text = r.text(manifest_len);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DescriptorError(r.context() + ": manifest is not valid JSON: " + e.what());
  }
  DatasetManifest m = manifest_from_json(j);

  const std::size_t base = r.position();
  const std::size_t px = static_cast<std::size_t>(m.height) * m.width;
  const std::size_t cpx = px * m.coils;
  std::vector<SliceRecord> slices(m.slice_count);
  for (int i = 0; i < m.slice_count; ++i) {
    r.seek(base + std::min<std::uint64_t>(m.offsets[i], bytes.size()));
    r.need(m.record_bytes);
    SliceRecord& rec = slices[i];
    rec.ground_truth = r.array<std::complex<float>>(px);
    rec.foreground = r.array<std::uint8_t>(px);
    rec.support = r.array<std::uint8_t>(px);
    rec.sensitivities = r.array<std::complex<float>>(cpx);
    for (std::size_t a = 0; a < m.accelerations.size(); ++a) {
      rec.masks.push_back(r.array<std::uint8_t>(px));
      rec.kspace.push_back(r.array<std::complex<float>>(cpx));
    }
  }
  return Dataset(std::move(m), std::move(slices));
}

double percentile99(const ComplexImage& x) {
  std::vector<double> mags(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mags[i] = std::abs(x[i]);
  const std::size_t k = static_cast<std::size_t>(std::floor(0.99 * static_cast<double>(mags.size() - 1)));
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());
  return mags[k];
}

PreparedSample prepare_sample(const Dataset& dataset, int slice, int acceleration) {
  PreparedSample s{slice,
                   dataset.kspace(slice, acceleration),
                   dataset.mask(slice, acceleration),
                   dataset.sensitivities(slice),
                   dataset.ground_truth(slice),
                   dataset.foreground(slice),
                   1.0};
  const double p99 = percentile99(adjoint_op(s.y, s.maps, s.mask));
  s.scale = p99 > 0.0 ? p99 : 1.0;
  const double inv = 1.0 / s.scale;
  for (auto& v : s.y.data()) v *= inv;
  for (auto& v : s.target.data()) v *= inv;
  return s;
}

}  // namespace pmri
