#include "pmri/interp.hpp"

#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>

#include "binary_io.hpp"
#include "json.hpp"

namespace pmri {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'R', 'I', 'N'};

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream s;
  s << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s << (i ? "," : "") << shape[i];
  s << "]";
  return s.str();
}

void check_provenance(LossTag tag, const Provenance& p) {
  if (tag != LossTag::Interp) return;
  if (p.coefficients.size() < 2 || p.coefficients.size() != p.sources.size()) {
    throw DescriptorError("interpolated checkpoint needs >= 2 provenance sources with one coefficient each");
  }
  double sum = 0.0;
  for (double c : p.coefficients) sum += c;
  if (std::abs(sum - 1.0) > 1e-9) throw DescriptorError("interpolated checkpoint coefficients do not sum to 1");
}

}  // namespace

std::string to_string(LossTag tag) {
  switch (tag) {
    case LossTag::SN:
      return "SN";
    case LossTag::SNGAN:
      return "SN-GAN";
    case LossTag::Interp:
      return "INTERP";
  }
  return "?";
}

LossTag loss_tag_from_string(const std::string& s) {
  if (s == "SN") return LossTag::SN;
  if (s == "SN-GAN") return LossTag::SNGAN;
  if (s == "INTERP") return LossTag::Interp;
  throw DescriptorError("unknown loss identity '" + s + "'");
}

std::vector<std::uint8_t> encode_checkpoint(const ModelCheckpoint& ckpt) {
  const std::string descriptor = ckpt.descriptor();
  const json meta = {{"loss", to_string(ckpt.tag)},
                     {"provenance", {{"sources", ckpt.provenance.sources}, {"coefficients", ckpt.provenance.coefficients}}}};
  const std::string meta_text = meta.dump();

  io::ByteWriter w;
  w.bytes(kMagic, 4);
  w.u32(ckpt.version);
  w.u32(static_cast<std::uint32_t>(descriptor.size()));
  w.text(descriptor);
  w.u32(static_cast<std::uint32_t>(meta_text.size()));
  w.text(meta_text);
  w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& p : ckpt.params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.text(p.name);
    w.u32(static_cast<std::uint32_t>(p.shape.size()));
    for (int d : p.shape) w.u32(static_cast<std::uint32_t>(d));
    w.floats(p.values);
  }
  return w.buffer();
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(ckpt));
}

ModelCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& context) {
  io::ByteReader r(bytes, context);
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw BadMagicError(context + ": not an MRIN checkpoint (bad magic bytes)");

  ModelCheckpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != kCheckpointVersion) {
    throw VersionError(context + ": unsupported checkpoint version " + std::to_string(ckpt.version));
  }
  const std::string descriptor = r.text(r.u32());
  ckpt.config = ModelConfig::from_descriptor(descriptor);
  if (ckpt.config.descriptor() != descriptor) throw DescriptorError(context + ": descriptor is not in canonical form");

  const std::string meta_text = r.text(r.u32());
  try {
    const json meta = json::parse(meta_text);
    ckpt.tag = loss_tag_from_string(meta.at("loss").get<std::string>());
    ckpt.provenance.sources = meta.at("provenance").at("sources").get<std::vector<std::string>>();
    ckpt.provenance.coefficients = meta.at("provenance").at("coefficients").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DescriptorError(context + ": malformed metadata block: " + e.what());
  }
  check_provenance(ckpt.tag, ckpt.provenance);

  const auto layout = model_layout(ckpt.config);
  const std::uint32_t count = r.u32();
  if (count != layout.size()) {
    throw DescriptorError(context + ": descriptor implies " + std::to_string(layout.size()) + " parameters, file has " +
                          std::to_string(count));
  }
  std::vector<Parameter> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter p;
    p.name = r.text(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw DescriptorError(context + ": parameter '" + p.name + "' has implausible rank");
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      p.shape.push_back(static_cast<int>(r.u32()));
      n *= static_cast<std::size_t>(p.shape.back());
    }
    if (p.name != layout[i].name || p.shape != layout[i].shape) {
      throw DescriptorError(context + ": parameter " + std::to_string(i) + " is '" + p.name + "' " +
                            shape_string(p.shape) + ", descriptor expects '" + layout[i].name + "' " +
                            shape_string(layout[i].shape));
    }
    p.values = r.array<float>(n);
    for (float v : p.values) {
      if (!std::isfinite(v)) throw DescriptorError(context + ": parameter '" + p.name + "' has non-finite values");
    }
    params.push_back(std::move(p));
  }
  if (r.remaining() != 0) throw DescriptorError(context + ": trailing bytes after the last parameter");
  ckpt.params = ParameterSet(std::move(params));
  return ckpt;
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), "checkpoint '" + path.string() + "'");
}

CompatibilityReport validate_compatibility(const ModelCheckpoint& a, const ModelCheckpoint& b) {
  const json da = json::parse(a.descriptor());
  const json db = json::parse(b.descriptor());
  for (auto& [key, va] : da.items()) {
    const auto it = db.find(key);
    if (it == db.end() || *it != va) {
      return {false, "architecture field '" + key + "' differs: " + va.dump() + " vs " +
                         (it == db.end() ? std::string("missing") : it->dump())};
    }
  }
  const std::size_t n = std::min(a.params.size(), b.params.size());
  for (std::size_t i = 0; i < n; ++i) {
    const Parameter& pa = a.params[i];
    const Parameter& pb = b.params[i];
    if (pa.name != pb.name) return {false, "parameter " + std::to_string(i) + " name differs: '" + pa.name + "' vs '" + pb.name + "'"};
    if (pa.shape != pb.shape) {
      return {false, "parameter '" + pa.name + "' shape differs: " + shape_string(pa.shape) + " vs " + shape_string(pb.shape)};
    }
    if (pa.values.size() != pb.values.size()) return {false, "parameter '" + pa.name + "' value count differs"};
  }
  if (a.params.size() != b.params.size()) {
    return {false, "parameter count differs: " + std::to_string(a.params.size()) + " vs " + std::to_string(b.params.size())};
  }
  return {};
}

InterpSpec InterpSpec::pair(const ModelCheckpoint& first, const ModelCheckpoint& second, double alpha,
                            std::string first_label, std::string second_label) {
  return InterpSpec{{&first, &second}, {std::move(first_label), std::move(second_label)}, {1.0 - alpha, alpha}, false};
}

void InterpSpec::validate() const {
  if (sources.size() < 2) throw InterpSpecError("interpolation needs at least two source models");
  if (coefficients.size() != sources.size()) {
    throw InterpSpecError("interpolation needs exactly one coefficient per source model");
  }
  if (!labels.empty() && labels.size() != sources.size()) throw InterpSpecError("label count must match source count");
  double sum = 0.0;
  for (double c : coefficients) {
    if (!std::isfinite(c)) throw InterpSpecError("interpolation coefficients must be finite");
    if (!allow_extrapolation && (c < 0.0 || c > 1.0)) {
      throw InterpSpecError("interpolation coefficient " + std::to_string(c) +
                            " is outside [0, 1]; extrapolation must be enabled explicitly");
    }
    sum += c;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InterpSpecError("interpolation coefficients must sum to 1 (got " + std::to_string(sum) + ")");
}

ModelCheckpoint interpolate(const InterpSpec& spec) {
  spec.validate();
  const ModelCheckpoint& base = *spec.sources.front();
  for (std::size_t s = 1; s < spec.sources.size(); ++s) {
    const CompatibilityReport rep = validate_compatibility(base, *spec.sources[s]);
    if (!rep.ok) throw IncompatibleModelsError("cannot interpolate source " + std::to_string(s) + ": " + rep.mismatch);
  }

  ModelCheckpoint out;
  out.config = base.config;
  out.tag = LossTag::Interp;
  for (std::size_t s = 0; s < spec.sources.size(); ++s) {
    out.provenance.sources.push_back(spec.labels.empty() ? "source" + std::to_string(s) : spec.labels[s]);
  }
  out.provenance.coefficients = spec.coefficients;

  std::vector<Parameter> params;
  for (std::size_t i = 0; i < base.params.size(); ++i) {
    Parameter p{base.params[i].name, base.params[i].shape, std::vector<float>(base.params[i].count())};
    for (std::size_t k = 0; k < p.values.size(); ++k) {
      // Zero-weight sources are skipped so an endpoint is a bit-exact copy
      // (including signed zeros).
      double acc = 0.0;
      bool started = false;
      for (std::size_t s = 0; s < spec.sources.size(); ++s) {
        if (spec.coefficients[s] == 0.0) continue;
        const double term = spec.coefficients[s] * static_cast<double>(spec.sources[s]->params[i].values[k]);
        acc = started ? acc + term : term;
        started = true;
      }
      p.values[k] = static_cast<float>(acc);
    }
    params.push_back(std::move(p));
  }
  out.params = ParameterSet(std::move(params));
  return out;
}

std::string SweepTable::to_csv() const {
  std::ostringstream s;
  s << "alpha";
  for (const auto& c : columns) s << "," << c;
  s << "\n" << std::setprecision(17);
  for (const auto& row : rows) {
    s << row.alpha;
    for (double v : row.values) s << "," << v;
    s << "\n";
  }
  return s.str();
}

SweepTable sweep(const std::vector<double>& grid, const ModelCheckpoint& first, const ModelCheckpoint& second,
                 const SweepHook& hook, bool allow_extrapolation) {
  for (double a : grid) {
    if (!allow_extrapolation && !(a >= 0.0 && a <= 1.0)) {
      throw InterpSpecError("sweep grid value " + std::to_string(a) + " is outside [0, 1]");
    }
  }
  SweepTable table;
  for (double alpha : grid) {
    InterpSpec spec = InterpSpec::pair(first, second, alpha);
    spec.allow_extrapolation = allow_extrapolation;
    const ModelCheckpoint model = interpolate(spec);
    SweepMetrics m = hook(model, alpha);
    if (table.columns.empty()) table.columns = m.names;
    if (m.names != table.columns) throw Error("sweep hook returned inconsistent metric names");
    table.rows.push_back({alpha, std::move(m.values)});
  }
  return table;
}

std::vector<double> uniform_grid(int points) {
  if (points < 1) throw ConfigError("grid needs at least one point");
  if (points == 1) return {0.0};
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) g[i] = static_cast<double>(i) / (points - 1);
  return g;
}

}  // namespace pmri
