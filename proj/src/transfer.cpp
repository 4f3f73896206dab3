#include "sigsim/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sigsim/errors.hpp"
#include "sigsim/util.hpp"

namespace sigsim {

namespace {

std::array<double, 3> coords(const TransferInput& x) {
  return {x.gap, x.input_slope, x.prev_output_slope};
}

}  // namespace

ValidRegion ValidRegion::build(const std::vector<TransferInput>& points, int resolution) {
  if (resolution < 1 || resolution > 512) throw DataError("region resolution out of range");
  std::vector<TransferInput> finite;
  finite.reserve(points.size());
  for (const TransferInput& p : points) {
    if (std::isfinite(p.gap) && std::isfinite(p.input_slope) && std::isfinite(p.prev_output_slope)) {
      finite.push_back(p);
    }
  }
  if (finite.empty()) throw EmptyTrainingSet("no finite training points for region");

  ValidRegion region;
  region.resolution_ = resolution;
  for (int k = 0; k < 3; ++k) {
    region.lo_[k] = std::numeric_limits<double>::infinity();
    region.hi_[k] = -std::numeric_limits<double>::infinity();
  }
  for (const TransferInput& p : finite) {
    const auto c = coords(p);
    for (int k = 0; k < 3; ++k) {
      region.lo_[k] = std::min(region.lo_[k], c[k]);
      region.hi_[k] = std::max(region.hi_[k], c[k]);
    }
  }
  region.data_lo_ = region.lo_;
  region.data_hi_ = region.hi_;
  for (int k = 0; k < 3; ++k) {
    const double span = region.hi_[k] - region.lo_[k];
    const double floor_span =
        1e-9 * std::max({std::abs(region.lo_[k]), std::abs(region.hi_[k]), 1.0});
    if (span < floor_span) {
      const double center = 0.5 * (region.lo_[k] + region.hi_[k]);
      region.lo_[k] = center - 0.5 * floor_span;
      region.hi_[k] = center + 0.5 * floor_span;
    }
    // pad by two voxel widths so every training point lands in an interior
    // voxel and the dilation never clips at the grid border
    const double margin = 2.0 * (region.hi_[k] - region.lo_[k]) / resolution;
    region.lo_[k] -= margin;
    region.hi_[k] += margin;
    region.extent_[k] = region.hi_[k] - region.lo_[k];
  }

  const size_t res = static_cast<size_t>(resolution);
  std::vector<uint8_t> raw(res * res * res, 0);
  for (const TransferInput& p : finite) {
    const auto v = region.voxel_of(p);
    raw[region.linear_index(v[0], v[1], v[2])] = 1;
  }

  // 26-connected dilation so the region is not overly tight around samples.
  region.occupied_.assign(res * res * res, 0);
  for (int ix = 0; ix < resolution; ++ix) {
    for (int iy = 0; iy < resolution; ++iy) {
      for (int iz = 0; iz < resolution; ++iz) {
        if (!raw[region.linear_index(ix, iy, iz)]) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dz = -1; dz <= 1; ++dz) {
              const int jx = ix + dx, jy = iy + dy, jz = iz + dz;
              if (jx < 0 || jy < 0 || jz < 0 || jx >= resolution || jy >= resolution ||
                  jz >= resolution) {
                continue;
              }
              region.occupied_[region.linear_index(jx, jy, jz)] = 1;
            }
          }
        }
      }
    }
  }

  for (int ix = 0; ix < resolution; ++ix) {
    for (int iy = 0; iy < resolution; ++iy) {
      for (int iz = 0; iz < resolution; ++iz) {
        if (region.occupied_[region.linear_index(ix, iy, iz)]) {
          region.centers_.push_back(region.voxel_center(ix, iy, iz));
        }
      }
    }
  }
  return region;
}

size_t ValidRegion::linear_index(int ix, int iy, int iz) const {
  const size_t res = static_cast<size_t>(resolution_);
  return (static_cast<size_t>(ix) * res + static_cast<size_t>(iy)) * res + static_cast<size_t>(iz);
}

std::array<double, 3> ValidRegion::voxel_center(int ix, int iy, int iz) const {
  const double step = 1.0 / static_cast<double>(resolution_);
  return {lo_[0] + (ix + 0.5) * step * extent_[0], lo_[1] + (iy + 0.5) * step * extent_[1],
          lo_[2] + (iz + 0.5) * step * extent_[2]};
}

std::array<int, 3> ValidRegion::voxel_of(const TransferInput& x) const {
  const auto c = coords(x);
  std::array<int, 3> v{};
  for (int k = 0; k < 3; ++k) {
    const double frac = (c[k] - lo_[k]) / extent_[k];
    int idx = static_cast<int>(frac * resolution_);
    idx = std::clamp(idx, 0, resolution_ - 1);
    v[k] = idx;
  }
  return v;
}

bool ValidRegion::voxel_occupied(int ix, int iy, int iz) const {
  if (ix < 0 || iy < 0 || iz < 0 || ix >= resolution_ || iy >= resolution_ || iz >= resolution_) {
    return false;
  }
  return occupied_[linear_index(ix, iy, iz)] != 0;
}

bool ValidRegion::contains(const TransferInput& x) const {
  const auto c = coords(x);
  for (int k = 0; k < 3; ++k) {
    if (!(c[k] >= lo_[k] && c[k] <= hi_[k])) return false;
  }
  const auto v = voxel_of(x);
  return occupied_[linear_index(v[0], v[1], v[2])] != 0;
}

TransferInput ValidRegion::project(TransferInput x) const {
  // an infinitely old previous transition saturates to the largest observed
  // gap, where history effects have already decayed
  if (std::isinf(x.gap)) x.gap = x.gap > 0.0 ? data_hi_[0] : data_lo_[0];
  if (contains(x)) return x;
  const auto c = coords(x);
  double best = std::numeric_limits<double>::infinity();
  const std::array<double, 3>* best_center = nullptr;
  for (const auto& center : centers_) {
    double dist = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = (c[k] - center[k]) / extent_[k];
      dist += d * d;
    }
    if (dist < best) {
      best = dist;
      best_center = &center;
    }
  }
  return {(*best_center)[0], (*best_center)[1], (*best_center)[2]};
}

void ValidRegion::save(const std::string& path) const {
  std::ostringstream out;
  out << "region 1\n";
  out << "resolution " << resolution_ << "\n";
  out << "bounds";
  for (int k = 0; k < 3; ++k) out << " " << format_double(lo_[k]) << " " << format_double(hi_[k]);
  out << "\n";
  out << "data_bounds";
  for (int k = 0; k < 3; ++k) {
    out << " " << format_double(data_lo_[k]) << " " << format_double(data_hi_[k]);
  }
  out << "\n";
  std::vector<size_t> indices;
  for (size_t i = 0; i < occupied_.size(); ++i) {
    if (occupied_[i]) indices.push_back(i);
  }
  out << "occupied " << indices.size() << "\n";
  for (size_t i : indices) out << i << "\n";
  write_text_file(path, out.str());
}

ValidRegion ValidRegion::load(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "region" || version != 1) {
    throw DataError("unrecognized region file: " + path);
  }
  ValidRegion region;
  if (!(in >> word >> region.resolution_) || word != "resolution" || region.resolution_ < 1 ||
      region.resolution_ > 512) {
    throw DataError("bad region resolution: " + path);
  }
  if (!(in >> word) || word != "bounds") throw DataError("bad region bounds: " + path);
  for (int k = 0; k < 3; ++k) {
    if (!(in >> region.lo_[k] >> region.hi_[k])) throw DataError("bad region bounds: " + path);
    const double span = region.hi_[k] - region.lo_[k];
    const double floor_span =
        1e-9 * std::max({std::abs(region.lo_[k]), std::abs(region.hi_[k]), 1.0});
    region.extent_[k] = std::max(span, floor_span);
  }
  size_t count = 0;
  if (!(in >> word >> count) || word != "occupied" || count == 0) {
    throw DataError("bad region occupancy: " + path);
  }
  const size_t res = static_cast<size_t>(region.resolution_);
  region.occupied_.assign(res * res * res, 0);
  for (size_t i = 0; i < count; ++i) {
    size_t idx = 0;
    if (!(in >> idx) || idx >= region.occupied_.size()) {
      throw DataError("bad region voxel index: " + path);
    }
    region.occupied_[idx] = 1;
  }
  for (int ix = 0; ix < region.resolution_; ++ix) {
    for (int iy = 0; iy < region.resolution_; ++iy) {
      for (int iz = 0; iz < region.resolution_; ++iz) {
        if (region.occupied_[region.linear_index(ix, iy, iz)]) {
          region.centers_.push_back(region.voxel_center(ix, iy, iz));
        }
      }
    }
  }
  return region;
}

TransferModel::TransferModel(MlpNetwork rise_slope, MlpNetwork rise_delay, MlpNetwork fall_slope,
                             MlpNetwork fall_delay, ValidRegion region, GateKind kind,
                             FanoutClass fanout_class, double dummy_slope)
    : rise_slope_(std::move(rise_slope)),
      rise_delay_(std::move(rise_delay)),
      fall_slope_(std::move(fall_slope)),
      fall_delay_(std::move(fall_delay)),
      region_(std::move(region)),
      kind_(kind),
      fanout_class_(fanout_class),
      dummy_slope_(dummy_slope) {
  for (const MlpNetwork* net : {&rise_slope_, &rise_delay_, &fall_slope_, &fall_delay_}) {
    if (net->input_size() != 3) {
      throw DimensionMismatch("transfer networks must accept 3 features, got " +
                              std::to_string(net->input_size()));
    }
  }
  if (!(dummy_slope_ > 0.0) || !std::isfinite(dummy_slope_)) {
    throw DataError("dummy slope must be positive and finite");
  }
}

const MlpNetwork& TransferModel::network(bool rising, bool slope) const {
  if (rising) return slope ? rise_slope_ : rise_delay_;
  return slope ? fall_slope_ : fall_delay_;
}

TransferOutput TransferModel::apply(const TransferInput& x) const {
  const bool rising = x.input_slope > 0.0;
  if (rising) {
    rise_evals_.fetch_add(1, std::memory_order_relaxed);
  } else {
    fall_evals_.fetch_add(1, std::memory_order_relaxed);
  }
  const TransferInput q = region_.project(x);
  Eigen::VectorXd features(3);
  features << q.gap, q.input_slope, q.prev_output_slope;

  double slope_raw = (rising ? rise_slope_ : fall_slope_).forward(features);
  double delay = (rising ? rise_delay_ : fall_delay_).forward(features);
  if (!std::isfinite(delay)) delay = 1e-3;
  delay = std::max(delay, 1e-3);
  if (!std::isfinite(slope_raw)) slope_raw = dummy_slope_;

  // The gate inverts, so the output polarity is the opposite of the input's;
  // a regression of the wrong sign is flipped rather than propagated.
  const double magnitude = std::max(std::abs(slope_raw), 1e-2);
  const double output_slope = rising ? -magnitude : magnitude;
  return {output_slope, delay};
}

namespace {

std::map<std::string, std::string> read_meta(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::map<std::string, std::string> meta;
  std::string line;
  while (std::getline(in, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(value);
    meta[key] = value;
  }
  return meta;
}

}  // namespace

void save_bundle(const std::string& dir, const TransferModel& model) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  model.network(true, true).save((base / "rise_slope.mlp").string());
  model.network(true, false).save((base / "rise_delay.mlp").string());
  model.network(false, true).save((base / "fall_slope.mlp").string());
  model.network(false, false).save((base / "fall_delay.mlp").string());
  model.region().save((base / "region.txt").string());

  std::ostringstream meta;
  meta << "kind = " << to_string(model.kind()) << "\n";
  meta << "fanout_class = " << to_string(model.fanout_class()) << "\n";
  meta << "dummy_slope = " << format_double(model.dummy_slope()) << "\n";
  for (const auto& [k, v] : model.meta) meta << k << " = " << v << "\n";
  write_text_file((base / "meta.txt").string(), meta.str());
}

std::shared_ptr<TransferModel> load_bundle(const std::string& dir) {
  const std::filesystem::path base(dir);
  auto meta = read_meta((base / "meta.txt").string());
  const auto need = [&](const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("bundle meta missing key '" + key + "': " + dir);
    return it->second;
  };
  const GateKind kind = gate_kind_from_string(need("kind"));
  const FanoutClass fo = fanout_class_from_string(need("fanout_class"));
  const double dummy_slope = std::strtod(need("dummy_slope").c_str(), nullptr);

  auto model = std::make_shared<TransferModel>(
      MlpNetwork::load((base / "rise_slope.mlp").string()),
      MlpNetwork::load((base / "rise_delay.mlp").string()),
      MlpNetwork::load((base / "fall_slope.mlp").string()),
      MlpNetwork::load((base / "fall_delay.mlp").string()),
      ValidRegion::load((base / "region.txt").string()), kind, fo, dummy_slope);
  model->meta = std::move(meta);
  return model;
}

}  // namespace sigsim
