#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sigsim/gates.hpp"
#include "sigsim/mlp.hpp"

namespace sigsim {

// Features consumed by a transfer function: the scaled time gap between the
// current input transition and the previous output transition, plus the two
// slope parameters. `gap` is +inf when the previous output transition is the
// engine's t = -inf placeholder.
struct TransferInput {
  double gap = 0.0;
  double input_slope = 0.0;
  double prev_output_slope = 0.0;
};

struct TransferOutput {
  double output_slope = 0.0;
  double delay = 0.0;  // scaled time between input and output transition
};

// Occupancy-grid approximation of the populated region of the 3-D feature
// space seen during training. Queries outside it are replaced by the nearest
// occupied voxel center so the predictors never see inputs far outside their
// training distribution.
class ValidRegion {
 public:
  static constexpr int kDefaultResolution = 32;

  // Marks every voxel holding a training point occupied, then dilates by the
  // 26-neighborhood. Points with non-finite gap are rejected.
  static ValidRegion build(const std::vector<TransferInput>& points,
                           int resolution = kDefaultResolution);

  bool contains(const TransferInput& x) const;

  // Saturates gap = +inf to the max-gap bound, then returns x unchanged if it
  // lies in an occupied voxel, else the nearest occupied voxel center under
  // extent-normalized Euclidean distance.
  TransferInput project(TransferInput x) const;

  int resolution() const { return resolution_; }
  const std::array<double, 3>& lo() const { return lo_; }
  const std::array<double, 3>& hi() const { return hi_; }
  // tight bounds of the training points, before grid padding
  const std::array<double, 3>& data_lo() const { return data_lo_; }
  const std::array<double, 3>& data_hi() const { return data_hi_; }
  size_t occupied_count() const { return centers_.size(); }
  bool voxel_occupied(int ix, int iy, int iz) const;

  void save(const std::string& path) const;
  static ValidRegion load(const std::string& path);

 private:
  std::array<int, 3> voxel_of(const TransferInput& x) const;
  std::array<double, 3> voxel_center(int ix, int iy, int iz) const;
  size_t linear_index(int ix, int iy, int iz) const;

  std::array<double, 3> lo_{};
  std::array<double, 3> hi_{};
  std::array<double, 3> data_lo_{};
  std::array<double, 3> data_hi_{};
  std::array<double, 3> extent_{};  // floored, used for indexing and distance
  int resolution_ = kDefaultResolution;
  std::vector<uint8_t> occupied_;
  std::vector<std::array<double, 3>> centers_;  // occupied voxel centers
};

// Interface the prediction engine consumes; implemented by the trained model
// and by constant stubs used for testing and calibration.
class GateTransfer {
 public:
  virtual ~GateTransfer() = default;
  virtual TransferOutput apply(const TransferInput& x) const = 0;
  // Slope magnitude of the assumed output transition at t = -inf.
  virtual double dummy_slope() const = 0;
};

// The four trained predictors (rise/fall x slope/delay) of one gate kind and
// fan-out class, guarded by the valid region.
class TransferModel : public GateTransfer {
 public:
  TransferModel(MlpNetwork rise_slope, MlpNetwork rise_delay, MlpNetwork fall_slope,
                MlpNetwork fall_delay, ValidRegion region, GateKind kind, FanoutClass fanout_class,
                double dummy_slope);

  // Routes to the rise pair when the input slope is positive, projects the
  // features through the region, clamps the delay to >= 1e-3 (0.1 ps) and
  // forces the output slope sign to the inverting polarity.
  TransferOutput apply(const TransferInput& x) const override;
  double dummy_slope() const override { return dummy_slope_; }

  GateKind kind() const { return kind_; }
  FanoutClass fanout_class() const { return fanout_class_; }
  const ValidRegion& region() const { return region_; }
  const MlpNetwork& network(bool rising, bool slope) const;

  uint64_t rise_evaluations() const { return rise_evals_.load(); }
  uint64_t fall_evaluations() const { return fall_evals_.load(); }

  // Extra metadata carried through bundle files.
  std::map<std::string, std::string> meta;

 private:
  MlpNetwork rise_slope_, rise_delay_, fall_slope_, fall_delay_;
  ValidRegion region_;
  GateKind kind_;
  FanoutClass fanout_class_;
  double dummy_slope_;
  mutable std::atomic<uint64_t> rise_evals_{0};
  mutable std::atomic<uint64_t> fall_evals_{0};
};

// Bundle directory: four model files, region.txt and meta.txt.
void save_bundle(const std::string& dir, const TransferModel& model);
std::shared_ptr<TransferModel> load_bundle(const std::string& dir);

}  // namespace sigsim
