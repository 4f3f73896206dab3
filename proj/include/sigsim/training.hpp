#pragma once

#include <memory>

#include "sigsim/mlp.hpp"
#include "sigsim/refmodel.hpp"
#include "sigsim/transfer.hpp"

namespace sigsim {

struct BundleTrainResult {
  std::shared_ptr<TransferModel> model;
  double val_mse[4] = {0, 0, 0, 0};  // rise_slope, rise_delay, fall_slope, fall_delay
  double delay_spread = 0.0;         // max - min delay across the table
  double val_rms_delay = 0.0;        // pooled over the two delay networks
};

// Trains the four predictors of one gate kind / fan-out class from a
// characterization table, builds the valid region from the table's feature
// points and assembles the bundle. The four networks train concurrently when
// jobs > 1; each has its own seed derived from cfg.seed, so results do not
// depend on the job count.
BundleTrainResult train_transfer_bundle(const TrainingTable& table, GateKind kind, FanoutClass fo,
                                        const TrainConfig& cfg,
                                        int region_resolution = ValidRegion::kDefaultResolution,
                                        int jobs = 1);

}  // namespace sigsim
