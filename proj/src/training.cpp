#include "sigsim/training.hpp"

#include <algorithm>
#include <cmath>

#include "sigsim/errors.hpp"
#include "sigsim/util.hpp"

namespace sigsim {

namespace {

void fill_features(const std::vector<const TrainingRow*>& rows, Eigen::MatrixXd* X) {
  X->resize(static_cast<Eigen::Index>(rows.size()), 3);
  for (size_t i = 0; i < rows.size(); ++i) {
    (*X)(static_cast<Eigen::Index>(i), 0) = rows[i]->gap;
    (*X)(static_cast<Eigen::Index>(i), 1) = rows[i]->input_slope;
    (*X)(static_cast<Eigen::Index>(i), 2) = rows[i]->prev_output_slope;
  }
}

}  // namespace

BundleTrainResult train_transfer_bundle(const TrainingTable& table, GateKind kind, FanoutClass fo,
                                        const TrainConfig& cfg, int region_resolution, int jobs) {
  std::vector<const TrainingRow*> rise_rows, fall_rows;
  for (const TrainingRow& r : table.rows) {
    (r.input_slope > 0.0 ? rise_rows : fall_rows).push_back(&r);
  }
  if (rise_rows.size() < 10 || fall_rows.size() < 10) {
    throw DataError("table needs at least 10 rows per input polarity");
  }

  Eigen::MatrixXd rise_x, fall_x;
  fill_features(rise_rows, &rise_x);
  fill_features(fall_rows, &fall_x);
  Eigen::VectorXd rise_slope_y(rise_rows.size()), rise_delay_y(rise_rows.size());
  for (size_t i = 0; i < rise_rows.size(); ++i) {
    rise_slope_y[static_cast<Eigen::Index>(i)] = rise_rows[i]->output_slope;
    rise_delay_y[static_cast<Eigen::Index>(i)] = rise_rows[i]->delay;
  }
  Eigen::VectorXd fall_slope_y(fall_rows.size()), fall_delay_y(fall_rows.size());
  for (size_t i = 0; i < fall_rows.size(); ++i) {
    fall_slope_y[static_cast<Eigen::Index>(i)] = fall_rows[i]->output_slope;
    fall_delay_y[static_cast<Eigen::Index>(i)] = fall_rows[i]->delay;
  }

  const Eigen::MatrixXd* xs[4] = {&rise_x, &rise_x, &fall_x, &fall_x};
  const Eigen::VectorXd* ys[4] = {&rise_slope_y, &rise_delay_y, &fall_slope_y, &fall_delay_y};
  TrainResult trained[4];
  parallel_for(4, std::min(jobs, 4), [&](size_t i) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + i;  // per-network stream, independent of scheduling
    trained[i] = train(*xs[i], *ys[i], default_transfer_layers(), c);
  });

  std::vector<TransferInput> points;
  points.reserve(table.rows.size());
  for (const TrainingRow& r : table.rows) {
    points.push_back({r.gap, r.input_slope, r.prev_output_slope});
  }
  ValidRegion region = ValidRegion::build(points, region_resolution);

  std::vector<double> magnitudes;
  magnitudes.reserve(table.rows.size());
  for (const TrainingRow& r : table.rows) magnitudes.push_back(std::abs(r.output_slope));
  std::sort(magnitudes.begin(), magnitudes.end());
  const double dummy_slope = magnitudes[magnitudes.size() / 2];

  BundleTrainResult result;
  result.model = std::make_shared<TransferModel>(
      std::move(trained[0].net), std::move(trained[1].net), std::move(trained[2].net),
      std::move(trained[3].net), std::move(region), kind, fo, dummy_slope);
  for (int i = 0; i < 4; ++i) result.val_mse[i] = trained[i].val_mse;
  result.delay_spread = table.delay_max() - table.delay_min();
  result.val_rms_delay = std::sqrt(0.5 * (trained[1].val_mse + trained[3].val_mse));

  result.model->meta["slope_min"] = format_double(table.min_input_slope_magnitude());
  result.model->meta["slope_max"] = format_double(table.max_input_slope_magnitude());
  result.model->meta["mean_delay"] = format_double(table.mean_delay());
  result.model->meta["delay_spread"] = format_double(result.delay_spread);
  result.model->meta["val_rms_delay"] = format_double(result.val_rms_delay);
  result.model->meta["rows"] = std::to_string(table.rows.size());
  return result;
}

}  // namespace sigsim
