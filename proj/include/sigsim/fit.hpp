#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "sigsim/sampled.hpp"
#include "sigsim/trace.hpp"

namespace sigsim {

struct FitConfig {
  int max_iterations = 200;
  double initial_damping = 1e-3;
  double convergence_tol = 1e-10;   // relative cost change
  double inflection_weight = 10.0;  // extra weight near seed crossings
  double inflection_window = 5e-12; // seconds

  void validate() const;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

enum class LmStop { Converged, MaxIterations, DampingOverflow };

struct LmResult {
  Eigen::VectorXd params;
  double cost = 0.0;  // 0.5 * ||r||^2
  int iterations = 0;
  LmStop stop = LmStop::Converged;
  std::vector<double> cost_log;  // cost after init and after each accepted step
};

// Damped least squares with Marquardt diagonal scaling. `jacobian` may be
// empty, in which case forward differences are used.
LmResult levenberg_marquardt(const ResidualFn& residuals, const JacobianFn& jacobian,
                             const Eigen::VectorXd& init, const FitConfig& cfg);

// Joint trace model and its analytic Jacobian, exposed for cross-checking.
// Parameters are packed (a1, b1, a2, b2, ...); `offset` is the integer
// supply-voltage multiple subtracted from the sum of logistics.
double trace_model_value(const Eigen::VectorXd& params, double t_scaled, double vdd, int offset);
void trace_model_jacobian_row(const Eigen::VectorXd& params, double t_scaled, double vdd,
                              Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row);

struct FitReport {
  SigmoidTrace trace;
  double rms = 0.0;  // unweighted RMS residual, volts
  LmResult lm;
};

// Compresses a sampled waveform into a trace of `n_transitions` sigmoids.
// Samples are clipped to [0, vdd]; seeds come from the vdd/2 crossings of the
// clipped samples; samples near those crossings get `inflection_weight`.
FitReport fit_trace(const SampledWaveform& w, int n_transitions, double vdd, int initial_level,
                    const FitConfig& cfg = {});

}  // namespace sigsim
