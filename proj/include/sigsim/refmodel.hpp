#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sigsim/netlist.hpp"
#include "sigsim/sampled.hpp"
#include "sigsim/trace.hpp"

namespace sigsim {

// First-order switching model standing in for a transistor-level simulator:
// the output relaxes exponentially toward the boolean target level, with the
// time constant scaled by output load and by the input's 20-80% slew.
struct AnalogGateParams {
  double vdd = 0.8;
  double tau_rise = 4e-12;
  double tau_fall = 3e-12;
  double load_alpha = 0.35;  // extra tau per additional driven gate
  double slew_beta = 0.2;    // strength of the input-slew dependence

  double vth() const { return 0.5 * vdd; }
  double load_factor(int fanout) const {
    const int f = fanout < 1 ? 1 : fanout;
    return 1.0 + load_alpha * (f - 1);
  }
  void validate() const;
};

// NOR semantics over 1..2 inputs (a single input makes it an inverter).
// Integrates dV/dt = (target - V) / tau with explicit steps at the input
// sample step; throws StepTooCoarse unless dt <= min(tau)/20.
SampledWaveform solve_gate(const AnalogGateParams& params,
                           const std::vector<const SampledWaveform*>& inputs, int fanout);

// Whole-circuit reference simulation in topological order.
std::map<std::string, SampledWaveform> analog_simulate(
    const Circuit& circuit, const AnalogGateParams& params,
    const std::map<std::string, SampledWaveform>& stimuli);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;  // all seconds

  int count() const;
  double at(int i) const { return lo + step * i; }
  void validate() const;
};

struct SweepSpec {
  Range ta{5e-12, 20e-12, 1e-12};
  Range tb{5e-12, 20e-12, 1e-12};
  Range tc{5e-12, 20e-12, 1e-12};
  int target_gates = 4;   // recorded chain stages
  int prefix_gates = 3;   // pulse shaping before the targets
  int suffix_gates = 2;   // termination after the targets
  double sim_dt = 1e-13;
  int fit_stride = 2;     // waveforms are thinned by this factor before fitting
  double lead_time = 2e-11;

  void validate() const;
  int grid_points() const { return ta.count() * tb.count() * tc.count(); }
};

struct TrainingRow {
  double gap = 0.0;
  double input_slope = 0.0;
  double prev_output_slope = 0.0;
  double output_slope = 0.0;
  double delay = 0.0;
  int grid[3] = {0, 0, 0};
  int gate = 0;
};

struct TrainingTable {
  std::vector<TrainingRow> rows;

  double min_input_slope_magnitude() const;
  double max_input_slope_magnitude() const;
  double delay_min() const;
  double delay_max() const;
  double mean_delay() const;
};

// Tab-separated columns: gap, input slope, previous output slope, output
// slope, delay, grid indices, gate index.
void write_table_file(const std::string& path, const TrainingTable& table);
TrainingTable read_table_file(const std::string& path);

struct CharacterizationReport {
  size_t rows_kept = 0;
  size_t rows_deduplicated = 0;
  size_t fits_failed = 0;
  size_t recordings_skipped = 0;  // transition-count mismatch between in/out
};

// The two-pulse stimulus and every stage's waveform for one grid point of the
// sweep; wave[0] is the stimulus, wave[i + 1] the output of stage i.
std::vector<SampledWaveform> characterization_chain(const SweepSpec& spec,
                                                    const AnalogGateParams& params, int fanout,
                                                    double t_a, double t_b, double t_c);

// Sweeps the three-interval pulse stimulus over a homogeneous gate chain,
// fits every recorded waveform and pairs consecutive transitions into
// training rows. Grid points are processed independently and merged in grid
// order, so results do not depend on the job count.
TrainingTable run_characterization(const SweepSpec& spec, const AnalogGateParams& params,
                                   GateKind kind, int fanout, int jobs,
                                   CharacterizationReport* report = nullptr);

// Randomized stimulus: inter-transition gaps from N(mu_t, sigma_t) truncated
// below at 1 ps, alternating polarity, slope magnitudes uniform in
// [slope_lo, slope_hi]. Times are quantized to the engine grid.
SigmoidTrace gen_random_stimuli(double mu_t, double sigma_t, int n_transitions, uint64_t seed,
                                double slope_lo, double slope_hi, int initial_level = 0,
                                double vdd = 0.8);

}  // namespace sigsim
