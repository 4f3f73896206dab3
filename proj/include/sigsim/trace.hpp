#pragma once

#include <cmath>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace sigsim {

// Transition times are stored scaled by 1e10 (one unit per 100 ps) so slope
// and time parameters live in comparable numeric ranges.
inline constexpr double kScaledPerSecond = 1e10;
inline constexpr double kSecondsPerScaled = 1e-10;

inline double to_scaled(double seconds) { return seconds * kScaledPerSecond; }
inline double to_seconds(double scaled) { return scaled * kSecondsPerScaled; }

// Predicted times are rounded to this dyadic grid (about 2.4e-17 s, far below
// any modeled effect). Grid-aligned times make simulation exactly
// shift-covariant: adding a grid-aligned offset to grid-aligned stimuli
// shifts every predicted time exactly and reproduces every slope bit for bit,
// because time differences between grid values carry no rounding error.
inline constexpr double kTimeQuantum = 0x1.0p-22;

inline double quantize_time(double scaled) {
  return std::nearbyint(scaled / kTimeQuantum) * kTimeQuantum;
}

// One signal edge: a logistic step with slope parameter `slope` (sign gives
// polarity, positive = rising) occurring at scaled time `time`.
struct Transition {
  double slope = 0.0;
  double time = 0.0;
  bool rising() const { return slope > 0.0; }
};

// The prediction engine seeds gate histories with a transition assumed to
// have happened at t = -inf; evaluation ignores it.
inline Transition dummy_transition(double slope) {
  return {slope, -std::numeric_limits<double>::infinity()};
}
inline bool is_dummy(const Transition& t) { return !std::isfinite(t.time); }

// Value of a single transition's logistic at time t (seconds), in (0, 1).
// Saturates instead of overflowing for extreme arguments.
double logistic_value(double t_seconds, const Transition& s);

struct Crossing {
  double time = 0.0;  // seconds
  bool rising = false;
};

struct DigitalTrace {
  std::vector<Crossing> crossings;
  int initial_level = 0;

  int level_at(double t_seconds) const;
  int final_level() const;
};

// A waveform encoded as a polarity-alternating list of transitions plus the
// supply voltage and the logic level at t = -inf.
struct SigmoidTrace {
  std::vector<Transition> transitions;
  double vdd = 0.8;
  int initial_level = 0;

  // Waveform voltage at time t (seconds). The integer supply-voltage offset
  // is chosen so the value tends to initial_level * vdd as t -> -inf.
  double value_at(double t_seconds) const;

  int final_level() const;

  // All threshold crossings of the evaluated waveform. Sub-threshold pulses
  // produce no crossings.
  DigitalTrace digitize(double vth) const;

  // Throws InvalidTrace if the ordering/alternation/finiteness invariants do
  // not hold.
  void validate() const;
};

// Lebesgue measure of { t in [0, horizon] : level_p(t) != level_q(t) }.
double mismatch_time(const DigitalTrace& p, const DigitalTrace& q, double horizon);

// Text format: `vdd <volts>`, `initial <0|1>`, then one `a b` pair per line.
// `#` starts a comment. Values round-trip bit-exactly.
SigmoidTrace read_trace(std::istream& in);
SigmoidTrace read_trace_file(const std::string& path);
void write_trace(std::ostream& out, const SigmoidTrace& trace);
void write_trace_file(const std::string& path, const SigmoidTrace& trace);

}  // namespace sigsim
