#pragma once

#include <string>
#include <vector>

#include "sigsim/trace.hpp"

namespace sigsim {

// Uniformly sampled (time, voltage) series: the fitting input and the output
// of the analog reference model.
struct SampledWaveform {
  double t0 = 0.0;      // seconds
  double dt = 0.0;      // seconds, > 0
  std::vector<double> samples;

  double time_at(size_t i) const { return t0 + dt * static_cast<double>(i); }
  double end_time() const { return samples.empty() ? t0 : time_at(samples.size() - 1); }

  // Linear interpolation, clamped to the end samples.
  double value_at(double t_seconds) const;

  // Threshold crossings by linear interpolation between straddling samples.
  DigitalTrace crossings(double vth) const;

  void validate() const;
};

// Samples a sigmoid trace over [t_begin, t_end] at step dt.
SampledWaveform sample_trace(const SigmoidTrace& trace, double t_begin, double t_end, double dt);

// Text format: `t0 <s>`, `dt <s>`, then one voltage per line.
SampledWaveform read_waveform(std::istream& in);
SampledWaveform read_waveform_file(const std::string& path);
void write_waveform(std::ostream& out, const SampledWaveform& w);
void write_waveform_file(const std::string& path, const SampledWaveform& w);

}  // namespace sigsim
