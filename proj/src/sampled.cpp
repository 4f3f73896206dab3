#include "sigsim/sampled.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sigsim/errors.hpp"
#include "sigsim/util.hpp"

namespace sigsim {

double SampledWaveform::value_at(double t_seconds) const {
  if (samples.empty()) return 0.0;
  const double pos = (t_seconds - t0) / dt;
  if (pos <= 0.0) return samples.front();
  if (pos >= static_cast<double>(samples.size() - 1)) return samples.back();
  const size_t i = static_cast<size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return samples[i] + frac * (samples[i + 1] - samples[i]);
}

DigitalTrace SampledWaveform::crossings(double vth) const {
  DigitalTrace out;
  if (samples.empty()) return out;
  out.initial_level = samples.front() >= vth ? 1 : 0;
  bool above = samples.front() >= vth;
  for (size_t i = 1; i < samples.size(); ++i) {
    const bool above_now = samples[i] >= vth;
    if (above_now == above) continue;
    const double frac = (vth - samples[i - 1]) / (samples[i] - samples[i - 1]);
    out.crossings.push_back({time_at(i - 1) + frac * dt, above_now});
    above = above_now;
  }
  return out;
}

void SampledWaveform::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DataError("waveform dt must be positive");
  if (samples.empty()) throw DataError("waveform has no samples");
  if (!std::isfinite(t0)) throw DataError("waveform t0 must be finite");
  for (double v : samples) {
    if (!std::isfinite(v)) throw DataError("waveform contains non-finite sample");
  }
}

SampledWaveform sample_trace(const SigmoidTrace& trace, double t_begin, double t_end, double dt) {
  if (!(dt > 0.0) || !(t_end >= t_begin)) throw DataError("bad sampling window");
  SampledWaveform w;
  w.t0 = t_begin;
  w.dt = dt;
  const size_t n = static_cast<size_t>(std::floor((t_end - t_begin) / dt)) + 1;
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i) w.samples[i] = trace.value_at(w.time_at(i));
  return w;
}

SampledWaveform read_waveform(std::istream& in) {
  SampledWaveform w;
  bool have_t0 = false, have_dt = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    auto parse = [&](const std::string& tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') {
        throw DataError("bad number at waveform line " + std::to_string(lineno));
      }
      return v;
    };
    if (first == "t0") {
      std::string v;
      if (!(ls >> v)) throw DataError("bad t0 header");
      w.t0 = parse(v);
      have_t0 = true;
    } else if (first == "dt") {
      std::string v;
      if (!(ls >> v)) throw DataError("bad dt header");
      w.dt = parse(v);
      have_dt = true;
    } else {
      w.samples.push_back(parse(first));
    }
  }
  if (!have_t0 || !have_dt) throw DataError("waveform file missing t0/dt header");
  w.validate();
  return w;
}

SampledWaveform read_waveform_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open waveform file: " + path);
  return read_waveform(in);
}

void write_waveform(std::ostream& out, const SampledWaveform& w) {
  out << "t0 " << format_double(w.t0) << "\n";
  out << "dt " << format_double(w.dt) << "\n";
  for (double v : w.samples) out << format_double(v) << "\n";
}

void write_waveform_file(const std::string& path, const SampledWaveform& w) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write waveform file: " + path);
  write_waveform(out, w);
}

}  // namespace sigsim
