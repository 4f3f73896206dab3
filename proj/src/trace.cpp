#include "sigsim/trace.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sigsim/errors.hpp"
#include "sigsim/util.hpp"

namespace sigsim {

double logistic_value(double t_seconds, const Transition& s) {
  const double u = s.slope * (to_scaled(t_seconds) - s.time);
  if (u >= 0.0) {
    return 1.0 / (1.0 + std::exp(-u));
  }
  const double e = std::exp(u);
  return e / (1.0 + e);
}

int DigitalTrace::level_at(double t_seconds) const {
  size_t flips = 0;
  for (const Crossing& c : crossings) {
    if (c.time <= t_seconds) ++flips;
  }
  return (initial_level + static_cast<int>(flips % 2)) % 2;
}

int DigitalTrace::final_level() const {
  return (initial_level + static_cast<int>(crossings.size() % 2)) % 2;
}

double SigmoidTrace::value_at(double t_seconds) const {
  double sum = 0.0;
  int falling = 0;
  for (const Transition& s : transitions) {
    if (is_dummy(s)) continue;
    sum += logistic_value(t_seconds, s);
    if (s.slope < 0.0) ++falling;
  }
  // Each falling transition contributes 1 at t = -inf; subtracting
  // (falling - initial_level) pins the -inf limit to initial_level * vdd.
  return vdd * (sum - (falling - initial_level));
}

int SigmoidTrace::final_level() const {
  size_t n = 0;
  for (const Transition& s : transitions) {
    if (!is_dummy(s)) ++n;
  }
  return (initial_level + static_cast<int>(n % 2)) % 2;
}

void SigmoidTrace::validate() const {
  if (!(vdd > 0.0) || !std::isfinite(vdd)) throw InvalidTrace("vdd must be positive");
  if (initial_level != 0 && initial_level != 1) throw InvalidTrace("initial level must be 0 or 1");
  bool expect_rising = initial_level == 0;
  double prev_time = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < transitions.size(); ++i) {
    const Transition& s = transitions[i];
    if (s.slope == 0.0 || !std::isfinite(s.slope)) {
      throw InvalidTrace("transition " + std::to_string(i) + " has invalid slope");
    }
    if (!std::isfinite(s.time)) {
      throw InvalidTrace("transition " + std::to_string(i) + " has non-finite time");
    }
    if (!(s.time > prev_time)) {
      throw InvalidTrace("transitions not strictly time-ordered at index " + std::to_string(i));
    }
    if (s.rising() != expect_rising) {
      throw InvalidTrace("polarity does not alternate at index " + std::to_string(i));
    }
    prev_time = s.time;
    expect_rising = !expect_rising;
  }
}

namespace {

// The digitizer works in time offsets relative to the first transition. Time
// differences between grid-aligned values are exact, so shifting a trace by a
// grid-aligned offset reproduces every offset computation bit for bit and
// crossings translate exactly, not just to the bisection tolerance.
struct RelativeWaveform {
  std::vector<double> offsets;  // transition time minus anchor, scaled
  std::vector<double> slopes;
  double anchor = 0.0;
  double vdd = 0.0;
  int supply_offset = 0;

  double value(double delta) const {
    double sum = 0.0;
    for (size_t i = 0; i < offsets.size(); ++i) {
      const double u = slopes[i] * (delta - offsets[i]);
      if (u >= 0.0) {
        sum += 1.0 / (1.0 + std::exp(-u));
      } else {
        const double e = std::exp(u);
        sum += e / (1.0 + e);
      }
    }
    return vdd * (sum - supply_offset);
  }
};

double bisect_crossing(const RelativeWaveform& w, double lo, double hi, double f_lo, double vth) {
  // f_lo < 0 means the waveform is below vth at lo; tolerance 1e-15 seconds
  constexpr double tol = 1e-15 * kScaledPerSecond;
  for (int i = 0; i < 200 && (hi - lo) > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = w.value(mid) - vth;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

DigitalTrace SigmoidTrace::digitize(double vth) const {
  if (!(vth > 0.0 && vth < vdd)) throw InvalidTrace("threshold outside (0, vdd)");
  std::vector<Transition> real;
  real.reserve(transitions.size());
  for (const Transition& s : transitions) {
    if (!is_dummy(s)) real.push_back(s);
  }

  DigitalTrace result;
  if (real.empty()) {
    result.initial_level = initial_level;
    return result;
  }

  RelativeWaveform wave;
  wave.anchor = real.front().time;
  wave.vdd = vdd;
  int falling = 0;
  for (const Transition& s : real) {
    wave.offsets.push_back(s.time - wave.anchor);
    wave.slopes.push_back(s.slope);
    if (s.slope < 0.0) ++falling;
  }
  wave.supply_offset = falling - initial_level;

  // Candidate bracket points (relative, scaled): each transition offset
  // extended by 5/|a| and 40/|a| on both sides, plus the interior extremum
  // and midpoint of every adjacent pair.
  std::vector<double> cand;
  cand.reserve(real.size() * 7);
  for (size_t i = 0; i < real.size(); ++i) {
    const double w5 = 5.0 / std::abs(wave.slopes[i]);
    const double w40 = 40.0 / std::abs(wave.slopes[i]);
    const double d = wave.offsets[i];
    cand.push_back(d - w40);
    cand.push_back(d - w5);
    cand.push_back(d);
    cand.push_back(d + w5);
    cand.push_back(d + w40);
  }
  for (size_t i = 0; i + 1 < real.size(); ++i) {
    const double lo = wave.offsets[i];
    const double hi = wave.offsets[i + 1];
    if (!(hi > lo)) continue;
    cand.push_back(0.5 * (lo + hi));
    const double tol = std::max(1e-6, (hi - lo) * 1e-10);
    if (real[i].rising()) {
      cand.push_back(golden_section_max([&](double d) { return wave.value(d); }, lo, hi, tol));
    } else {
      cand.push_back(golden_section_min([&](double d) { return wave.value(d); }, lo, hi, tol));
    }
  }
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  std::vector<double> f(cand.size());
  for (size_t i = 0; i < cand.size(); ++i) f[i] = wave.value(cand[i]) - vth;

  result.initial_level = f.front() > 0.0 ? 1 : 0;

  // Analytic per-transition crossing candidates; when a bracket contains one
  // and the full waveform value there matches vth to within tail noise, the
  // crossing snaps to it exactly.
  const double logit = std::log((vth / vdd) / (1.0 - vth / vdd));
  std::vector<double> snap;
  snap.reserve(real.size());
  for (size_t i = 0; i < real.size(); ++i) {
    snap.push_back(wave.offsets[i] + logit / wave.slopes[i]);
  }

  for (size_t i = 1; i < cand.size(); ++i) {
    const bool below_prev = f[i - 1] < 0.0;
    const bool below_cur = f[i] < 0.0;
    if (below_prev == below_cur) continue;
    double d_cross = -std::numeric_limits<double>::infinity();
    bool snapped = false;
    for (double ds : snap) {
      if (ds >= cand[i - 1] && ds <= cand[i] && std::abs(wave.value(ds) - vth) <= 1e-10 * vdd) {
        d_cross = ds;
        snapped = true;
        break;
      }
    }
    if (!snapped) {
      d_cross = bisect_crossing(wave, cand[i - 1], cand[i], f[i - 1], vth);
    }
    result.crossings.push_back({to_seconds(wave.anchor + d_cross), below_prev});
  }
  return result;
}

double mismatch_time(const DigitalTrace& p, const DigitalTrace& q, double horizon) {
  if (!(horizon >= 0.0)) throw InvalidTrace("horizon must be non-negative");
  int lp = p.level_at(0.0);
  int lq = q.level_at(0.0);

  std::vector<std::pair<double, int>> events;  // (time, which trace)
  for (const Crossing& c : p.crossings) {
    if (c.time > 0.0 && c.time < horizon) events.push_back({c.time, 0});
  }
  for (const Crossing& c : q.crossings) {
    if (c.time > 0.0 && c.time < horizon) events.push_back({c.time, 1});
  }
  std::sort(events.begin(), events.end());

  double acc = 0.0;
  double t_cur = 0.0;
  for (const auto& [t, which] : events) {
    if (lp != lq) acc += t - t_cur;
    t_cur = t;
    if (which == 0) {
      lp ^= 1;
    } else {
      lq ^= 1;
    }
  }
  if (lp != lq) acc += horizon - t_cur;
  return acc;
}

namespace {

bool parse_double(const std::string& tok, double* out) {
  char* end = nullptr;
  *out = std::strtod(tok.c_str(), &end);
  return end != nullptr && *end == '\0' && end != tok.c_str();
}

}  // namespace

SigmoidTrace read_trace(std::istream& in) {
  SigmoidTrace trace;
  bool have_vdd = false;
  bool have_initial = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "vdd") {
      std::string v;
      if (!(ls >> v) || !parse_double(v, &trace.vdd)) {
        throw InvalidTrace("bad vdd header at line " + std::to_string(lineno));
      }
      have_vdd = true;
    } else if (first == "initial") {
      int lvl = -1;
      if (!(ls >> lvl) || (lvl != 0 && lvl != 1)) {
        throw InvalidTrace("bad initial header at line " + std::to_string(lineno));
      }
      trace.initial_level = lvl;
      have_initial = true;
    } else {
      Transition s;
      std::string second;
      if (!parse_double(first, &s.slope) || !(ls >> second) || !parse_double(second, &s.time)) {
        throw InvalidTrace("bad transition at line " + std::to_string(lineno));
      }
      std::string extra;
      if (ls >> extra) throw InvalidTrace("trailing tokens at line " + std::to_string(lineno));
      trace.transitions.push_back(s);
    }
  }
  if (!have_vdd) throw InvalidTrace("trace file missing vdd header");
  if (!have_initial) throw InvalidTrace("trace file missing initial header");
  trace.validate();
  return trace;
}

SigmoidTrace read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace file: " + path);
  return read_trace(in);
}

void write_trace(std::ostream& out, const SigmoidTrace& trace) {
  out << "vdd " << format_double(trace.vdd) << "\n";
  out << "initial " << trace.initial_level << "\n";
  for (const Transition& s : trace.transitions) {
    out << format_double(s.slope) << " " << format_double(s.time) << "\n";
  }
}

void write_trace_file(const std::string& path, const SigmoidTrace& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write trace file: " + path);
  write_trace(out, trace);
}

}  // namespace sigsim
