#include "sigsim/refmodel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "sigsim/errors.hpp"
#include "sigsim/fit.hpp"
#include "sigsim/random.hpp"
#include "sigsim/util.hpp"

namespace sigsim {

void AnalogGateParams::validate() const {
  if (!(vdd > 0.0) || !(tau_rise > 0.0) || !(tau_fall > 0.0)) {
    throw DataError("analog parameters must be positive");
  }
  if (load_alpha < 0.0 || slew_beta < 0.0) throw DataError("load/slew factors must be >= 0");
}

namespace {

// Interpolated time where waveform w crosses `level`, scanning from sample
// index `from` in direction `dir`. Negative when not found.
double scan_for_level(const SampledWaveform& w, long from, int dir, double level, bool want_below) {
  const long n = static_cast<long>(w.samples.size());
  for (long i = from; i >= 0 && i < n; i += dir) {
    const double v = w.samples[static_cast<size_t>(i)];
    if (want_below ? (v <= level) : (v >= level)) {
      const long j = i - dir;
      if (j < 0 || j >= n) return w.time_at(static_cast<size_t>(i));
      const double vj = w.samples[static_cast<size_t>(j)];
      if (vj == v) return w.time_at(static_cast<size_t>(i));
      const double frac = (level - v) / (vj - v);
      return w.t0 + w.dt * (static_cast<double>(i) + frac * static_cast<double>(j - i));
    }
  }
  return -1.0;
}

// 20%-80% slew of the input transition that crossed vth between samples
// j-1 and j. Returns 0 when a level is out of reach (treated as a step).
double measure_slew(const SampledWaveform& w, size_t j, double vdd) {
  const bool upward = w.samples[j] > w.samples[j - 1];
  const double lo_level = upward ? 0.2 * vdd : 0.8 * vdd;
  const double hi_level = upward ? 0.8 * vdd : 0.2 * vdd;
  const double t_lo = scan_for_level(w, static_cast<long>(j) - 1, -1, lo_level, upward);
  const double t_hi = scan_for_level(w, static_cast<long>(j), +1, hi_level, !upward);
  if (t_lo < 0.0 || t_hi <= t_lo) return 0.0;
  return t_hi - t_lo;
}

}  // namespace

SampledWaveform solve_gate(const AnalogGateParams& params,
                           const std::vector<const SampledWaveform*>& inputs, int fanout) {
  params.validate();
  if (inputs.empty() || inputs.size() > 2) throw DataError("solve_gate takes 1 or 2 inputs");
  for (const SampledWaveform* w : inputs) w->validate();
  const SampledWaveform& first = *inputs[0];
  for (const SampledWaveform* w : inputs) {
    if (w->t0 != first.t0 || w->dt != first.dt || w->samples.size() != first.samples.size()) {
      throw DataError("solve_gate inputs must share the sampling grid");
    }
  }
  const double dt = first.dt;
  const double tau_min = std::min(params.tau_rise, params.tau_fall);
  if (dt > tau_min / 20.0) {
    throw StepTooCoarse("dt " + format_double(dt) + " exceeds tau/20 = " +
                        format_double(tau_min / 20.0));
  }

  const double vth = params.vth();
  const double load = params.load_factor(fanout);
  const size_t n = first.samples.size();

  auto target_at = [&](size_t j) {
    for (const SampledWaveform* w : inputs) {
      if (w->samples[j] >= vth) return 0.0;
    }
    return params.vdd;
  };

  SampledWaveform out;
  out.t0 = first.t0;
  out.dt = dt;
  out.samples.resize(n);

  double target = target_at(0);
  double v = target;  // assume steady state at the window start
  double cur_slew = 0.0;
  out.samples[0] = v;
  for (size_t j = 1; j < n; ++j) {
    const double tgt = target_at(j);
    if (tgt != target) {
      // the lowest-indexed input that crossed vth this step sets the slew
      for (const SampledWaveform* w : inputs) {
        const bool was = w->samples[j - 1] >= vth;
        const bool now = w->samples[j] >= vth;
        if (was != now) {
          cur_slew = measure_slew(*w, j, params.vdd);
          break;
        }
      }
      target = tgt;
    }
    const bool rising = target > v;
    const double tau_loaded = (rising ? params.tau_rise : params.tau_fall) * load;
    const double factor =
        1.0 + params.slew_beta * std::clamp(cur_slew / tau_loaded - 1.0, 0.0, 2.0);
    v += dt * (target - v) / (tau_loaded * factor);
    out.samples[j] = v;
  }
  return out;
}

std::map<std::string, SampledWaveform> analog_simulate(
    const Circuit& circuit, const AnalogGateParams& params,
    const std::map<std::string, SampledWaveform>& stimuli) {
  if (circuit.topo_order.size() != circuit.gates.size()) {
    throw CyclicCircuit("circuit is not a finalized DAG");
  }
  std::map<std::string, SampledWaveform> nets = stimuli;
  for (const auto& pi : circuit.primary_inputs) {
    if (!nets.count(pi)) throw MissingStimulus("no waveform for primary input '" + pi + "'");
  }
  for (size_t gi : circuit.topo_order) {
    const Gate& g = circuit.gates[gi];
    std::vector<const SampledWaveform*> ins;
    for (const auto& name : g.inputs) ins.push_back(&nets.at(name));
    nets[g.output] = solve_gate(params, ins, circuit.fanout[gi]);
  }
  return nets;
}

int Range::count() const {
  if (!(step > 0.0) || hi < lo) return 0;
  return static_cast<int>(std::floor((hi - lo) / step + 0.5)) + 1;
}

void Range::validate() const {
  if (count() < 1) throw DataError("range is empty");
}

void SweepSpec::validate() const {
  ta.validate();
  tb.validate();
  tc.validate();
  if (target_gates < 1 || prefix_gates < 0 || suffix_gates < 0) {
    throw DataError("sweep chain configuration invalid");
  }
  if (!(sim_dt > 0.0) || fit_stride < 1 || !(lead_time > 0.0)) {
    throw DataError("sweep timing configuration invalid");
  }
}

double TrainingTable::min_input_slope_magnitude() const {
  double v = std::numeric_limits<double>::infinity();
  for (const TrainingRow& r : rows) v = std::min(v, std::abs(r.input_slope));
  return v;
}

double TrainingTable::max_input_slope_magnitude() const {
  double v = 0.0;
  for (const TrainingRow& r : rows) v = std::max(v, std::abs(r.input_slope));
  return v;
}

double TrainingTable::delay_min() const {
  double v = std::numeric_limits<double>::infinity();
  for (const TrainingRow& r : rows) v = std::min(v, r.delay);
  return v;
}

double TrainingTable::delay_max() const {
  double v = -std::numeric_limits<double>::infinity();
  for (const TrainingRow& r : rows) v = std::max(v, r.delay);
  return v;
}

double TrainingTable::mean_delay() const {
  if (rows.empty()) return 0.0;
  double acc = 0.0;
  for (const TrainingRow& r : rows) acc += r.delay;
  return acc / static_cast<double>(rows.size());
}

void write_table_file(const std::string& path, const TrainingTable& table) {
  std::ostringstream out;
  out << "# gap\tinput_slope\tprev_output_slope\toutput_slope\tdelay\tgrid_a\tgrid_b\tgrid_c\tgate\n";
  for (const TrainingRow& r : table.rows) {
    out << format_double(r.gap) << "\t" << format_double(r.input_slope) << "\t"
        << format_double(r.prev_output_slope) << "\t" << format_double(r.output_slope) << "\t"
        << format_double(r.delay) << "\t" << r.grid[0] << "\t" << r.grid[1] << "\t" << r.grid[2]
        << "\t" << r.gate << "\n";
  }
  write_text_file(path, out.str());
}

TrainingTable read_table_file(const std::string& path) {
  TrainingTable table;
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    TrainingRow r;
    if (!(ls >> r.gap >> r.input_slope >> r.prev_output_slope >> r.output_slope >> r.delay >>
          r.grid[0] >> r.grid[1] >> r.grid[2] >> r.gate)) {
      throw DataError("bad table row at line " + std::to_string(lineno) + " in " + path);
    }
    table.rows.push_back(r);
  }
  if (table.rows.empty()) throw DataError("training table is empty: " + path);
  return table;
}

namespace {

struct GridPointResult {
  std::vector<TrainingRow> rows;
  size_t fits_failed = 0;
  size_t recordings_skipped = 0;
};

SampledWaveform thin_waveform(const SampledWaveform& w, int stride) {
  if (stride <= 1) return w;
  SampledWaveform out;
  out.t0 = w.t0;
  out.dt = w.dt * stride;
  out.samples.reserve(w.samples.size() / stride + 1);
  for (size_t i = 0; i < w.samples.size(); i += static_cast<size_t>(stride)) {
    out.samples.push_back(w.samples[i]);
  }
  return out;
}

GridPointResult characterize_grid_point(const SweepSpec& spec, const AnalogGateParams& params,
                                        int fanout, double t_a, double t_b, double t_c,
                                        const int grid[3]) {
  GridPointResult result;
  const std::vector<SampledWaveform> wave =
      characterization_chain(spec, params, fanout, t_a, t_b, t_c);

  // Fit each recorded net once; stage g maps wave[g] -> wave[g + 1].
  const int fit_lo = spec.prefix_gates;
  const int fit_hi = spec.prefix_gates + spec.target_gates;  // inclusive
  const double vth = params.vth();
  std::vector<std::optional<SigmoidTrace>> fits(static_cast<size_t>(fit_hi) + 1);
  for (int i = fit_lo; i <= fit_hi; ++i) {
    const SampledWaveform thin = thin_waveform(wave[static_cast<size_t>(i)], spec.fit_stride);
    const DigitalTrace crossings = thin.crossings(vth);
    if (crossings.crossings.empty()) continue;
    try {
      fits[static_cast<size_t>(i)] =
          fit_trace(thin, static_cast<int>(crossings.crossings.size()), params.vdd,
                    crossings.initial_level, FitConfig{})
              .trace;
    } catch (const NumericError&) {
      ++result.fits_failed;
    }
  }

  for (int g = fit_lo; g < fit_hi; ++g) {
    const auto& in_fit = fits[static_cast<size_t>(g)];
    const auto& out_fit = fits[static_cast<size_t>(g) + 1];
    if (!in_fit || !out_fit) continue;
    if (in_fit->transitions.size() != out_fit->transitions.size()) {
      ++result.recordings_skipped;
      continue;
    }
    const auto& tin = in_fit->transitions;
    const auto& tout = out_fit->transitions;
    bool aligned = true;
    for (size_t i = 0; i < tin.size(); ++i) {
      if (tin[i].rising() == tout[i].rising()) aligned = false;  // stage inverts
    }
    if (!aligned) {
      ++result.recordings_skipped;
      continue;
    }
    for (size_t i = 1; i < tin.size(); ++i) {
      TrainingRow row;
      row.gap = tin[i].time - tout[i - 1].time;
      row.input_slope = tin[i].slope;
      row.prev_output_slope = tout[i - 1].slope;
      row.output_slope = tout[i].slope;
      row.delay = tout[i].time - tin[i].time;
      row.grid[0] = grid[0];
      row.grid[1] = grid[1];
      row.grid[2] = grid[2];
      row.gate = g - fit_lo;
      if (!(row.delay > 0.0) || row.delay > 1.0 || !std::isfinite(row.gap)) {
        ++result.fits_failed;
        continue;
      }
      result.rows.push_back(row);
    }
  }
  return result;
}

}  // namespace

std::vector<SampledWaveform> characterization_chain(const SweepSpec& spec,
                                                    const AnalogGateParams& params, int fanout,
                                                    double t_a, double t_b, double t_c) {
  const int n_stages = spec.prefix_gates + spec.target_gates + spec.suffix_gates;
  const double tau_bound = std::max(params.tau_rise, params.tau_fall) *
                           params.load_factor(fanout) * (1.0 + 2.0 * params.slew_beta);
  const double span =
      spec.lead_time + t_a + t_b + t_c + 2.0 * tau_bound * n_stages + 12.0 * tau_bound;

  // Two idealized pulses: up for t_a, gap t_b, up for t_c.
  SampledWaveform stim;
  stim.t0 = 0.0;
  stim.dt = spec.sim_dt;
  const size_t n = static_cast<size_t>(std::ceil(span / spec.sim_dt)) + 1;
  stim.samples.assign(n, 0.0);
  const double e1 = spec.lead_time;
  const double e2 = e1 + t_a;
  const double e3 = e2 + t_b;
  const double e4 = e3 + t_c;
  for (size_t j = 0; j < n; ++j) {
    const double t = stim.time_at(j);
    const bool high = (t >= e1 && t < e2) || (t >= e3 && t < e4);
    stim.samples[j] = high ? params.vdd : 0.0;
  }

  std::vector<SampledWaveform> wave(static_cast<size_t>(n_stages) + 1);
  wave[0] = stim;
  for (int i = 0; i < n_stages; ++i) {
    wave[static_cast<size_t>(i) + 1] = solve_gate(params, {&wave[static_cast<size_t>(i)]}, fanout);
  }
  return wave;
}

TrainingTable run_characterization(const SweepSpec& spec, const AnalogGateParams& params,
                                   GateKind kind, int fanout, int jobs,
                                   CharacterizationReport* report) {
  spec.validate();
  params.validate();
  (void)kind;  // INV and grounded-input NOR share the same first-order dynamics
  if (fanout < 1) throw DataError("fanout must be >= 1");

  const int na = spec.ta.count();
  const int nb = spec.tb.count();
  const int nc = spec.tc.count();
  const size_t total = static_cast<size_t>(na) * nb * nc;
  std::vector<GridPointResult> results(total);
  parallel_for(total, jobs, [&](size_t idx) {
    const int ia = static_cast<int>(idx) / (nb * nc);
    const int ib = (static_cast<int>(idx) / nc) % nb;
    const int ic = static_cast<int>(idx) % nc;
    const int grid[3] = {ia, ib, ic};
    results[idx] = characterize_grid_point(spec, params, fanout, spec.ta.at(ia), spec.tb.at(ib),
                                           spec.tc.at(ic), grid);
  });

  TrainingTable table;
  CharacterizationReport rep;
  for (const GridPointResult& r : results) {
    rep.fits_failed += r.fits_failed;
    rep.recordings_skipped += r.recordings_skipped;
    table.rows.insert(table.rows.end(), r.rows.begin(), r.rows.end());
  }

  // Near-duplicate removal: rows falling into the same 1e-3 cell of the
  // normalized feature space keep only their first representative.
  if (!table.rows.empty()) {
    double lo[3], hi[3];
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::numeric_limits<double>::infinity();
      hi[k] = -std::numeric_limits<double>::infinity();
    }
    for (const TrainingRow& r : table.rows) {
      const double c[3] = {r.gap, r.input_slope, r.prev_output_slope};
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], c[k]);
        hi[k] = std::max(hi[k], c[k]);
      }
    }
    double extent[3];
    for (int k = 0; k < 3; ++k) extent[k] = std::max(hi[k] - lo[k], 1e-12);
    std::unordered_set<uint64_t> seen;
    std::vector<TrainingRow> kept;
    kept.reserve(table.rows.size());
    for (const TrainingRow& r : table.rows) {
      const double c[3] = {r.gap, r.input_slope, r.prev_output_slope};
      uint64_t key = 0;
      for (int k = 0; k < 3; ++k) {
        const uint64_t cell = static_cast<uint64_t>((c[k] - lo[k]) / extent[k] / 1e-3);
        key = key * 1048583ULL + cell;
      }
      if (seen.insert(key).second) {
        kept.push_back(r);
      } else {
        ++rep.rows_deduplicated;
      }
    }
    table.rows = std::move(kept);
  }
  rep.rows_kept = table.rows.size();
  if (report != nullptr) *report = rep;
  return table;
}

SigmoidTrace gen_random_stimuli(double mu_t, double sigma_t, int n_transitions, uint64_t seed,
                                double slope_lo, double slope_hi, int initial_level, double vdd) {
  if (!(mu_t > 0.0)) throw DataError("mu_t must be positive");
  if (sigma_t < 0.0) throw DataError("sigma_t must be >= 0");
  if (n_transitions < 0) throw DataError("n_transitions must be >= 0");
  if (!(slope_lo > 0.0) || !(slope_hi >= slope_lo)) throw DataError("bad slope range");

  Rng rng(seed);
  SigmoidTrace trace;
  trace.vdd = vdd;
  trace.initial_level = initial_level;
  bool rising = initial_level == 0;
  double t = 0.0;
  for (int i = 0; i < n_transitions; ++i) {
    const double gap = std::max(rng.normal(mu_t, sigma_t), 1e-12);
    t += gap;
    const double magnitude = rng.uniform(slope_lo, slope_hi);
    trace.transitions.push_back({rising ? magnitude : -magnitude, quantize_time(to_scaled(t))});
    rising = !rising;
  }
  trace.validate();
  return trace;
}

}  // namespace sigsim
