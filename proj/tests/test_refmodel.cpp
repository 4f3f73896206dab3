#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sigsim/errors.hpp"
#include "sigsim/refmodel.hpp"
#include "support/test_support.hpp"

using namespace sigsim;

namespace {

SampledWaveform step_input(double t_step, double vdd, double dt, double span, bool rising) {
  SampledWaveform w;
  w.t0 = 0.0;
  w.dt = dt;
  const size_t n = static_cast<size_t>(span / dt) + 1;
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const bool after = w.time_at(i) >= t_step;
    w.samples[i] = (after == rising) ? vdd : 0.0;
  }
  return w;
}

double first_crossing(const SampledWaveform& w, double vth) {
  const DigitalTrace d = w.crossings(vth);
  REQUIRE(!d.crossings.empty());
  return d.crossings[0].time;
}

}  // namespace

TEST_CASE("solve_gate first-order response") {
  AnalogGateParams params;
  const double dt = 1e-13;

  SUBCASE("falling output crosses at tau_fall * ln 2") {
    const double t1 = 5e-11;
    const SampledWaveform in = step_input(t1, params.vdd, dt, 2e-10, true);
    const SampledWaveform out = solve_gate(params, {&in}, 1);
    CHECK(out.samples[0] == doctest::Approx(params.vdd));
    const double t_cross = first_crossing(out, params.vth());
    CHECK(std::abs(t_cross - (t1 + params.tau_fall * std::log(2.0))) < 2.0 * dt);
  }
  SUBCASE("rising output crosses at tau_rise * ln 2") {
    const double t1 = 5e-11;
    const SampledWaveform in = step_input(t1, params.vdd, dt, 2e-10, false);
    const SampledWaveform out = solve_gate(params, {&in}, 1);
    CHECK(out.samples[0] == doctest::Approx(0.0));
    const double t_cross = first_crossing(out, params.vth());
    CHECK(std::abs(t_cross - (t1 + params.tau_rise * std::log(2.0))) < 2.0 * dt);
  }
  SUBCASE("NOR with one input held high stays at ground") {
    const SampledWaveform moving = step_input(5e-11, params.vdd, dt, 2e-10, true);
    SampledWaveform held = moving;
    for (double& s : held.samples) s = params.vdd;
    const SampledWaveform out = solve_gate(params, {&moving, &held}, 1);
    for (double v : out.samples) CHECK(v == doctest::Approx(0.0));
  }
  SUBCASE("output stays within the rails") {
    AnalogGateParams p2;
    SampledWaveform in;
    in.t0 = 0.0;
    in.dt = dt;
    const size_t n = 3000;
    in.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      // busy multi-pulse input
      const double t = in.time_at(i);
      in.samples[i] = (std::fmod(t, 2.4e-11) < 1.0e-11) ? p2.vdd : 0.0;
    }
    const SampledWaveform out = solve_gate(p2, {&in}, 2);
    for (double v : out.samples) {
      CHECK(v >= -1e-12);
      CHECK(v <= p2.vdd + 1e-12);
    }
  }
  SUBCASE("narrow input pulse does not cross the threshold") {
    AnalogGateParams p;
    const double width = p.tau_fall * std::log(2.0) * 0.8;
    SampledWaveform in;
    in.t0 = 0.0;
    in.dt = dt;
    const size_t n = 2000;
    in.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const double t = in.time_at(i);
      in.samples[i] = (t >= 5e-11 && t < 5e-11 + width) ? p.vdd : 0.0;
    }
    const SampledWaveform out = solve_gate(p, {&in}, 1);
    CHECK(out.crossings(p.vth()).crossings.empty());
    // sanity: widening the pulse well past tau*ln2 does cross
    for (size_t i = 0; i < n; ++i) {
      const double t = in.time_at(i);
      in.samples[i] = (t >= 5e-11 && t < 5e-11 + 4.0 * p.tau_fall) ? p.vdd : 0.0;
    }
    const SampledWaveform out2 = solve_gate(p, {&in}, 1);
    CHECK(out2.crossings(p.vth()).crossings.size() == 2);
  }
  SUBCASE("step control") {
    AnalogGateParams p;
    SampledWaveform in = step_input(5e-11, p.vdd, 1e-12, 2e-10, true);  // dt > tau/20
    CHECK_THROWS_AS(solve_gate(p, {&in}, 1), StepTooCoarse);
  }
  SUBCASE("halving dt moves crossings by less than dt") {
    AnalogGateParams p;
    const SampledWaveform in_coarse = step_input(5e-11, p.vdd, dt, 2e-10, true);
    const SampledWaveform in_fine = step_input(5e-11, p.vdd, dt / 2.0, 2e-10, true);
    const double c1 = first_crossing(solve_gate(p, {&in_coarse}, 1), p.vth());
    const double c2 = first_crossing(solve_gate(p, {&in_fine}, 1), p.vth());
    CHECK(std::abs(c1 - c2) < dt);
  }
}

TEST_CASE("analog circuit simulation composes gates") {
  AnalogGateParams params;
  const RawCircuit raw = parse_bench(
      "INPUT(a)\nOUTPUT(y)\nn0 = NOT(a)\ny = NOT(n0)\n");
  const Circuit circuit = decompose_to_nor(raw, true).circuit;
  std::map<std::string, SampledWaveform> stimuli;
  stimuli["a"] = step_input(5e-11, params.vdd, 1e-13, 3e-10, true);
  const auto nets = analog_simulate(circuit, params, stimuli);
  CHECK(nets.count("n0"));
  CHECK(nets.count("y"));
  // two inversions: y follows a with two gate delays
  const double tc = first_crossing(nets.at("y"), params.vth());
  CHECK(tc > 5e-11);
  CHECK(tc < 5e-11 + 4.0 * (params.tau_rise + params.tau_fall));
  CHECK(nets.at("y").crossings(params.vth()).crossings[0].rising);
}

TEST_CASE("gen_random_stimuli") {
  SUBCASE("zero sigma is exactly periodic") {
    const SigmoidTrace tr = gen_random_stimuli(2e-11, 0.0, 6, 42, 20.0, 60.0);
    REQUIRE(tr.transitions.size() == 6);
    for (size_t i = 1; i < tr.transitions.size(); ++i) {
      const double gap = tr.transitions[i].time - tr.transitions[i - 1].time;
      CHECK(gap == doctest::Approx(0.2).epsilon(1e-6));
    }
  }
  SUBCASE("zero transitions gives an empty trace") {
    const SigmoidTrace tr = gen_random_stimuli(2e-11, 1e-11, 0, 1, 20.0, 60.0);
    CHECK(tr.transitions.empty());
  }
  SUBCASE("gap sample mean approaches mu") {
    // mean over 50 runs of 20 gaps within 3 sigma / sqrt(n)
    const double mu = 2e-11, sigma = 1e-11;
    double acc = 0.0;
    size_t count = 0;
    for (uint64_t seed = 0; seed < 50; ++seed) {
      const SigmoidTrace tr = gen_random_stimuli(mu, sigma, 20, seed, 20.0, 60.0);
      double prev = 0.0;
      for (const Transition& t : tr.transitions) {
        acc += to_seconds(t.time) - prev;
        prev = to_seconds(t.time);
        ++count;
      }
    }
    const double mean = acc / static_cast<double>(count);
    CHECK(std::abs(mean - mu) < 3.0 * sigma / std::sqrt(static_cast<double>(count)));
  }
  SUBCASE("polarities alternate and slopes stay in range") {
    const SigmoidTrace tr = gen_random_stimuli(2e-11, 1e-11, 11, 7, 20.0, 60.0, 1);
    CHECK(tr.initial_level == 1);
    tr.validate();
    for (const Transition& t : tr.transitions) {
      CHECK(std::abs(t.slope) >= 20.0);
      CHECK(std::abs(t.slope) <= 60.0);
    }
  }
  SUBCASE("deterministic given seed") {
    const SigmoidTrace a = gen_random_stimuli(2e-11, 1e-11, 8, 5, 20.0, 60.0);
    const SigmoidTrace b = gen_random_stimuli(2e-11, 1e-11, 8, 5, 20.0, 60.0);
    REQUIRE(a.transitions.size() == b.transitions.size());
    for (size_t i = 0; i < a.transitions.size(); ++i) {
      CHECK(a.transitions[i].slope == b.transitions[i].slope);
      CHECK(a.transitions[i].time == b.transitions[i].time);
    }
  }
}

TEST_CASE("characterization at a single grid point") {
  SweepSpec spec;
  spec.ta = {8e-12, 8e-12, 1e-12};
  spec.tb = {10e-12, 10e-12, 1e-12};
  spec.tc = {9e-12, 9e-12, 1e-12};
  spec.target_gates = 3;
  AnalogGateParams params;
  CharacterizationReport report;
  const TrainingTable table = run_characterization(spec, params, GateKind::Nor2, 1, 1, &report);
  // four transitions per recording: three rows per surviving target gate
  CHECK(table.rows.size() + report.rows_deduplicated ==
        3 * spec.target_gates - report.recordings_skipped * 3 - report.fits_failed);
  CHECK(!table.rows.empty());
  for (const TrainingRow& r : table.rows) {
    CHECK(r.delay > 0.0);
    CHECK(std::isfinite(r.gap));
    // inverting stage: output slope sign opposite to the input's
    CHECK(std::signbit(r.output_slope) != std::signbit(r.input_slope));
  }
}

TEST_CASE("longer mid gap widens the recovered output pulse") {
  AnalogGateParams params;
  auto pulse_width_for_tb = [&](double tb) {
    SweepSpec spec;
    spec.ta = {10e-12, 10e-12, 1e-12};
    spec.tb = {tb, tb, 1e-12};
    spec.tc = {10e-12, 10e-12, 1e-12};
    spec.target_gates = 1;
    const TrainingTable table = run_characterization(spec, params, GateKind::Nor2, 1, 1, nullptr);
    REQUIRE(table.rows.size() >= 3);
    // width of the pulse between output transitions 1 and 2 (the tb window)
    return table.rows[1].gap + table.rows[1].delay;
  };
  const double w_short = pulse_width_for_tb(8e-12);
  const double w_long = pulse_width_for_tb(14e-12);
  CHECK(w_long >= w_short);
}

TEST_CASE("training table file round-trip") {
  testing::TempDir dir("table");
  TrainingTable table;
  table.rows.push_back({0.1, 30.0, -40.0, -35.0, 0.04, {1, 2, 3}, 0});
  table.rows.push_back({0.2, -31.0, 41.0, 36.0, 0.05, {4, 5, 6}, 1});
  const std::string path = dir.file("t.tsv");
  write_table_file(path, table);
  const TrainingTable back = read_table_file(path);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].gap == table.rows[0].gap);
  CHECK(back.rows[1].output_slope == table.rows[1].output_slope);
  CHECK(back.rows[1].grid[2] == 6);
}
