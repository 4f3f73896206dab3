#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sigsim/netlist.hpp"
#include "sigsim/random.hpp"
#include "sigsim/trace.hpp"

namespace sigsim::testing {

// Dense-sampling oracle for one opposite-polarity pair: the extremum of the
// two-sigmoid pulse, sampled at `dt` seconds over the pair's span.
inline double dense_pair_extremum(const Transition& first, const Transition& second, double vdd,
                                  double dt = 1e-14) {
  const double offset = first.rising() ? 1.0 : 0.0;
  const double margin1 = 5.0 / std::abs(first.slope);
  const double margin2 = 5.0 / std::abs(second.slope);
  const double t_lo = to_seconds(first.time - margin1);
  const double t_hi = to_seconds(second.time + margin2);
  double extremum = first.rising() ? -1e300 : 1e300;
  for (double t = t_lo; t <= t_hi; t += dt) {
    const double v = vdd * (logistic_value(t, first) + logistic_value(t, second) - offset);
    extremum = first.rising() ? std::max(extremum, v) : std::min(extremum, v);
  }
  return extremum;
}

// Textbook transport-delay digital simulator: every gate applies its boolean
// function to the input levels and emits the flips shifted by one constant
// delay. Independent of the sigmoid prediction path. All internal arithmetic
// runs in scaled time; crossings convert to seconds only on output, with the
// same product the trace digitizer uses, so exact comparisons stay exact.
class FixedDelaySimulator {
 public:
  // delay in scaled units
  FixedDelaySimulator(const Circuit& circuit, double delay_scaled)
      : circuit_(circuit), delay_(delay_scaled) {}

  // Stimuli crossing times are in scaled units; output times in seconds.
  std::map<std::string, DigitalTrace> run(const std::map<std::string, DigitalTrace>& stimuli) const {
    std::map<std::string, DigitalTrace> nets = stimuli;
    for (size_t gi : circuit_.topo_order) {
      const Gate& g = circuit_.gates[gi];
      std::vector<const DigitalTrace*> ins;
      for (const auto& name : g.inputs) ins.push_back(&nets.at(name));
      nets[g.output] = eval_gate(g.kind, ins);
    }
    std::map<std::string, DigitalTrace> out;
    for (const auto& [name, d] : nets) {
      DigitalTrace conv;
      conv.initial_level = d.initial_level;
      for (const Crossing& c : d.crossings) conv.crossings.push_back({to_seconds(c.time), c.rising});
      out[name] = conv;
    }
    return out;
  }

 private:
  DigitalTrace eval_gate(GateKind kind, const std::vector<const DigitalTrace*>& ins) const {
    auto f = [kind](const std::vector<int>& lv) {
      if (kind == GateKind::Inv) return 1 - lv[0];
      return 1 - (lv[0] | lv[1]);
    };
    std::vector<int> levels;
    std::vector<size_t> idx(ins.size(), 0);
    for (const DigitalTrace* t : ins) levels.push_back(t->initial_level);

    DigitalTrace out;
    out.initial_level = f(levels);
    int cur = out.initial_level;
    while (true) {
      double t_next = std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < ins.size(); ++k) {
        if (idx[k] < ins[k]->crossings.size()) {
          t_next = std::min(t_next, ins[k]->crossings[idx[k]].time);
        }
      }
      if (!std::isfinite(t_next)) break;
      for (size_t k = 0; k < ins.size(); ++k) {
        while (idx[k] < ins[k]->crossings.size() && ins[k]->crossings[idx[k]].time == t_next) {
          levels[k] ^= 1;
          ++idx[k];
        }
      }
      const int next = f(levels);
      if (next != cur) {
        out.crossings.push_back({t_next + delay_, next == 1});
        cur = next;
      }
    }
    return out;
  }

  const Circuit& circuit_;
  double delay_;
};

// Random DAG of INV/NOR2 gates; every gate input is a primary input or an
// earlier gate's output, so the result is acyclic by construction.
inline Circuit random_circuit(Rng& rng, int n_gates, int n_inputs) {
  Circuit c;
  for (int i = 0; i < n_inputs; ++i) c.primary_inputs.push_back("pi" + std::to_string(i));
  std::vector<std::string> nets = c.primary_inputs;
  for (int g = 0; g < n_gates; ++g) {
    const std::string out = "g" + std::to_string(g);
    if (rng.uniform01() < 0.3) {
      c.gates.push_back({GateKind::Inv, {nets[static_cast<size_t>(rng.uniform_int(
                                            0, static_cast<int>(nets.size()) - 1))]},
                         out});
    } else {
      const auto& a = nets[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(nets.size()) - 1))];
      const auto& b = nets[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(nets.size()) - 1))];
      c.gates.push_back({GateKind::Nor2, {a, b}, out});
    }
    nets.push_back(out);
  }
  // nets no gate consumes become the primary outputs
  std::map<std::string, int> consumed;
  for (const Gate& g : c.gates) {
    for (const auto& in : g.inputs) consumed[in] = 1;
  }
  for (const Gate& g : c.gates) {
    if (!consumed.count(g.output)) c.primary_outputs.push_back(g.output);
  }
  if (c.primary_outputs.empty()) c.primary_outputs.push_back(c.gates.back().output);
  c.finalize();
  return c;
}

// Scratch directory unique per test binary run.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("sigsim_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace sigsim::testing
