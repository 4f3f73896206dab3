#include "sigsim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include "sigsim/errors.hpp"
#include "sigsim/util.hpp"

namespace sigsim {

namespace {

// Extremum of the two-sigmoid pulse on [first.time, second.time]. The integer
// offset is 1 for an up-pulse on a low baseline and 0 for a down-pulse.
// Evaluated relative to the first transition so the decision is identical for
// time-shifted copies of the pair.
bool pair_crosses_threshold(const Transition& first, const Transition& second, double vdd,
                            double vth) {
  if (!(second.time > first.time)) return false;  // collapsed or reversed pulse
  const bool up_pulse = first.rising();
  const double offset = up_pulse ? 1.0 : 0.0;
  const double width = second.time - first.time;
  auto logistic = [](double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
  };
  auto pulse = [&](double delta) {
    return vdd *
           (logistic(first.slope * delta) + logistic(second.slope * (delta - width)) - offset);
  };
  const double tol = std::max(1e-12, width * 1e-9);
  if (up_pulse) {
    const double peak = pulse(golden_section_max(pulse, 0.0, width, tol));
    return peak > vth;
  }
  const double valley = pulse(golden_section_min(pulse, 0.0, width, tol));
  return valley < vth;
}

void algorithm_step(const GateTransfer& model, const Transition& input, Transition* prev,
                    std::vector<Transition>* out) {
  TransferInput q;
  q.gap = is_dummy(*prev) ? std::numeric_limits<double>::infinity() : input.time - prev->time;
  q.input_slope = input.slope;
  q.prev_output_slope = prev->slope;
  const TransferOutput o = model.apply(q);
  const double delay = std::max(quantize_time(o.delay), kTimeQuantum);
  const Transition produced{o.output_slope, input.time + delay};
  out->push_back(produced);
  *prev = produced;
}

}  // namespace

SigmoidTrace cancel_subthreshold_pairs(SigmoidTrace trace, double vth) {
  auto& ts = trace.transitions;
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 1; i < ts.size(); ++i) {
      if (!pair_crosses_threshold(ts[i - 1], ts[i], trace.vdd, vth)) {
        ts.erase(ts.begin() + static_cast<long>(i) - 1, ts.begin() + static_cast<long>(i) + 1);
        changed = true;
        break;
      }
    }
  }
  return trace;
}

SigmoidTrace predict_single_input(const GateTransfer& model, const SigmoidTrace& input,
                                  Polarity initial_output_polarity, double vth) {
  input.validate();
  const bool starts_high = initial_output_polarity == Polarity::Rising;
  const double s = model.dummy_slope();
  Transition prev = dummy_transition(starts_high ? s : -s);

  SigmoidTrace out;
  out.vdd = input.vdd;
  out.initial_level = starts_high ? 1 : 0;
  for (const Transition& tin : input.transitions) {
    algorithm_step(model, tin, &prev, &out.transitions);
  }
  out = cancel_subthreshold_pairs(std::move(out), vth);
  out.validate();
  return out;
}

SigmoidTrace predict_nor(const GateTransfer& model_in1, const GateTransfer& model_in2,
                         const SigmoidTrace& in1, const SigmoidTrace& in2, double vth,
                         NorStats* stats) {
  in1.validate();
  in2.validate();
  if (in1.vdd != in2.vdd) throw DataError("NOR inputs disagree on vdd");

  int level[2] = {in1.initial_level, in2.initial_level};
  const bool starts_high = (level[0] | level[1]) == 0;
  const double s = model_in1.dummy_slope();
  Transition prev = dummy_transition(starts_high ? s : -s);

  SigmoidTrace out;
  out.vdd = in1.vdd;
  out.initial_level = starts_high ? 1 : 0;

  const GateTransfer* models[2] = {&model_in1, &model_in2};
  const std::vector<Transition>* inputs[2] = {&in1.transitions, &in2.transitions};
  size_t idx[2] = {0, 0};
  while (idx[0] < inputs[0]->size() || idx[1] < inputs[1]->size()) {
    int k;
    if (idx[0] >= inputs[0]->size()) {
      k = 1;
    } else if (idx[1] >= inputs[1]->size()) {
      k = 0;
    } else {
      const double t0 = (*inputs[0])[idx[0]].time;
      const double t1 = (*inputs[1])[idx[1]].time;
      if (t0 == t1 && stats != nullptr) ++stats->tie_events;
      k = t0 <= t1 ? 0 : 1;  // ties resolve in input-index order
    }
    const Transition& tin = (*inputs[k])[idx[k]++];
    const int other = 1 - k;
    if (level[other] == 0) {
      algorithm_step(*models[k], tin, &prev, &out.transitions);
    }
    level[k] ^= 1;
  }
  out = cancel_subthreshold_pairs(std::move(out), vth);
  out.validate();
  return out;
}

void ModelRegistry::add(GateKind kind, FanoutClass fo, std::shared_ptr<const GateTransfer> model) {
  models_[{kind, fo}] = std::move(model);
}

const GateTransfer& ModelRegistry::get(GateKind kind, FanoutClass fo) const {
  const auto it = models_.find({kind, fo});
  if (it == models_.end()) {
    throw MissingModel("no transfer model registered for " + to_string(kind) + "/" + to_string(fo));
  }
  return *it->second;
}

bool ModelRegistry::has(GateKind kind, FanoutClass fo) const {
  return models_.count({kind, fo}) != 0;
}

SimulationResult simulate_circuit(const Circuit& circuit, const ModelRegistry& registry,
                                  const std::map<std::string, SigmoidTrace>& stimuli, int jobs) {
  if (circuit.topo_order.size() != circuit.gates.size()) {
    throw CyclicCircuit("circuit is not a finalized DAG");
  }
  for (const auto& pi : circuit.primary_inputs) {
    if (!stimuli.count(pi)) throw MissingStimulus("no stimulus for primary input '" + pi + "'");
  }
  double vdd = 0.0;
  std::map<std::string, int> pi_levels;
  for (const auto& pi : circuit.primary_inputs) {
    const SigmoidTrace& tr = stimuli.at(pi);
    tr.validate();
    if (vdd == 0.0) vdd = tr.vdd;
    if (tr.vdd != vdd) throw DataError("stimuli disagree on vdd");
    pi_levels[pi] = tr.initial_level;
  }
  if (circuit.primary_inputs.empty()) throw DataError("circuit has no primary inputs");
  const double vth = 0.5 * vdd;

  for (size_t g = 0; g < circuit.gates.size(); ++g) {
    registry.get(circuit.gates[g].kind, fanout_class_of(circuit.fanout[g]));
  }

  const std::map<std::string, int> levels = circuit.eval_levels(pi_levels);

  // Topological depth per gate: gates on one depth only consume nets produced
  // on strictly smaller depths, so each depth can run in parallel.
  std::map<std::string, size_t> producer_depth;
  std::vector<size_t> depth(circuit.gates.size(), 0);
  size_t max_depth = 0;
  for (size_t gi : circuit.topo_order) {
    size_t d = 0;
    for (const auto& in : circuit.gates[gi].inputs) {
      const auto it = producer_depth.find(in);
      if (it != producer_depth.end()) d = std::max(d, it->second + 1);
    }
    depth[gi] = d;
    producer_depth[circuit.gates[gi].output] = d;
    max_depth = std::max(max_depth, d);
  }
  std::vector<std::vector<size_t>> by_depth(max_depth + 1);
  for (size_t gi : circuit.topo_order) by_depth[depth[gi]].push_back(gi);

  SimulationResult result;
  result.nets = stimuli;
  std::vector<SigmoidTrace> gate_out(circuit.gates.size());
  std::atomic<uint64_t> ties{0};

  for (const auto& level_gates : by_depth) {
    parallel_for(level_gates.size(), jobs, [&](size_t i) {
      const size_t gi = level_gates[i];
      const Gate& gate = circuit.gates[gi];
      const GateTransfer& model =
          registry.get(gate.kind, fanout_class_of(circuit.fanout[gi]));
      const int out_level = levels.at(gate.output);
      const Polarity pol = out_level == 1 ? Polarity::Rising : Polarity::Falling;
      if (gate.kind == GateKind::Inv) {
        gate_out[gi] = predict_single_input(model, result.nets.at(gate.inputs[0]), pol, vth);
      } else {
        NorStats stats;
        gate_out[gi] = predict_nor(model, model, result.nets.at(gate.inputs[0]),
                                   result.nets.at(gate.inputs[1]), vth, &stats);
        ties.fetch_add(stats.tie_events, std::memory_order_relaxed);
      }
    });
    for (size_t gi : level_gates) result.nets[circuit.gates[gi].output] = gate_out[gi];
  }
  result.tie_events = ties.load();
  return result;
}

}  // namespace sigsim
