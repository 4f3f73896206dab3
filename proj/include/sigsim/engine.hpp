#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "sigsim/netlist.hpp"
#include "sigsim/trace.hpp"
#include "sigsim/transfer.hpp"

namespace sigsim {

enum class Polarity { Rising, Falling };

// Constant-delay, constant-slope transfer used for testing and calibration.
class StubTransfer : public GateTransfer {
 public:
  StubTransfer(double delay, double slope_magnitude)
      : delay_(delay), slope_magnitude_(slope_magnitude) {}
  TransferOutput apply(const TransferInput& x) const override {
    return {x.input_slope > 0.0 ? -slope_magnitude_ : slope_magnitude_, delay_};
  }
  double dummy_slope() const override { return slope_magnitude_; }

 private:
  double delay_;
  double slope_magnitude_;
};

// Repeatedly removes adjacent opposite-polarity pairs whose two-sigmoid sum
// never crosses vth, until a fixed point. Pairs in reversed or equal time
// order count as collapsed pulses and are always removed.
SigmoidTrace cancel_subthreshold_pairs(SigmoidTrace trace, double vth);

// Single-input prediction: walks the input transitions, querying the transfer
// model with the gap to the previous output transition (+inf for the initial
// placeholder), and stamps each output at input time plus predicted delay.
SigmoidTrace predict_single_input(const GateTransfer& model, const SigmoidTrace& input,
                                  Polarity initial_output_polarity, double vth);

struct NorStats {
  uint64_t tie_events = 0;
};

// Two-input NOR: both inputs' transitions merge into one time-ordered stream;
// a transition matters only while the other input sits at logic 0. A single
// output history is shared across both inputs.
SigmoidTrace predict_nor(const GateTransfer& model_in1, const GateTransfer& model_in2,
                         const SigmoidTrace& in1, const SigmoidTrace& in2, double vth,
                         NorStats* stats = nullptr);

class ModelRegistry {
 public:
  void add(GateKind kind, FanoutClass fo, std::shared_ptr<const GateTransfer> model);
  const GateTransfer& get(GateKind kind, FanoutClass fo) const;  // throws MissingModel
  bool has(GateKind kind, FanoutClass fo) const;

 private:
  std::map<std::pair<GateKind, FanoutClass>, std::shared_ptr<const GateTransfer>> models_;
};

struct SimulationResult {
  std::map<std::string, SigmoidTrace> nets;  // stimuli plus every gate output
  uint64_t tie_events = 0;
};

// Simulates the whole circuit in topological order. Gates on the same
// topological level run in parallel when jobs > 1; results are identical for
// every job count.
SimulationResult simulate_circuit(const Circuit& circuit, const ModelRegistry& registry,
                                  const std::map<std::string, SigmoidTrace>& stimuli, int jobs = 1);

}  // namespace sigsim
