#pragma once

#include <map>
#include <string>
#include <vector>

#include "sigsim/gates.hpp"

namespace sigsim {

// -------- raw bench circuits (any gate kind, any arity) --------

enum class RawGateKind { And, Nand, Or, Nor, Not, Xor, Buff };

struct RawGate {
  RawGateKind kind;
  std::vector<std::string> inputs;
  std::string output;
  int line = 0;
};

struct RawCircuit {
  std::vector<std::string> primary_inputs;
  std::vector<std::string> primary_outputs;
  std::vector<RawGate> gates;

  // Boolean levels for every net given primary-input levels.
  std::map<std::string, int> eval_levels(const std::map<std::string, int>& pi_levels) const;
};

// Parses the bench dialect: `INPUT(x)`, `OUTPUT(y)`, `z = GATE(a, b, ...)`,
// `#` comments. Validates arity, single drivers, driven inputs, acyclicity.
RawCircuit parse_bench(const std::string& text);

// -------- decomposed circuits (INV / NOR2 only) --------

struct Gate {
  GateKind kind;
  std::vector<std::string> inputs;  // 1 for INV, 2 for NOR2
  std::string output;
};

struct Circuit {
  std::vector<std::string> primary_inputs;
  std::vector<std::string> primary_outputs;
  std::vector<Gate> gates;
  std::vector<int> fanout;            // per gate: gates consuming its output net
  std::vector<size_t> topo_order;     // gate indices in topological order

  void finalize();  // validates structure, computes fanout and topo order
  std::map<std::string, int> eval_levels(const std::map<std::string, int>& pi_levels) const;
};

struct MappingEntry {
  std::string original_output;
  std::string note;  // emitted gates or alias description
};

struct DecomposeResult {
  Circuit circuit;
  std::vector<MappingEntry> mapping;
};

// Rewrites arbitrary gates into the INV/NOR2 basis. With allow_inverters
// false every inverter becomes NOR(a, a). BUFF gates collapse to wires;
// n-ary gates decompose as balanced binary trees.
DecomposeResult decompose_to_nor(const RawCircuit& raw, bool allow_inverters = true);

// Bench dialect restricted to NOT/NOR.
std::string emit_bench(const Circuit& circuit);

std::string mapping_report(const DecomposeResult& result);

}  // namespace sigsim
