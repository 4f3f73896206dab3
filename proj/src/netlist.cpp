#include "sigsim/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <set>
#include <sstream>

#include "sigsim/errors.hpp"

namespace sigsim {

namespace {

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$' ||
         c == '/' || c == '[' || c == ']' || c == '-';
}

struct LineScanner {
  const std::string& text;
  int line;
  size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  bool eof() {
    skip_ws();
    return pos >= text.size();
  }
  int column() const { return static_cast<int>(pos) + 1; }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
  void expect(char c) {
    skip_ws();
    if (pos >= text.size() || text[pos] != c) {
      throw SyntaxError(std::string("expected '") + c + "'", line, column());
    }
    ++pos;
  }
  std::string name() {
    skip_ws();
    const size_t start = pos;
    while (pos < text.size() && is_name_char(text[pos])) ++pos;
    if (pos == start) throw SyntaxError("expected a net name", line, column());
    return text.substr(start, pos - start);
  }
};

RawGateKind raw_kind_from(const std::string& word, int line, int col) {
  std::string up;
  for (char c : word) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up == "AND") return RawGateKind::And;
  if (up == "NAND") return RawGateKind::Nand;
  if (up == "OR") return RawGateKind::Or;
  if (up == "NOR") return RawGateKind::Nor;
  if (up == "NOT") return RawGateKind::Not;
  if (up == "XOR") return RawGateKind::Xor;
  if (up == "BUFF" || up == "BUF") return RawGateKind::Buff;
  throw SyntaxError("unknown gate kind '" + word + "'", line, col);
}

int raw_eval(RawGateKind kind, const std::vector<int>& in) {
  switch (kind) {
    case RawGateKind::And: {
      int v = 1;
      for (int x : in) v &= x;
      return v;
    }
    case RawGateKind::Nand: {
      int v = 1;
      for (int x : in) v &= x;
      return 1 - v;
    }
    case RawGateKind::Or: {
      int v = 0;
      for (int x : in) v |= x;
      return v;
    }
    case RawGateKind::Nor: {
      int v = 0;
      for (int x : in) v |= x;
      return 1 - v;
    }
    case RawGateKind::Not:
      return 1 - in[0];
    case RawGateKind::Buff:
      return in[0];
    case RawGateKind::Xor: {
      int v = 0;
      for (int x : in) v ^= x;
      return v;
    }
  }
  return 0;
}

template <class GateT>
void check_structure(const std::vector<std::string>& pis, const std::vector<std::string>& pos,
                     const std::vector<GateT>& gates) {
  std::set<std::string> driven(pis.begin(), pis.end());
  if (driven.size() != pis.size()) throw MultipleDrivers("duplicate primary input");
  for (const auto& g : gates) {
    if (!driven.insert(g.output).second) {
      throw MultipleDrivers("net '" + g.output + "' has multiple drivers");
    }
  }
  for (const auto& g : gates) {
    for (const auto& in : g.inputs) {
      if (!driven.count(in)) throw UndrivenNet("net '" + in + "' is never driven");
    }
  }
  for (const auto& out : pos) {
    if (!driven.count(out)) throw UndrivenNet("primary output '" + out + "' is never driven");
  }
}

// Kahn topological sort over gate indices; throws on cycles.
template <class GateT>
std::vector<size_t> topo_sort(const std::vector<std::string>& pis, const std::vector<GateT>& gates) {
  std::map<std::string, std::vector<size_t>> consumers;
  std::vector<int> pending(gates.size(), 0);
  std::set<std::string> pi_set(pis.begin(), pis.end());
  std::map<std::string, size_t> driver;
  for (size_t i = 0; i < gates.size(); ++i) driver[gates[i].output] = i;
  for (size_t i = 0; i < gates.size(); ++i) {
    for (const auto& in : gates[i].inputs) {
      if (pi_set.count(in)) continue;
      consumers[in].push_back(i);
      ++pending[i];
    }
  }
  std::deque<size_t> ready;
  for (size_t i = 0; i < gates.size(); ++i) {
    if (pending[i] == 0) ready.push_back(i);
  }
  std::vector<size_t> order;
  order.reserve(gates.size());
  while (!ready.empty()) {
    const size_t g = ready.front();
    ready.pop_front();
    order.push_back(g);
    const auto it = consumers.find(gates[g].output);
    if (it == consumers.end()) continue;
    for (size_t c : it->second) {
      if (--pending[c] == 0) ready.push_back(c);
    }
  }
  if (order.size() != gates.size()) {
    for (size_t i = 0; i < gates.size(); ++i) {
      if (pending[i] > 0) {
        throw CombinationalLoop("combinational loop through net '" + gates[i].output + "'");
      }
    }
  }
  return order;
}

}  // namespace

RawCircuit parse_bench(const std::string& text) {
  RawCircuit circuit;
  std::istringstream in(text);
  std::string raw_line;
  int lineno = 0;
  while (std::getline(in, raw_line)) {
    ++lineno;
    const size_t hash = raw_line.find('#');
    if (hash != std::string::npos) raw_line.erase(hash);
    if (!raw_line.empty() && raw_line.back() == '\r') raw_line.pop_back();
    LineScanner sc{raw_line, lineno};
    if (sc.eof()) continue;

    const std::string first = sc.name();
    if (first == "INPUT" || first == "OUTPUT") {
      sc.expect('(');
      const std::string net = sc.name();
      sc.expect(')');
      if (!sc.eof()) throw SyntaxError("trailing characters", lineno, sc.column());
      (first == "INPUT" ? circuit.primary_inputs : circuit.primary_outputs).push_back(net);
      continue;
    }

    RawGate gate;
    gate.output = first;
    gate.line = lineno;
    sc.expect('=');
    const int kind_col = sc.column();
    const std::string kind_word = sc.name();
    gate.kind = raw_kind_from(kind_word, lineno, kind_col);
    sc.expect('(');
    gate.inputs.push_back(sc.name());
    while (sc.peek() == ',') {
      sc.expect(',');
      gate.inputs.push_back(sc.name());
    }
    sc.expect(')');
    if (!sc.eof()) throw SyntaxError("trailing characters", lineno, sc.column());

    const bool unary = gate.kind == RawGateKind::Not || gate.kind == RawGateKind::Buff;
    if (unary && gate.inputs.size() != 1) {
      throw SyntaxError(kind_word + " takes exactly one input", lineno, kind_col);
    }
    if (!unary && gate.inputs.size() < 2) {
      throw SyntaxError(kind_word + " takes at least two inputs", lineno, kind_col);
    }
    circuit.gates.push_back(std::move(gate));
  }

  check_structure(circuit.primary_inputs, circuit.primary_outputs, circuit.gates);
  topo_sort(circuit.primary_inputs, circuit.gates);
  return circuit;
}

std::map<std::string, int> RawCircuit::eval_levels(const std::map<std::string, int>& pi_levels) const {
  std::map<std::string, int> levels;
  for (const auto& pi : primary_inputs) {
    const auto it = pi_levels.find(pi);
    if (it == pi_levels.end()) throw MissingStimulus("no level for primary input '" + pi + "'");
    levels[pi] = it->second ? 1 : 0;
  }
  const auto order = topo_sort(primary_inputs, gates);
  for (size_t gi : order) {
    const RawGate& g = gates[gi];
    std::vector<int> in;
    in.reserve(g.inputs.size());
    for (const auto& name : g.inputs) in.push_back(levels.at(name));
    levels[g.output] = raw_eval(g.kind, in);
  }
  return levels;
}

void Circuit::finalize() {
  check_structure(primary_inputs, primary_outputs, gates);
  for (const Gate& g : gates) {
    const size_t arity = g.kind == GateKind::Inv ? 1 : 2;
    if (g.inputs.size() != arity) throw UnsupportedGateKind("gate arity mismatch on " + g.output);
  }
  topo_order = topo_sort(primary_inputs, gates);

  std::map<std::string, int> consumers;
  for (const Gate& g : gates) {
    std::set<std::string> seen;  // a gate counts once even if both pins tap the net
    for (const auto& in : g.inputs) {
      if (seen.insert(in).second) ++consumers[in];
    }
  }
  fanout.assign(gates.size(), 0);
  for (size_t i = 0; i < gates.size(); ++i) {
    const auto it = consumers.find(gates[i].output);
    fanout[i] = it == consumers.end() ? 0 : it->second;
  }
}

std::map<std::string, int> Circuit::eval_levels(const std::map<std::string, int>& pi_levels) const {
  std::map<std::string, int> levels;
  for (const auto& pi : primary_inputs) {
    const auto it = pi_levels.find(pi);
    if (it == pi_levels.end()) throw MissingStimulus("no level for primary input '" + pi + "'");
    levels[pi] = it->second ? 1 : 0;
  }
  for (size_t gi : topo_order) {
    const Gate& g = gates[gi];
    if (g.kind == GateKind::Inv) {
      levels[g.output] = 1 - levels.at(g.inputs[0]);
    } else {
      levels[g.output] = 1 - (levels.at(g.inputs[0]) | levels.at(g.inputs[1]));
    }
  }
  return levels;
}

namespace {

// Builds INV/NOR2 gates while decomposing one raw gate.
struct Builder {
  Circuit& circuit;
  const std::string& base;
  bool allow_inverters;
  int counter = 0;
  std::map<std::string, std::string> inverted = {};  // shared input inverters

  std::string fresh() { return base + "_n" + std::to_string(counter++); }

  std::string nor(const std::string& a, const std::string& b, const std::string& out = "") {
    const std::string net = out.empty() ? fresh() : out;
    circuit.gates.push_back({GateKind::Nor2, {a, b}, net});
    return net;
  }

  std::string invert(const std::string& a, const std::string& out = "") {
    if (out.empty()) {
      const auto it = inverted.find(a);
      if (it != inverted.end()) return it->second;
    }
    std::string net;
    if (allow_inverters) {
      net = out.empty() ? fresh() : out;
      circuit.gates.push_back({GateKind::Inv, {a}, net});
    } else {
      net = nor(a, a, out);
    }
    if (out.empty()) inverted[a] = net;
    return net;
  }

  std::string and2(const std::string& a, const std::string& b, const std::string& out = "") {
    return nor(invert(a), invert(b), out);
  }

  std::string or2(const std::string& a, const std::string& b, const std::string& out = "") {
    return invert(nor(a, b), out);
  }

  // Balanced tree over `nets` combining with `op`.
  template <class Op>
  std::string tree(const std::vector<std::string>& nets, Op op) {
    if (nets.size() == 1) return nets[0];
    const size_t half = nets.size() / 2;
    const std::string left = tree({nets.begin(), nets.begin() + half}, op);
    const std::string right = tree({nets.begin() + half, nets.end()}, op);
    return op(left, right, "");
  }
};

}  // namespace

DecomposeResult decompose_to_nor(const RawCircuit& raw, bool allow_inverters) {
  DecomposeResult result;
  Circuit& c = result.circuit;
  c.primary_inputs = raw.primary_inputs;

  std::map<std::string, std::string> alias;  // BUFF outputs resolved to sources
  auto resolve = [&](std::string net) {
    while (true) {
      const auto it = alias.find(net);
      if (it == alias.end()) return net;
      net = it->second;
    }
  };

  const auto order = topo_sort(raw.primary_inputs, raw.gates);
  for (size_t gi : order) {
    const RawGate& g = raw.gates[gi];
    std::vector<std::string> ins;
    ins.reserve(g.inputs.size());
    for (const auto& name : g.inputs) ins.push_back(resolve(name));

    const size_t before = c.gates.size();
    Builder b{c, g.output, allow_inverters};
    auto and_op = [&b](const std::string& x, const std::string& y, const std::string& o) {
      return b.and2(x, y, o);
    };
    auto or_op = [&b](const std::string& x, const std::string& y, const std::string& o) {
      return b.or2(x, y, o);
    };

    switch (g.kind) {
      case RawGateKind::Buff:
        alias[g.output] = ins[0];
        result.mapping.push_back({g.output, "wire alias of " + ins[0]});
        continue;
      case RawGateKind::Not:
        b.invert(ins[0], g.output);
        break;
      case RawGateKind::And:
        if (ins.size() == 2) {
          b.and2(ins[0], ins[1], g.output);
        } else {
          const size_t half = ins.size() / 2;
          b.and2(b.tree({ins.begin(), ins.begin() + half}, and_op),
                 b.tree({ins.begin() + half, ins.end()}, and_op), g.output);
        }
        break;
      case RawGateKind::Or:
        if (ins.size() == 2) {
          b.or2(ins[0], ins[1], g.output);
        } else {
          const size_t half = ins.size() / 2;
          b.or2(b.tree({ins.begin(), ins.begin() + half}, or_op),
                b.tree({ins.begin() + half, ins.end()}, or_op), g.output);
        }
        break;
      case RawGateKind::Nand: {
        // AND via inverted-input NOR, then one inversion.
        std::string conj;
        if (ins.size() == 2) {
          conj = b.and2(ins[0], ins[1]);
        } else {
          conj = b.tree(ins, and_op);
        }
        b.invert(conj, g.output);
        break;
      }
      case RawGateKind::Nor: {
        if (ins.size() == 2) {
          b.nor(ins[0], ins[1], g.output);
        } else {
          const size_t half = ins.size() / 2;
          b.nor(b.tree({ins.begin(), ins.begin() + half}, or_op),
                b.tree({ins.begin() + half, ins.end()}, or_op), g.output);
        }
        break;
      }
      case RawGateKind::Xor: {
        // Pairwise tree; each XOR2 is the five-gate NOR form (four when the
        // final inversion can be a lone INV).
        auto xor_op = [&b](const std::string& x, const std::string& y, const std::string& o) {
          const std::string both_low = b.nor(x, y);
          const std::string only_y = b.nor(x, both_low);
          const std::string only_x = b.nor(both_low, y);
          const std::string xnor = b.nor(only_y, only_x);
          return b.invert(xnor, o);
        };
        if (ins.size() == 2) {
          xor_op(ins[0], ins[1], g.output);
        } else {
          const size_t half = ins.size() / 2;
          xor_op(b.tree({ins.begin(), ins.begin() + half}, xor_op),
                 b.tree({ins.begin() + half, ins.end()}, xor_op), g.output);
        }
        break;
      }
    }
    std::ostringstream note;
    note << (c.gates.size() - before) << " gates";
    result.mapping.push_back({g.output, note.str()});
  }

  c.primary_outputs.clear();
  for (const auto& po : raw.primary_outputs) c.primary_outputs.push_back(resolve(po));
  c.finalize();
  return result;
}

std::string emit_bench(const Circuit& circuit) {
  std::ostringstream out;
  for (const auto& pi : circuit.primary_inputs) out << "INPUT(" << pi << ")\n";
  for (const auto& po : circuit.primary_outputs) out << "OUTPUT(" << po << ")\n";
  for (const Gate& g : circuit.gates) {
    if (g.kind == GateKind::Inv) {
      out << g.output << " = NOT(" << g.inputs[0] << ")\n";
    } else {
      out << g.output << " = NOR(" << g.inputs[0] << ", " << g.inputs[1] << ")\n";
    }
  }
  return out.str();
}

std::string mapping_report(const DecomposeResult& result) {
  std::ostringstream out;
  out << "# original_output\tnote\n";
  for (const MappingEntry& e : result.mapping) out << e.original_output << "\t" << e.note << "\n";
  out << "# total gates: " << result.circuit.gates.size() << "\n";
  return out.str();
}

}  // namespace sigsim
