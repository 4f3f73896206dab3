#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "sigsim/errors.hpp"
#include "sigsim/netlist.hpp"
#include "sigsim/random.hpp"
#include "sigsim/util.hpp"

using namespace sigsim;

namespace {

const char* kC17Path = SIGSIM_DATA_DIR "/c17.bench";

// Exhaustive truth-table comparison between a raw circuit and its
// decomposition; inputs beyond 16 would need sampling, the tests stay under.
void check_equivalent(const RawCircuit& raw, const Circuit& circuit) {
  REQUIRE(raw.primary_inputs.size() == circuit.primary_inputs.size());
  REQUIRE(raw.primary_outputs.size() == circuit.primary_outputs.size());
  const size_t n = raw.primary_inputs.size();
  REQUIRE(n <= 16);
  for (uint32_t v = 0; v < (1u << n); ++v) {
    std::map<std::string, int> raw_in, dec_in;
    for (size_t i = 0; i < n; ++i) {
      const int bit = (v >> i) & 1;
      raw_in[raw.primary_inputs[i]] = bit;
      dec_in[circuit.primary_inputs[i]] = bit;
    }
    const auto raw_lv = raw.eval_levels(raw_in);
    const auto dec_lv = circuit.eval_levels(dec_in);
    for (size_t o = 0; o < raw.primary_outputs.size(); ++o) {
      CHECK(raw_lv.at(raw.primary_outputs[o]) == dec_lv.at(circuit.primary_outputs[o]));
    }
  }
}

}  // namespace

TEST_CASE("parse c17") {
  const RawCircuit c17 = parse_bench(read_text_file(kC17Path));
  CHECK(c17.primary_inputs.size() == 5);
  CHECK(c17.primary_outputs.size() == 2);
  CHECK(c17.gates.size() == 6);
  for (const RawGate& g : c17.gates) CHECK(g.kind == RawGateKind::Nand);
}

TEST_CASE("parser error paths") {
  CHECK_THROWS_AS(parse_bench("y = NAND(a)\nINPUT(a)\n"), SyntaxError);
  CHECK_THROWS_AS(parse_bench("INPUT(a)\ny = FROB(a, a)\n"), SyntaxError);
  CHECK_THROWS_AS(parse_bench("INPUT(a)\ny = NOT(a) junk\n"), SyntaxError);
  CHECK_THROWS_AS(parse_bench("INPUT(a)\ny = NOT(a)\ny = NOT(a)\n"), MultipleDrivers);
  CHECK_THROWS_AS(parse_bench("INPUT(a)\ny = NOT(ghost)\n"), UndrivenNet);
  CHECK_THROWS_AS(parse_bench("INPUT(a)\nOUTPUT(nowhere)\ny = NOT(a)\n"), UndrivenNet);
  CHECK_THROWS_AS(parse_bench("INPUT(a)\nx = AND(a, y)\ny = NOT(x)\n"), CombinationalLoop);

  SUBCASE("syntax errors carry position info") {
    try {
      parse_bench("INPUT(a)\ny = NAND(a)\n");
      FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
      CHECK(e.line == 2);
      CHECK(e.column > 0);
    }
  }
}

TEST_CASE("empty file parses to an empty circuit") {
  const RawCircuit c = parse_bench("");
  CHECK(c.primary_inputs.empty());
  CHECK(c.primary_outputs.empty());
  CHECK(c.gates.empty());
}

TEST_CASE("decomposition templates") {
  SUBCASE("NOT becomes one INV when inverters are allowed") {
    const RawCircuit raw = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n");
    const DecomposeResult res = decompose_to_nor(raw, true);
    REQUIRE(res.circuit.gates.size() == 1);
    CHECK(res.circuit.gates[0].kind == GateKind::Inv);
  }
  SUBCASE("NAND2 becomes four NOR gates in all-NOR mode") {
    const RawCircuit raw = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)\n");
    const DecomposeResult res = decompose_to_nor(raw, false);
    CHECK(res.circuit.gates.size() == 4);
    for (const Gate& g : res.circuit.gates) CHECK(g.kind == GateKind::Nor2);
    check_equivalent(raw, res.circuit);
  }
  SUBCASE("c17 becomes exactly 24 NOR gates") {
    const RawCircuit raw = parse_bench(read_text_file(kC17Path));
    const DecomposeResult res = decompose_to_nor(raw, false);
    CHECK(res.circuit.gates.size() == 24);
    for (const Gate& g : res.circuit.gates) CHECK(g.kind == GateKind::Nor2);
    check_equivalent(raw, res.circuit);
  }
  SUBCASE("all basic gates stay logically equivalent") {
    const char* sources[] = {
        "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n",
        "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = OR(a, b)\n",
        "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NOR(a, b)\n",
        "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XOR(a, b)\n",
        "INPUT(a)\nOUTPUT(y)\ny = BUFF(a)\n",
        "INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(d)\nOUTPUT(y)\ny = NAND(a, b, c, d)\n",
        "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\ny = NOR(a, b, c)\n",
        "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\ny = XOR(a, b, c)\n",
        "INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(d)\nINPUT(e)\nOUTPUT(y)\ny = OR(a, b, c, d, e)\n",
    };
    for (const char* src : sources) {
      const RawCircuit raw = parse_bench(src);
      for (bool allow_inv : {true, false}) {
        const DecomposeResult res = decompose_to_nor(raw, allow_inv);
        if (!allow_inv) {
          for (const Gate& g : res.circuit.gates) CHECK(g.kind == GateKind::Nor2);
        }
        check_equivalent(raw, res.circuit);
      }
    }
  }
  SUBCASE("random multi-gate circuits stay equivalent") {
    Rng rng(1);
    for (int trial = 0; trial < 30; ++trial) {
      const int n_inputs = rng.uniform_int(2, 8);
      std::string src;
      std::vector<std::string> nets;
      for (int i = 0; i < n_inputs; ++i) {
        nets.push_back("i" + std::to_string(i));
        src += "INPUT(" + nets.back() + ")\n";
      }
      const char* kinds[] = {"AND", "NAND", "OR", "NOR", "NOT", "XOR", "BUFF"};
      const int n_gates = rng.uniform_int(3, 12);
      for (int g = 0; g < n_gates; ++g) {
        const std::string out = "n" + std::to_string(g);
        const std::string kind = kinds[rng.uniform_int(0, 6)];
        int arity = (kind == std::string("NOT") || kind == std::string("BUFF"))
                        ? 1
                        : rng.uniform_int(2, 4);
        src += out + " = " + kind + "(";
        for (int k = 0; k < arity; ++k) {
          if (k) src += ", ";
          src += nets[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(nets.size()) - 1))];
        }
        src += ")\n";
        nets.push_back(out);
      }
      src += "OUTPUT(n" + std::to_string(n_gates - 1) + ")\n";
      const RawCircuit raw = parse_bench(src);
      const DecomposeResult res = decompose_to_nor(raw, rng.uniform01() < 0.5);
      check_equivalent(raw, res.circuit);
    }
  }
}

TEST_CASE("fanout annotation counts consuming gates") {
  const RawCircuit raw = parse_bench(read_text_file(kC17Path));
  const Circuit c = decompose_to_nor(raw, false).circuit;
  std::map<std::string, int> expected;
  for (const Gate& g : c.gates) {
    std::set<std::string> seen(g.inputs.begin(), g.inputs.end());
    for (const auto& in : seen) ++expected[in];
  }
  for (size_t i = 0; i < c.gates.size(); ++i) {
    const auto it = expected.find(c.gates[i].output);
    CHECK(c.fanout[i] == (it == expected.end() ? 0 : it->second));
  }
  // c17's NOR form exercises both fan-out classes
  bool has_fo1 = false, has_fo2 = false;
  for (int f : c.fanout) {
    if (f >= 2) has_fo2 = true;
    if (f <= 1) has_fo1 = true;
  }
  CHECK(has_fo1);
  CHECK(has_fo2);
}

TEST_CASE("emitted bench text reparses to an isomorphic circuit") {
  const RawCircuit raw = parse_bench(read_text_file(kC17Path));
  const Circuit c = decompose_to_nor(raw, true).circuit;
  const RawCircuit back = parse_bench(emit_bench(c));
  CHECK(back.primary_inputs == c.primary_inputs);
  CHECK(back.primary_outputs == c.primary_outputs);
  REQUIRE(back.gates.size() == c.gates.size());
  const Circuit again = decompose_to_nor(back, true).circuit;
  REQUIRE(again.gates.size() == c.gates.size());
  std::map<std::string, const Gate*> by_output;
  for (const Gate& g : c.gates) by_output[g.output] = &g;
  for (const Gate& g : again.gates) {
    REQUIRE(by_output.count(g.output));
    CHECK(by_output.at(g.output)->kind == g.kind);
    CHECK(by_output.at(g.output)->inputs == g.inputs);
  }
}
