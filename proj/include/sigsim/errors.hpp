#pragma once

#include <stdexcept>
#include <string>

namespace sigsim {

// Error categories. The CLI maps them to exit codes:
// usage = 1, data = 2, numeric = 3.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// -------- trace / waveform --------
struct InvalidTrace : DataError {
  using DataError::DataError;
};

// -------- fitting --------
struct SingularNormalEquations : NumericError {
  using NumericError::NumericError;
};
struct SeedCountMismatch : NumericError {
  SeedCountMismatch(int expected, int found)
      : NumericError("seed count mismatch: expected " + std::to_string(expected) +
                     " threshold crossings, found " + std::to_string(found)),
        expected(expected),
        found(found) {}
  int expected;
  int found;
};
struct FitDiverged : NumericError {
  using NumericError::NumericError;
};

// -------- mlp --------
struct DimensionMismatch : DataError {
  using DataError::DataError;
};
struct FormatVersionMismatch : DataError {
  using DataError::DataError;
};
struct CorruptModel : DataError {
  using DataError::DataError;
};

// -------- transfer --------
struct EmptyTrainingSet : DataError {
  using DataError::DataError;
};
struct MissingModel : DataError {
  using DataError::DataError;
};

// -------- netlist --------
struct SyntaxError : DataError {
  SyntaxError(const std::string& what, int line, int column)
      : DataError("line " + std::to_string(line) + ":" + std::to_string(column) +
                  ": " + what),
        line(line),
        column(column) {}
  int line;
  int column;
};
struct MultipleDrivers : DataError {
  using DataError::DataError;
};
struct UndrivenNet : DataError {
  using DataError::DataError;
};
struct CombinationalLoop : DataError {
  using DataError::DataError;
};
struct UnsupportedGateKind : DataError {
  using DataError::DataError;
};
using CyclicCircuit = CombinationalLoop;

// -------- engine / refmodel --------
struct MissingStimulus : DataError {
  using DataError::DataError;
};
struct StepTooCoarse : NumericError {
  using NumericError::NumericError;
};

}  // namespace sigsim
