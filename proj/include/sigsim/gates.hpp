#pragma once

#include <string>

#include "sigsim/errors.hpp"

namespace sigsim {

enum class GateKind { Inv, Nor2 };

// Gates driving one load use different transfer models than gates driving
// two or more.
enum class FanoutClass { Fo1, Fo2Plus };

inline FanoutClass fanout_class_of(int fanout) {
  return fanout >= 2 ? FanoutClass::Fo2Plus : FanoutClass::Fo1;
}

inline std::string to_string(GateKind k) { return k == GateKind::Inv ? "inv" : "nor"; }
inline std::string to_string(FanoutClass f) { return f == FanoutClass::Fo1 ? "fo1" : "fo2"; }

inline GateKind gate_kind_from_string(const std::string& s) {
  if (s == "inv") return GateKind::Inv;
  if (s == "nor" || s == "nor2") return GateKind::Nor2;
  throw DataError("unknown gate kind: " + s);
}

inline FanoutClass fanout_class_from_string(const std::string& s) {
  if (s == "fo1" || s == "1") return FanoutClass::Fo1;
  if (s == "fo2" || s == "2") return FanoutClass::Fo2Plus;
  throw DataError("unknown fan-out class: " + s);
}

}  // namespace sigsim
