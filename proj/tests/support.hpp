#pragma once

#include <string>
#include <string_view>

#include "bsim/config.hpp"
#include "bsim/cost.hpp"
#include "bsim/error.hpp"
#include "doctest.h"

namespace doctest {
template <>
struct StringMaker<bsim::EventCounts> {
  static String convert(const bsim::EventCounts& c) { return bsim::to_string(c).c_str(); }
};
}  // namespace doctest

namespace bsim::testing {

// Flags are given as tokens; an empty list means the linked baseline.
inline BoundaryConfig cfg(std::string_view tokens) {
  return parse_setup(tokens, Baseline::LinkedBase).config;
}

// Independent weighted sum, not going through the library's helper.
inline Cycles oracle_cycles(const EventCounts& counts, const WeightTable& w) {
  Cycles total = 0;
  for (std::size_t i = 0; i < kCostEventCount; ++i) total += counts.n[i] * w.cycles[i];
  return total;
}

template <class F>
Errc error_of(F&& f) {
  try {
    f();
  } catch (const SimError& e) {
    return e.code();
  }
  FAIL("no SimError thrown");
  return Errc::BadArgument;
}

}  // namespace bsim::testing
