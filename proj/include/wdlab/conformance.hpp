#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wdlab {

/// Value of a 16-bit bfloat16 pattern (the top half of a float32).
double bf16_bits_to_double(std::uint16_t bits);
/// Value of a 16-bit IEEE binary16 pattern.
double fp16_bits_to_double(std::uint16_t bits);
/// float32 -> bfloat16 pattern, round-to-nearest-even on the raw bits.
std::uint16_t float_to_bf16_bits(float x);

struct ConformanceRow {
  std::string check;
  std::string expected;
  std::string actual;
  bool pass = false;
};

/// The emulated-precision conformance table: named examples plus exhaustive
/// sweeps of both 16-bit formats against the bit-level decoders above.
std::vector<ConformanceRow> precision_conformance();

}  // namespace wdlab
