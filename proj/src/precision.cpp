#include "wdlab/precision.hpp"

#include <cmath>
#include <limits>

#include "wdlab/errors.hpp"

namespace wdlab {

namespace {

int exponent_bias(const NumericMode& mode) { return (1 << (mode.exponent_bits - 1)) - 1; }

}  // namespace

double NumericMode::max_finite() const {
  if (is_full()) return std::numeric_limits<double>::max();
  const int emax = exponent_bias(*this);
  return std::ldexp(2.0 - std::ldexp(1.0, -fraction_bits), emax);
}

double NumericMode::min_normal() const {
  if (is_full()) return std::numeric_limits<double>::min();
  return std::ldexp(1.0, 1 - exponent_bias(*this));
}

std::string_view to_string(NumericMode::Kind kind) {
  switch (kind) {
    case NumericMode::Kind::full: return "full";
    case NumericMode::Kind::bf16: return "bf16";
    case NumericMode::Kind::fp16: return "fp16";
  }
  return "?";
}

NumericMode parse_numeric_mode(std::string_view name) {
  if (name == "full") return NumericMode::full();
  if (name == "bf16") return NumericMode::bf16();
  if (name == "fp16") return NumericMode::fp16();
  throw ConfigError("unknown numeric mode '" + std::string(name) + "'");
}

double quantize(double x, NumericMode mode) {
  if (mode.is_full() || x == 0.0 || !std::isfinite(x)) return x;

  const int emin = 1 - exponent_bias(mode);
  const double magnitude = std::fabs(x);

  // magnitude = m * 2^e with m in [1, 2); below the normal range the
  // spacing stays at the subnormal quantum 2^(emin - fraction_bits).
  int e = std::ilogb(magnitude);
  if (e < emin) e = emin;
  const int quantum_exp = e - mode.fraction_bits;

  // Scaling by a power of two is exact, so a single rounding happens here.
  const double scaled = std::ldexp(magnitude, -quantum_exp);
  double rounded = std::ldexp(std::nearbyint(scaled), quantum_exp);
  if (rounded > mode.max_finite()) rounded = std::numeric_limits<double>::infinity();
  return std::copysign(rounded, x);
}

double qfma(double a, double b, double c, NumericMode mode) {
  return quantize(std::fma(a, b, c), mode);
}

}  // namespace wdlab
