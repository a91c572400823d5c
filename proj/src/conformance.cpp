#include "wdlab/conformance.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "wdlab/precision.hpp"

namespace wdlab {

double bf16_bits_to_double(std::uint16_t bits) {
  return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(bits) << 16));
}

double fp16_bits_to_double(std::uint16_t bits) {
  const bool negative = bits & 0x8000u;
  const int exponent = (bits >> 10) & 0x1f;
  const int fraction = bits & 0x3ff;
  double magnitude = 0.0;
  if (exponent == 0x1f) {
    magnitude = fraction ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
  } else if (exponent == 0) {
    magnitude = std::ldexp(static_cast<double>(fraction), -24);
  } else {
    magnitude = std::ldexp(static_cast<double>(fraction | 0x400), exponent - 25);
  }
  return negative ? -magnitude : magnitude;
}

std::uint16_t float_to_bf16_bits(float x) {
  const auto bits = std::bit_cast<std::uint32_t>(x);
  if ((bits & 0x7fffffffu) > 0x7f800000u) return static_cast<std::uint16_t>((bits >> 16) | 0x40u);  // NaN
  const std::uint32_t rounding = 0x7fffu + ((bits >> 16) & 1u);
  return static_cast<std::uint16_t>((bits + rounding) >> 16);
}

namespace {

std::string show(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

ConformanceRow value_row(std::string check, double expected, double actual) {
  return {std::move(check), show(expected), show(actual), expected == actual};
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

ConformanceRow exhaustive(const std::string& check, NumericMode mode, double (*decode)(std::uint16_t)) {
  int failures = 0;
  for (std::uint32_t p = 0; p <= 0xffffu; ++p) {
    const double v = decode(static_cast<std::uint16_t>(p));
    if (!same(quantize(v, mode), v)) ++failures;
  }
  return {check, "0 mismatches", std::to_string(failures) + " mismatches", failures == 0};
}

}  // namespace

std::vector<ConformanceRow> precision_conformance() {
  const auto bf16 = NumericMode::bf16();
  const auto fp16 = NumericMode::fp16();
  std::vector<ConformanceRow> rows;
  rows.push_back(value_row("qadd(256, 1, bf16)", 256.0, qadd(256.0, 1.0, bf16)));
  rows.push_back(value_row("qadd(256, 4, bf16)", 260.0, qadd(256.0, 4.0, bf16)));
  rows.push_back(value_row("qadd(256, 1, full)", 257.0, qadd(256.0, 1.0, NumericMode::full())));
  rows.push_back(value_row("quantize(1 + 2^-8, bf16)", 1.0, quantize(1.0 + std::ldexp(1.0, -8), bf16)));
  rows.push_back(value_row("quantize(65519, fp16)", 65504.0, quantize(65519.0, fp16)));
  rows.push_back(value_row("quantize(65520, fp16)", INFINITY, quantize(65520.0, fp16)));
  rows.push_back(value_row("quantize(70000, fp16)", INFINITY, quantize(70000.0, fp16)));
  rows.push_back(value_row("quantize(-70000, fp16)", -INFINITY, quantize(-70000.0, fp16)));
  rows.push_back(value_row("quantize(2^-24, fp16) (subnormal)", std::ldexp(1.0, -24), quantize(std::ldexp(1.0, -24), fp16)));
  rows.push_back(exhaustive("bf16 round-trip, all 2^16 patterns", bf16, bf16_bits_to_double));
  rows.push_back(exhaustive("fp16 round-trip, all 2^16 patterns", fp16, fp16_bits_to_double));

  std::mt19937 rng(12345);
  int failures = 0;
  constexpr int samples = 200000;
  for (int i = 0; i < samples; ++i) {
    const auto f = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
    const double expected = bf16_bits_to_double(float_to_bf16_bits(f));
    if (!same(quantize(static_cast<double>(f), bf16), expected)) ++failures;
  }
  rows.push_back({"bf16 rounding of 200000 random float32 patterns", "0 mismatches",
                  std::to_string(failures) + " mismatches", failures == 0});
  return rows;
}

}  // namespace wdlab
