#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace wdlab {

/// Numeric format a computation is carried out in. `full` is the 64-bit
/// reference; the two 16-bit formats are emulated by rounding doubles.
struct NumericMode {
  enum class Kind { full, bf16, fp16 };

  Kind kind = Kind::full;
  int fraction_bits = 23;
  int exponent_bits = 8;

  static constexpr NumericMode full() { return {Kind::full, 23, 8}; }
  static constexpr NumericMode bf16() { return {Kind::bf16, 7, 8}; }
  static constexpr NumericMode fp16() { return {Kind::fp16, 10, 5}; }

  bool is_full() const { return kind == Kind::full; }

  /// Largest finite magnitude of the emulated format.
  double max_finite() const;
  /// Smallest positive normal magnitude of the emulated format.
  double min_normal() const;

  friend bool operator==(const NumericMode&, const NumericMode&) = default;
};

std::string_view to_string(NumericMode::Kind kind);
/// Accepts "full", "bf16", "fp16"; throws ConfigError otherwise.
NumericMode parse_numeric_mode(std::string_view name);

/// Round-to-nearest, ties-to-even into `mode`, re-expressed as a double.
/// Subnormals are kept, overflow goes to signed infinity, NaN passes through.
/// `full` is the identity.
double quantize(double x, NumericMode mode);

inline double qadd(double a, double b, NumericMode mode) { return quantize(a + b, mode); }
inline double qmul(double a, double b, NumericMode mode) { return quantize(a * b, mode); }
double qfma(double a, double b, double c, NumericMode mode);

/// True when every value survives quantize() unchanged.
template <typename Derived>
bool representable(const Eigen::DenseBase<Derived>& values, NumericMode mode) {
  if (mode.is_full()) return true;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double v = values.derived().coeff(i);
    const double q = quantize(v, mode);
    if (!(q == v || (v != v && q != q))) return false;
  }
  return true;
}

/// Elementwise quantize, in place.
template <typename Derived>
void quantize_inplace(Eigen::DenseBase<Derived>& values, NumericMode mode) {
  if (mode.is_full()) return;
  values = values.unaryExpr([mode](double v) { return quantize(v, mode); });
}

/// Mixed-precision execution policy for a forward/backward pass.
struct MixedPrecisionPolicy {
  NumericMode compute_mode = NumericMode::full();
  bool master_weights_full = true;
  bool quantize_gradients = false;

  bool is_identity() const { return compute_mode.is_full(); }

  static MixedPrecisionPolicy full() { return {}; }
  static MixedPrecisionPolicy mixed(NumericMode mode) { return {mode, true, true}; }

  friend bool operator==(const MixedPrecisionPolicy&, const MixedPrecisionPolicy&) = default;
};

}  // namespace wdlab
