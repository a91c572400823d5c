#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace wdlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the op named in the message.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Parameters changed between forward() and gradient().
class StaleTapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid or incomplete configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(double loss, std::int64_t step)
      : Error("non-finite loss " + std::to_string(loss) + " at step " + std::to_string(step)),
        loss_(loss),
        step_(step) {}

  double loss() const { return loss_; }
  std::int64_t step() const { return step_; }

 private:
  double loss_;
  std::int64_t step_;
};

}  // namespace wdlab
