#pragma once

#include <stdexcept>
#include <string>

namespace hybridbn {

// Base for all library errors. kind() is a stable machine-readable tag;
// the CLI prints it on stderr so callers can dispatch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define HYBRIDBN_DEFINE_ERROR(Name)                          \
  class Name : public Error {                                \
   public:                                                   \
    explicit Name(const std::string& msg) : Error(#Name, msg) {} \
  }

HYBRIDBN_DEFINE_ERROR(ScopeError);
HYBRIDBN_DEFINE_ERROR(NumericalError);
HYBRIDBN_DEFINE_ERROR(NonIntegrableFactor);
HYBRIDBN_DEFINE_ERROR(SingularCovariance);
HYBRIDBN_DEFINE_ERROR(EmptyMixture);
HYBRIDBN_DEFINE_ERROR(ConfigError);
HYBRIDBN_DEFINE_ERROR(TreeTooLarge);
HYBRIDBN_DEFINE_ERROR(StrongRootViolation);
HYBRIDBN_DEFINE_ERROR(OutOfCliqueQuery);
HYBRIDBN_DEFINE_ERROR(DimensionCap);
HYBRIDBN_DEFINE_ERROR(ParseError);
HYBRIDBN_DEFINE_ERROR(CycleError);
HYBRIDBN_DEFINE_ERROR(ValidationError);
HYBRIDBN_DEFINE_ERROR(DegenerateWeights);
HYBRIDBN_DEFINE_ERROR(ZeroMass);

#undef HYBRIDBN_DEFINE_ERROR

}  // namespace hybridbn
