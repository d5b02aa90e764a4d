#pragma once

#include <stdexcept>
#include <string>

namespace pnum {

/// Base class of all library errors. Everything numerical derives from
/// NumericalError so the CLI can map it to a dedicated exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

#define PNUM_DECLARE_ERROR(Name, Base) \
  class Name : public Base {           \
   public:                             \
    using Base::Base;                  \
  };

PNUM_DECLARE_ERROR(SingularGram, NumericalError)
PNUM_DECLARE_ERROR(DuplicateNode, InvalidArgument)
PNUM_DECLARE_ERROR(OutOfDomain, InvalidArgument)
PNUM_DECLARE_ERROR(UnsortedNodes, InvalidArgument)
PNUM_DECLARE_ERROR(NoCandidates, InvalidArgument)
PNUM_DECLARE_ERROR(NonPositiveEvaluation, NumericalError)
PNUM_DECLARE_ERROR(Breakdown, NumericalError)
PNUM_DECLARE_ERROR(DimensionMismatch, InvalidArgument)
PNUM_DECLARE_ERROR(BeliefDimensionMismatch, DimensionMismatch)
PNUM_DECLARE_ERROR(InsufficientTrace, InvalidArgument)
PNUM_DECLARE_ERROR(NonFiniteField, NumericalError)
PNUM_DECLARE_ERROR(CovarianceBreakdown, NumericalError)
PNUM_DECLARE_ERROR(ZeroError, NumericalError)

#undef PNUM_DECLARE_ERROR

}  // namespace pnum
