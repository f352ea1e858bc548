#pragma once

#include <stdexcept>
#include <string>

namespace defdts {

// Base for everything this library throws. Subtypes name the contract that
// was violated, not the call site.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : Error {
  using Error::Error;
};
struct InvariantError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct MissingGoldError : Error {
  using Error::Error;
};
struct LengthMismatchError : Error {
  using Error::Error;
};
struct DegenerateInputError : Error {
  using Error::Error;
};
struct EmptyInputError : Error {
  using Error::Error;
};
struct UnknownIntentError : Error {
  using Error::Error;
};
struct UnknownTagError : Error {
  using Error::Error;
};
struct UnknownLabelError : Error {
  using Error::Error;
};
struct DegenerateTableError : Error {
  using Error::Error;
};
struct EmptyLexiconError : Error {
  using Error::Error;
};
struct IndexOutOfRangeError : Error {
  using Error::Error;
};
struct VariantConflictError : Error {
  using Error::Error;
};
struct TransportError : Error {
  using Error::Error;
};
struct ProviderError : Error {
  using Error::Error;
};
struct TimeoutError : Error {
  using Error::Error;
};
struct IdMismatchError : Error {
  using Error::Error;
};
struct CorpusMismatchError : Error {
  using Error::Error;
};
struct NoScoreableDialoguesError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace defdts
