#pragma once

#include <stdexcept>
#include <string>

namespace mvg {

// Error hierarchy mirrored by the CLI exit codes:
// FormatError -> 2, DataError/EvalError -> 3, ParamError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed files: bad magic, wrong version, truncated payload, unparsable lines.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed input with invalid content: NaN rows, zero vectors, duplicate or
// unresolved ids, dimension mismatches.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid parameters: out-of-range beta, infeasible cluster counts.
class ParamError : public Error {
 public:
  using Error::Error;
};

// Evaluation preconditions violated: empty relevance sets, no evaluable queries.
class EvalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvg
