// Copyright 2026 The nwf authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef NWF_COMMON_HPP_
#define NWF_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nwf {

// Scalar type for all tensor math. The default build uses float; defining
// NWF_REAL_DOUBLE switches the whole numeric core to double so analytic
// gradients can be verified against finite differences at tight tolerances.
#ifdef NWF_REAL_DOUBLE
using real_t = double;
#else
using real_t = float;
#endif

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller violated a documented precondition (bad shape, bad argument,
// malformed configuration, out-of-range index).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Numeric breakdown at runtime: NaN or Inf in a loss or gradient.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Persisted data failed validation (digest mismatch, truncation, bad magic).
class CorruptionError : public Error {
 public:
  explicit CorruptionError(const std::string& msg) : Error(msg) {}
};

// Persisted data has an unsupported format version.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

// An input file or configuration could not be parsed or validated.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Requested data does not exist (missing word, missing split member).
class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& msg) : Error(msg) {}
};

[[noreturn]] inline void contract_fail(const char* file, int line,
                                       const std::string& msg) {
  throw ContractError(std::string(file) + ":" + std::to_string(line) + ": " +
                      msg);
}

#define NWF_REQUIRE(cond, msg)                         \
  do {                                                 \
    if (!(cond)) ::nwf::contract_fail(__FILE__, __LINE__, (msg)); \
  } while (0)

}  // namespace nwf

#endif  // NWF_COMMON_HPP_
