// Copyright 2026 The specmap Authors.
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
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPECMAP_ERROR_HPP
#define SPECMAP_ERROR_HPP

#include <stdexcept>
#include <string>

namespace specmap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad index, empty set, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but the computation is not identifiable on it
/// (zero contrast in clustering, constant samples in a fit, ...).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or data file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace specmap

#endif  // SPECMAP_ERROR_HPP
