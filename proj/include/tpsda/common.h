// include/tpsda/common.h

// Copyright 2026  The tpsda authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TPSDA_COMMON_H_
#define TPSDA_COMMON_H_

#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tpsda {

/// Raised when an input violates a documented precondition or invariant.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string &msg)
      : std::invalid_argument(msg) {}
};

/// Raised on file-format or I/O failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string &msg) : std::runtime_error(msg) {}
};

inline void Warn(const std::string &msg) {
  std::cerr << "WARNING (tpsda): " << msg << std::endl;
}

}  // namespace tpsda

#endif  // TPSDA_COMMON_H_
