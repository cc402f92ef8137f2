// Copyright 2026 The teamfs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TEAM_ERRORS_HPP_
#define TEAM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace team {

enum class ErrorKind {
  parameter,    // bad argument value or shape
  format,       // malformed embedding / checkpoint / matrix file
  io,           // file system failure
  sampling,     // dataset cannot supply the requested episode
  constraint,   // empty constraint set
  degenerate,   // too few points for a statistic
  domain,       // matrix outside the SPD cone
  consistency,  // numerical self-check failed
  training,     // loss diverged
};

const char* to_string(ErrorKind kind);

/// CLI exit code for an error kind: 1 usage, 2 data, 3 numerical.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace team

#endif  // TEAM_ERRORS_HPP_
