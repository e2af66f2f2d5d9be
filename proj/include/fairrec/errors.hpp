// Copyright 2026 The fairrec Authors
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
#pragma once

#include <stdexcept>
#include <string>

namespace fairrec {

// Invalid configuration value. `field()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// A slate or action the environment cannot accept.
class InvalidActionError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Call-order violation, e.g. stepping a finished session.
class ProtocolError : public std::logic_error {
  using std::logic_error::logic_error;
};

// Dimension mismatch between vectors, networks or checkpoints.
class ShapeError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Internal invariant broken (e.g. unknown item id in a history).
class ConsistencyError : public std::logic_error {
  using std::logic_error::logic_error;
};

// Malformed file contents.
class ParseError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem failure; message carries the path.
class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fairrec
