// Copyright 2026 The fedmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace fedmix {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch, out-of-range index, or any other precondition violation.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data (IDX, CIFAR binary, checkpoints, plan files).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Bad or inconsistent experiment configuration. `key()` names the offending
/// field when one can be identified.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& message)
      : Error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// FedFreq weights are undefined for a single selected client or F*K <= 1.
class DegenerateSelection : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

}  // namespace fedmix
