// Copyright 2026 The DCSL Authors.
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

#ifndef DCSL_ERROR_HPP_
#define DCSL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dcsl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed network or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values encountered while optimizing.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Corrupt or mismatched on-disk artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Missing input artifact.
class FileError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace dcsl

#endif  // DCSL_ERROR_HPP_
