// Copyright 2026 The necro Authors. All Rights Reserved.
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

namespace necro {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, schema violations, out-of-range arguments.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A segmentation backend failed (external process crash, timeout, bad output).
class BackendError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or codec failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A case has neither viable nor necrotic tumor pixels, so no ratio exists.
class NoTumorError : public Error {
 public:
  using Error::Error;
};

/// A statistical test has no information (e.g. zero log-rank variance).
class UntestableError : public Error {
 public:
  using Error::Error;
};

}  // namespace necro
