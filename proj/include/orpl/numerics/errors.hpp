// Copyright 2026 The ORPL Authors.
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

namespace orpl {

// Every failure raised by the library derives from Error so callers can map
// families of failures onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class FinitenessError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class EmptyInputError : public Error { using Error::Error; };
class IncompleteGradientError : public Error { using Error::Error; };
class ConfigurationError : public Error { using Error::Error; };

class EpisodeOverError : public Error { using Error::Error; };
class MissingReferenceError : public Error { using Error::Error; };

class FormatError : public Error { using Error::Error; };
class IntegrityError : public Error { using Error::Error; };
class UnsupportedVersionError : public Error { using Error::Error; };
class WindowError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };

// Validation failures in experiment configuration (exit code 2).
class ValidationError : public Error { using Error::Error; };
// Filesystem and serialization failures (exit code 4).
class IoError : public Error { using Error::Error; };

}  // namespace orpl
