/*
 * Copyright 2026 The lmask Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef LMASK_ERROR_HPP_
#define LMASK_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace lmask {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent tensor shapes, or a layer applied to an input it cannot take.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed or semantically invalid documents, arguments and graphs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad file contents (magic, truncation) or failing file system calls.
class IoError : public Error {
 public:
  using Error::Error;
};

// Rank deficiency, non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace lmask

#endif  // LMASK_ERROR_HPP_
