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

#ifndef LMASK_TOOLS_CLI_HPP_
#define LMASK_TOOLS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace lmask::cli {

enum ExitCode {
  kOk = 0,
  kIoError = 2,
  kValidationError = 3,
  kNumericalError = 4,
};

// Runs one command line (args[0] is the program name). Results that go to
// stdout are written to `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace lmask::cli

#endif  // LMASK_TOOLS_CLI_HPP_
