// Copyright 2026 The plantmon Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Subcommands: gen, extract, earlywarn, estimate,
// rfae, mem, energy.
//
// Exit codes: 0 success, 1 empty or unusable data, 2 configuration error.
// The seed is taken from the config file, then PLANTMON_SEED, then --seed,
// later sources winning.

#ifndef PLANTMON_CLI_HPP_
#define PLANTMON_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace plantmon::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitConfig = 2;

// `args` excludes the program name. Log lines go to `log`.
int run(const std::vector<std::string>& args, std::ostream& log);
int main(int argc, char** argv);

}  // namespace plantmon::cli

#endif  // PLANTMON_CLI_HPP_
