/* Copyright 2026 The Meshplan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Command-line front end. Subcommands: plan, simulate, cover, sweep-b,
// report.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 infeasible
// (memory, cover hypotheses, simulated out-of-memory).

#ifndef MESHPLAN_CLI_H_
#define MESHPLAN_CLI_H_

#include <ostream>
#include <string>
#include <vector>

#include "absl/status/status.h"

namespace meshplan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitInfeasible = 2;

int ExitCodeFor(const absl::Status& status);

// `args` excludes the program name.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace meshplan

#endif  // MESHPLAN_CLI_H_
