// Copyright 2026 The qsv Authors.
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
/**
 * @file
 * Command-line front end: simulate, predict, compare, emit and catalog.
 */

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qsv::cli {

/// "3", "0..3" or "0,2,3" to a list of integers.
std::vector<int> parse_int_list(const std::string &text);

/// Runs the tool with argv-style arguments (argv[0] is the program name).
/// Returns the process exit code; usage errors go to `err`.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace qsv::cli
