// Copyright 2026 The semisup Authors
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

#include <iosfwd>

namespace semisup {

// Finite-difference verification of every differentiable primitive and the
// composed losses: 20 random instances each, double precision, relative
// error < 1e-4 for primitives and < 1e-3 for compositions. Prints one line
// per check; returns false if any instance fails.
bool run_grad_check_suite(std::ostream& out);

}  // namespace semisup
