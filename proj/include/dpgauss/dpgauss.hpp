// Copyright 2026 The dpgauss Authors
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

#ifndef DPGAUSS_DPGAUSS_HPP_
#define DPGAUSS_DPGAUSS_HPP_

#include "dpgauss/covers.hpp"
#include "dpgauss/error.hpp"
#include "dpgauss/gaussian.hpp"
#include "dpgauss/harness.hpp"
#include "dpgauss/learners.hpp"
#include "dpgauss/mechanisms.hpp"
#include "dpgauss/rng.hpp"
#include "dpgauss/scheffe.hpp"
#include "dpgauss/tv.hpp"

#endif  // DPGAUSS_DPGAUSS_HPP_
