// Copyright 2026 The Recalib Toolkit Authors
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

#ifndef RECALIB_RECALIB_HPP
#define RECALIB_RECALIB_HPP

#include "recalib/cloud_io.hpp"
#include "recalib/distance_transform.hpp"
#include "recalib/error.hpp"
#include "recalib/evaluate.hpp"
#include "recalib/features.hpp"
#include "recalib/geometry.hpp"
#include "recalib/kdtree2d.hpp"
#include "recalib/losses.hpp"
#include "recalib/mask.hpp"
#include "recalib/nelder_mead.hpp"
#include "recalib/perturb.hpp"
#include "recalib/recalibrate.hpp"
#include "recalib/rng.hpp"
#include "recalib/scene.hpp"
#include "recalib/tensor_io.hpp"
#include "recalib/version.hpp"

#endif  // RECALIB_RECALIB_HPP
