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

#ifndef RECALIB_VERSION_HPP
#define RECALIB_VERSION_HPP

namespace recalib {

inline constexpr const char* kToolkitVersion = "1.0.0";

// Version stamp of the evaluation report JSON layout.
inline constexpr int kReportSchema = 1;

}  // namespace recalib

#endif  // RECALIB_VERSION_HPP
