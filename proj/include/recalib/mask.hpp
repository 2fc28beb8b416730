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

#ifndef RECALIB_MASK_HPP
#define RECALIB_MASK_HPP

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "recalib/error.hpp"

namespace recalib {

/// Semantic segmentation mask. Class ids are stored as 8-bit gray values
/// (0 = background), which caps the label space at 255 classes.
struct SegMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> class_ids;  // row-major, width * height

  std::uint8_t at(int col, int row) const {
    return class_ids[static_cast<std::size_t>(row) * width + col];
  }
  void set(int col, int row, std::uint8_t c) {
    class_ids[static_cast<std::size_t>(row) * width + col] = c;
  }
  bool in_bounds(long long col, long long row) const {
    return col >= 0 && col < width && row >= 0 && row < height;
  }

  static SegMask zeros(int width, int height) {
    SegMask m;
    m.width = width;
    m.height = height;
    m.class_ids.assign(static_cast<std::size_t>(width) * height, 0);
    return m;
  }
};

namespace detail {

// Skips PGM whitespace and '#' comment lines; returns false at end of input.
inline bool pgm_next_token(const std::vector<std::uint8_t>& b, std::size_t& i,
                           std::string& token) {
  while (i < b.size()) {
    if (b[i] == '#') {
      while (i < b.size() && b[i] != '\n') ++i;
    } else if (std::isspace(b[i])) {
      ++i;
    } else {
      break;
    }
  }
  token.clear();
  while (i < b.size() && !std::isspace(b[i]) && b[i] != '#') {
    token += static_cast<char>(b[i]);
    ++i;
  }
  return !token.empty();
}

}  // namespace detail

/// Binary PGM ("P5"), maxval <= 255. read(write(m)) == m for any mask.
inline SegMask read_mask_pgm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw Error(ErrorCode::bad_magic, "not a P5 PGM stream");
  }
  std::size_t i = 2;
  std::string tok;
  long vals[3];
  for (int k = 0; k < 3; ++k) {
    if (!detail::pgm_next_token(bytes, i, tok))
      throw Error(ErrorCode::bad_header, "PGM header ended early");
    try {
      vals[k] = std::stol(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::bad_header, "bad PGM header token '" + tok + "'");
    }
  }
  const long width = vals[0], height = vals[1], maxval = vals[2];
  if (width <= 0 || height <= 0)
    throw Error(ErrorCode::bad_header, "non-positive PGM dimensions");
  if (maxval <= 0 || maxval > 255)
    throw Error(ErrorCode::bad_header,
                "maxval " + std::to_string(maxval) + " unsupported (need <= 255)");
  if (i >= bytes.size())
    throw Error(ErrorCode::truncated_pixels, "no pixel data");
  ++i;  // single whitespace byte after maxval

  const std::size_t need = static_cast<std::size_t>(width) * height;
  if (bytes.size() - i < need) {
    throw Error(ErrorCode::truncated_pixels,
                "need " + std::to_string(need) + " pixel bytes, have " +
                    std::to_string(bytes.size() - i));
  }
  SegMask m;
  m.width = static_cast<int>(width);
  m.height = static_cast<int>(height);
  m.class_ids.assign(bytes.begin() + i, bytes.begin() + i + need);
  return m;
}

inline std::vector<std::uint8_t> write_mask_pgm(const SegMask& mask) {
  const std::string header = "P5\n" + std::to_string(mask.width) + " " +
                             std::to_string(mask.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), mask.class_ids.begin(), mask.class_ids.end());
  return bytes;
}

}  // namespace recalib

#endif  // RECALIB_MASK_HPP
