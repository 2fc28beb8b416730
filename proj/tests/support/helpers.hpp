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
//
// Shared fixtures: typed-error assertions, scratch directories, random but
// valid calibrations, and a subprocess runner for the CLI binary.

#ifndef RECALIB_TESTS_SUPPORT_HELPERS_HPP
#define RECALIB_TESTS_SUPPORT_HELPERS_HPP

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <Eigen/Geometry>

#include "recalib/cloud_io.hpp"
#include "recalib/error.hpp"
#include "recalib/geometry.hpp"
#include "recalib/rng.hpp"

#ifndef RECALIB_CLI_PATH
#define RECALIB_CLI_PATH ""
#endif

namespace testutil {

// Runs `fn`, requires it to throw the library error with exactly `code`,
// and hands back the message for callers that also want to inspect it.
template <typename Fn>
inline std::string expect_error(recalib::ErrorCode code, Fn&& fn) {
  try {
    fn();
  } catch (const recalib::Error& e) {
    INFO(e.what());
    CHECK(e.code() == code);
    return e.what();
  } catch (const std::exception& e) {
    FAIL("expected a typed error, got: " << e.what());
    return {};
  }
  FAIL("expected error " << recalib::error_code_name(code)
                         << ", but nothing was thrown");
  return {};
}

// Scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    const unsigned id = counter.fetch_add(1);
    path_ = std::filesystem::temp_directory_path() /
            ("recalib_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(id));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const {
    return path_ / leaf;
  }

 private:
  std::filesystem::path path_;
};

inline bool files_equal(const std::filesystem::path& a,
                        const std::filesystem::path& b) {
  return recalib::read_file_bytes(a.string()) ==
         recalib::read_file_bytes(b.string());
}

// Uniformly random rotation via a normalized gaussian quaternion.
inline recalib::Mat33 random_rotation(recalib::SplitMix64& rng) {
  Eigen::Quaterniond q(rng.gaussian(), rng.gaussian(), rng.gaussian(),
                       rng.gaussian());
  q.normalize();
  return q.toRotationMatrix();
}

// A structurally valid calibration with random extrinsics, random
// rectification, and a plausible pinhole projection.
inline recalib::CalibrationSet random_calib(recalib::SplitMix64& rng) {
  recalib::CalibrationSet c;
  c.v2c.leftCols<3>() = random_rotation(rng);
  c.v2c.col(3) =
      recalib::Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                    rng.uniform(-0.5, 0.5));
  c.r0 = random_rotation(rng);
  const double f = rng.uniform(400.0, 900.0);
  c.p.setZero();
  c.p(0, 0) = f;
  c.p(1, 1) = f;
  c.p(0, 2) = rng.uniform(200.0, 400.0);
  c.p(1, 2) = rng.uniform(100.0, 200.0);
  c.p(2, 2) = 1.0;
  c.p(0, 3) = rng.uniform(-40.0, 40.0);
  return c;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string read_whole(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Invokes the CLI under test (path injected by the build) with shell
// argument text, capturing exit code, stdout, and stderr.
inline RunResult run_cli(const std::string& args,
                         const std::string& env_prefix = "") {
  static std::atomic<unsigned> counter{0};
  const unsigned id = counter.fetch_add(1);
  const auto base = std::filesystem::temp_directory_path() /
                    ("recalib_cli_" + std::to_string(::getpid()) + "_" +
                     std::to_string(id));
  const std::string out_file = base.string() + ".out";
  const std::string err_file = base.string() + ".err";

  std::string cmd;
  if (!env_prefix.empty()) cmd += env_prefix + " ";
  cmd += std::string("'") + RECALIB_CLI_PATH + "' " + args + " > '" +
         out_file + "' 2> '" + err_file + "'";

  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  r.out = read_whole(out_file);
  r.err = read_whole(err_file);
  std::filesystem::remove(out_file);
  std::filesystem::remove(err_file);
  return r;
}

}  // namespace testutil

#endif  // RECALIB_TESTS_SUPPORT_HELPERS_HPP
