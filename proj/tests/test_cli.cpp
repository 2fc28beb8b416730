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
// End-to-end tests of the command-line tool, run as a subprocess. Each test
// builds its inputs in a scratch directory and inspects exit codes, stream
// output, and the files left behind.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "recalib/recalib.hpp"
#include "support/helpers.hpp"

namespace fs = std::filesystem;
using namespace recalib;
using nlohmann::json;
using testutil::run_cli;
using testutil::TempDir;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

json read_json(const fs::path& path) {
  return json::parse(testutil::read_whole(path));
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Generates a small dataset with the CLI itself; most tests start from one.
void make_dataset(const fs::path& dir, int frames, std::uint64_t seed) {
  const auto r = run_cli("synth --out " + q(dir) + " --frames " +
                         std::to_string(frames) + " --seed " +
                         std::to_string(seed));
  REQUIRE(r.exit_code == 0);
}

const std::vector<std::string> kFrameSuffixes = {".bin", ".label", ".pgm",
                                                 ".calib.txt"};

// Search settings small enough to keep subprocess runs quick. Partial on
// purpose: unlisted keys must come back as the documented defaults.
const char* kQuickSearch =
    R"({"coarse_grid": 3, "polytope_iters": 60, "restarts": 2})";

}  // namespace

TEST_CASE("cli synth writes frames, a manifest, and a run log", "[cli]") {
  TempDir td;
  const fs::path out = td / "frames";
  write_text(td / "spec.json",
             R"({"frames": 2, "master_seed": 7,
                 "scene": {"image_width": 256, "image_height": 128,
                           "points_per_object": 150, "background_points": 200}})");

  const auto r = run_cli("synth --spec " + q(td / "spec.json") + " --out " +
                         q(out));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);

  for (const std::string& id : {"000000", "000001"})
    for (const std::string& suffix : kFrameSuffixes)
      CHECK(fs::exists(out / (id + suffix)));
  CHECK(fs::file_size(out / "run.log") > 0);

  const json manifest = read_json(out / "manifest.json");
  CHECK(manifest.at("schema").get<int>() == kReportSchema);
  CHECK(manifest.at("command").get<std::string>() == "synth");
  CHECK(manifest.at("config").at("frames").get<int>() == 2);
  CHECK(manifest.at("config").at("master_seed").get<std::uint64_t>() == 7);
  CHECK(manifest.at("config").at("scene").at("image_width").get<int>() == 256);
  CHECK(manifest.at("frames") == json({"000000", "000001"}));

  // The written mask really is the advertised size.
  const SegMask mask =
      read_mask_pgm(read_file_bytes((out / "000000.pgm").string()));
  CHECK(mask.width == 256);
  CHECK(mask.height == 128);
}

TEST_CASE("cli synth with zero frames still writes a manifest", "[cli]") {
  TempDir td;
  const fs::path out = td / "empty";
  const auto r = run_cli("synth --out " + q(out) + " --frames 0");
  REQUIRE(r.exit_code == 0);

  const json manifest = read_json(out / "manifest.json");
  CHECK(manifest.at("frames").is_array());
  CHECK(manifest.at("frames").empty());
  CHECK_FALSE(fs::exists(out / "000000.bin"));
}

TEST_CASE("cli synth reruns with one seed are byte-identical", "[cli]") {
  TempDir td;
  const fs::path a = td / "a", b = td / "b", c = td / "c";
  make_dataset(a, 2, 11);
  make_dataset(b, 2, 11);
  make_dataset(c, 2, 12);

  for (const std::string& id : {"000000", "000001"})
    for (const std::string& suffix : kFrameSuffixes)
      CHECK(testutil::files_equal(a / (id + suffix), b / (id + suffix)));
  CHECK(testutil::files_equal(a / "manifest.json", b / "manifest.json"));
  CHECK_FALSE(testutil::files_equal(a / "000000.bin", c / "000000.bin"));
}

TEST_CASE("cli dry runs print the resolved config and touch nothing",
          "[cli]") {
  TempDir td;
  const fs::path ghost = td / "never_created";

  SECTION("synth") {
    const auto r = run_cli("synth --out " + q(ghost) +
                           " --frames 4 --seed 9 --dry-run");
    REQUIRE(r.exit_code == 0);
    const json config = json::parse(r.out);
    CHECK(config.at("frames").get<int>() == 4);
    CHECK(config.at("master_seed").get<std::uint64_t>() == 9);
    CHECK(config.contains("scene"));
  }

  SECTION("perturb") {
    const auto r = run_cli("perturb --in " + q(ghost) + " --out " + q(ghost) +
                           " --translate 0,0.2,0 --dry-run");
    REQUIRE(r.exit_code == 0);
    const json config = json::parse(r.out);
    CHECK(config.at("corruption").at("type").get<std::string>() ==
          "cloud_translation");
    CHECK(config.at("corruption").at("translation")[1].get<double>() == 0.2);
  }

  SECTION("export-features") {
    const auto r = run_cli("export-features --in " + q(ghost) + " --out " +
                           q(ghost) + " --classes 1,3 --dry-run");
    REQUIRE(r.exit_code == 0);
    const json config = json::parse(r.out);
    CHECK(config.at("classes") == json({1, 3}));
  }

  SECTION("recalibrate, synthetic source") {
    write_text(td / "cfg.json",
               R"({"master_seed": 5,
                   "synthetic": {"corruptions": [{"type": "gaussian_noise",
                                                  "sigma": 0.02}],
                                 "frames_per_level": 3}})");
    const auto r = run_cli("recalibrate --config " + q(td / "cfg.json") +
                           " --out " + q(ghost / "report.json") + " --dry-run");
    REQUIRE(r.exit_code == 0);
    const json config = json::parse(r.out);
    CHECK(config.at("corruptions")[0].at("sigma").get<double>() == 0.02);
    CHECK(config.at("frames_per_level").get<int>() == 3);
    // Worker count never reaches the provenance echo.
    CHECK_FALSE(config.contains("jobs"));
  }

  CHECK_FALSE(fs::exists(ghost));
}

TEST_CASE("cli perturb with zero noise copies the dataset", "[cli]") {
  TempDir td;
  const fs::path a = td / "clean", b = td / "noisy";
  make_dataset(a, 2, 5);

  const auto r = run_cli("perturb --in " + q(a) + " --out " + q(b) +
                         " --sigma 0 --seed 3");
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);

  for (const std::string& id : {"000000", "000001"}) {
    for (const std::string& suffix : kFrameSuffixes)
      CHECK(testutil::files_equal(a / (id + suffix), b / (id + suffix)));
    // Truth sidecar appears and, at zero noise, matches the stale file.
    CHECK(testutil::files_equal(a / (id + ".calib.txt"),
                                b / (id + ".calib_truth.txt")));
  }

  const json manifest = read_json(b / "manifest.json");
  CHECK(manifest.at("command").get<std::string>() == "perturb");
  const json& entry = manifest.at("frames").at(0);
  CHECK(entry.at("corruption_type").get<std::string>() == "gaussian_noise");
  CHECK(entry.at("sigma").get<double>() == 0.0);
  for (double v : entry.at("true_bias").at("values").get<std::vector<double>>())
    CHECK(v == 0.0);
}

TEST_CASE("cli perturb translate shifts clouds and keeps projections",
          "[cli]") {
  TempDir td;
  const fs::path a = td / "clean", b = td / "shifted";
  make_dataset(a, 1, 6);

  const auto r = run_cli("perturb --in " + q(a) + " --out " + q(b) +
                         " --translate 0,0.2,0 --seed 3");
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);

  // Stale calibration is carried over verbatim; the truth sidecar is new.
  CHECK(testutil::files_equal(a / "000000.calib.txt", b / "000000.calib.txt"));
  CHECK_FALSE(testutil::files_equal(a / "000000.calib.txt",
                                    b / "000000.calib_truth.txt"));

  const json manifest = read_json(b / "manifest.json");
  const json& entry = manifest.at("frames").at(0);
  CHECK(entry.at("corruption_type").get<std::string>() == "cloud_translation");
  CHECK(entry.at("translation") == json({0.0, 0.2, 0.0}));

  // The truth calibration undoes the shift: the moved cloud projects to the
  // same pixels the clean cloud hit under the clean calibration.
  const LabeledCloud clean =
      read_cloud_bin(read_file_bytes((a / "000000.bin").string()));
  const LabeledCloud moved =
      read_cloud_bin(read_file_bytes((b / "000000.bin").string()));
  REQUIRE(clean.points.size() == moved.points.size());
  const Projector clean_proj(
      parse_kitti_calibration(read_file_text((a / "000000.calib.txt").string())));
  const Projector truth_proj(parse_kitti_calibration(
      read_file_text((b / "000000.calib_truth.txt").string())));

  std::size_t kept = 0;
  for (std::size_t i = 0; i < clean.points.size(); ++i) {
    const auto& p = clean.points[i];
    const auto& m = moved.points[i];
    PixelPoint before, after;
    const bool ok_before =
        clean_proj.project(Vec3(p.x, p.y, p.z), &before);
    const bool ok_after = truth_proj.project(Vec3(m.x, m.y, m.z), &after);
    REQUIRE(ok_before == ok_after);
    if (!ok_before) continue;
    ++kept;
    CHECK(std::abs(before.u - after.u) < 1e-9);
    CHECK(std::abs(before.v - after.v) < 1e-9);
    CHECK(std::abs(before.depth - after.depth) < 1e-9);
  }
  CHECK(kept > 100);
}

TEST_CASE("cli export-features writes tensor pairs and skips broken frames",
          "[cli]") {
  TempDir td;
  const fs::path a = td / "frames", b = td / "tensors";
  make_dataset(a, 2, 8);
  fs::remove(a / "000001.pgm");  // cripple the second frame

  const auto r = run_cli("export-features --in " + q(a) + " --out " + q(b) +
                         " --classes 1 --verify");
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);

  CHECK(fs::exists(b / alignment_feature_filename("000000")));
  CHECK(fs::exists(b / calibration_feature_filename("000000")));
  CHECK_FALSE(fs::exists(b / alignment_feature_filename("000001")));

  // Both tensors re-import cleanly and share the mask's spatial shape.
  const Tensor align = import_tensor(
      read_file_bytes((b / alignment_feature_filename("000000")).string()));
  const Tensor calib5 = import_tensor(
      read_file_bytes((b / calibration_feature_filename("000000")).string()));
  REQUIRE(align.dims.size() == 3);
  REQUIRE(calib5.dims.size() == 3);
  CHECK(align.dims[1] == calib5.dims[1]);
  CHECK(align.dims[2] == calib5.dims[2]);

  const json manifest = read_json(b / "manifest.json");
  CHECK(manifest.at("frames") == json({"000000"}));
  REQUIRE(manifest.at("skipped").size() == 1);
  const json& skip = manifest.at("skipped").at(0);
  CHECK(skip.at("frame_id").get<std::string>() == "000001");
  CHECK(skip.at("code").get<std::string>() == "io_error");
  CHECK_FALSE(skip.at("message").get<std::string>().empty());
}

TEST_CASE("cli recalibrate requires exactly one input source", "[cli]") {
  TempDir td;

  SECTION("neither a directory nor a synthetic block") {
    const auto r = run_cli("recalibrate --out " + q(td / "r.json"));
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("bad_config") != std::string::npos);
  }

  SECTION("both at once") {
    write_text(td / "cfg.json",
               R"({"dataset_dir": "somewhere",
                   "synthetic": {"frames_per_level": 1}})");
    const auto r = run_cli("recalibrate --config " + q(td / "cfg.json") +
                           " --out " + q(td / "r.json"));
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("bad_config") != std::string::npos);
  }
}

TEST_CASE("cli recalibrate synthetic sweep is worker-count invariant",
          "[cli]") {
  TempDir td;
  write_text(td / "cfg.json",
             std::string(R"({"master_seed": 11,
                 "synthetic": {"corruptions": [{"type": "cloud_translation",
                                                "translation": [0, 0.15, 0]}],
                               "frames_per_level": 2},
                 "search": )") +
                 kQuickSearch + "}");

  const fs::path r1 = td / "r1.json", r2 = td / "r2.json";
  const auto run1 = run_cli("recalibrate --config " + q(td / "cfg.json") +
                            " --out " + q(r1) + " --jobs 1");
  CAPTURE(run1.err);
  REQUIRE(run1.exit_code == 0);
  const auto run2 = run_cli("recalibrate --config " + q(td / "cfg.json") +
                            " --out " + q(r2) + " --jobs 2");
  REQUIRE(run2.exit_code == 0);
  CHECK(testutil::files_equal(r1, r2));

  const json report = read_json(r1);
  CHECK(report.at("schema").get<int>() == kReportSchema);
  CHECK(report.at("meta").at("seed").get<std::uint64_t>() == 11);
  REQUIRE(report.at("rows").size() == 2);
  for (const json& row : report.at("rows")) {
    CHECK(row.at("corruption").at("type").get<std::string>() ==
          "cloud_translation");
    CHECK(row.at("before").at("translation_error_cm").get<double>() ==
          Catch::Approx(15.0).margin(1e-6));
  }
  CHECK(report.at("summary").at("frames").get<int>() == 2);
  // The partial search block resolved against struct defaults.
  CHECK(report.at("config").at("search").at("polytope_iters").get<int>() == 60);
  CHECK(report.at("config").at("search").at("tolerance").get<double>() ==
        1e-10);
  // Timing stays in the sidecar log, never in the report.
  CHECK(testutil::read_whole(r1).find("wall") == std::string::npos);
  CHECK(fs::exists(td / "r1.json.log"));
}

TEST_CASE("cli recalibrate consumes a perturbed dataset", "[cli]") {
  TempDir td;
  const fs::path a = td / "clean", b = td / "shifted";
  make_dataset(a, 2, 5);
  REQUIRE(run_cli("perturb --in " + q(a) + " --out " + q(b) +
                  " --translate 0,0.2,0 --seed 3")
              .exit_code == 0);

  // master_seed in the file loses to the --seed flag.
  write_text(td / "cfg.json",
             std::string(R"({"master_seed": 3, "search": )") + kQuickSearch +
                 "}");
  const fs::path report_path = td / "report.json";
  const auto r = run_cli("recalibrate --in " + q(b) + " --config " +
                         q(td / "cfg.json") + " --out " + q(report_path) +
                         " --seed 77");
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("frames: 2") != std::string::npos);

  const json report = read_json(report_path);
  CHECK(report.at("meta").at("seed").get<std::uint64_t>() == 77);
  CHECK(report.at("config").at("dataset_dir").get<std::string>() ==
        b.string());
  REQUIRE(report.at("rows").size() == 2);
  for (const json& row : report.at("rows")) {
    // Corruption provenance was picked up from the perturb manifest, and the
    // truth sidecar anchors the before-error at the known shift.
    CHECK(row.at("corruption").at("type").get<std::string>() ==
          "cloud_translation");
    CHECK(row.at("before").at("translation_error_cm").get<double>() ==
          Catch::Approx(20.0).margin(1e-6));
    CHECK(row.at("after").at("chamfer").get<double>() <=
          row.at("before").at("chamfer").get<double>() + 1e-12);
    CHECK(row.at("after").at("evaluations").get<long long>() > 0);
  }
  CHECK(report.at("summary").at("failed_frames").get<int>() == 0);
}

TEST_CASE("cli evaluate re-summarizes a report", "[cli]") {
  TempDir td;
  // A report written by hand: two finished rows, no failures.
  json report;
  report["schema"] = kReportSchema;
  report["meta"] = {{"seed", 9}};
  report["config"] = json::object();
  auto row = [](const char* id, double tb, double ta) {
    return json{{"frame_id", id},
                {"corruption", {{"type", "none"}}},
                {"before",
                 {{"translation_error_cm", tb},
                  {"rotation_error_deg", tb / 10.0},
                  {"chamfer", 1.0}}},
                {"after",
                 {{"translation_error_cm", ta},
                  {"rotation_error_deg", ta / 10.0},
                  {"chamfer", 0.5},
                  {"evaluations", 100}}}};
  };
  report["rows"] = json::array({row("000000", 10.0, 2.0),
                                row("000001", 20.0, 4.0)});
  report["failures"] = json::array();
  write_text(td / "report.json", report.dump(2));

  const fs::path s1 = td / "s1.json", s2 = td / "s2.json";
  const auto r = run_cli("evaluate --report " + q(td / "report.json") +
                         " --out " + q(s1));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("frames: 2") != std::string::npos);

  const json summary = read_json(s1);
  CHECK(summary.at("schema").get<int>() == kReportSchema);
  CHECK(summary.at("summary").at("frames").get<int>() == 2);
  CHECK(summary.at("summary")
            .at("translation_before_cm")
            .at("mean")
            .get<double>() == Catch::Approx(15.0).margin(1e-12));
  CHECK(summary.at("summary")
            .at("translation_after_cm")
            .at("median")
            .get<double>() == Catch::Approx(3.0).margin(1e-12));

  // Re-summarization is a fixed point: a second pass produces the same bytes.
  REQUIRE(run_cli("evaluate --report " + q(td / "report.json") + " --out " +
                  q(s2))
              .exit_code == 0);
  CHECK(testutil::files_equal(s1, s2));

  SECTION("a future schema is refused") {
    report["schema"] = 99;
    write_text(td / "future.json", report.dump(2));
    const auto bad = run_cli("evaluate --report " + q(td / "future.json"));
    CHECK(bad.exit_code == 3);
    CHECK(bad.err.find("unsupported_version") != std::string::npos);
  }

  SECTION("report and directory modes are mutually exclusive") {
    const auto both = run_cli("evaluate --report " + q(td / "report.json") +
                              " --dir-a " + q(td.path()));
    CHECK(both.exit_code == 2);
    const auto neither = run_cli("evaluate");
    CHECK(neither.exit_code == 2);
  }
}

TEST_CASE("cli evaluate compares calibration directories", "[cli]") {
  TempDir td;
  const fs::path a = td / "a";
  make_dataset(a, 2, 13);

  // A directory against itself: every pair at exactly zero error.
  const fs::path out = td / "cmp.json";
  const auto r = run_cli("evaluate --dir-a " + q(a) + " --dir-b " + q(a) +
                         " --out " + q(out));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);

  const json cmp = read_json(out);
  REQUIRE(cmp.at("pairs").size() == 2);
  for (const json& pair : cmp.at("pairs")) {
    CHECK(pair.at("translation_error_cm").get<double>() == 0.0);
    CHECK(pair.at("rotation_error_deg").get<double>() ==
          Catch::Approx(0.0).margin(1e-5));
  }
  CHECK(cmp.at("summary").at("frames").get<int>() == 2);
  CHECK(cmp.at("summary").at("translation_error_cm").at("mean").get<double>() ==
        0.0);

  // Frames without a partner on the other side are left out.
  const fs::path b = td / "b";
  fs::create_directories(b);
  fs::copy_file(a / "000000.calib.txt", b / "000000.calib.txt");
  const auto partial = run_cli("evaluate --dir-a " + q(a) + " --dir-b " + q(b) +
                               " --out " + q(out));
  REQUIRE(partial.exit_code == 0);
  CHECK(read_json(out).at("pairs").size() == 1);
}

TEST_CASE("cli rejects malformed invocations with typed errors", "[cli]") {
  TempDir td;

  SECTION("unparseable config JSON names the line") {
    write_text(td / "cfg.json", "{ nope\n");
    const auto r = run_cli("recalibrate --config " + q(td / "cfg.json"));
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("bad_config") != std::string::npos);
    CHECK(r.err.find("line 1") != std::string::npos);
  }

  SECTION("unknown flag") {
    const auto r = run_cli("synth --out " + q(td / "x") + " --bogus");
    CHECK(r.exit_code == 2);
  }

  SECTION("missing subcommand") {
    CHECK(run_cli("").exit_code == 2);
  }

  SECTION("missing input directory") {
    const auto r = run_cli("recalibrate --in " + q(td / "missing") +
                           " --out " + q(td / "r.json"));
    CHECK(r.exit_code == 3);
    CHECK(r.err.find("io_error") != std::string::npos);
  }

  SECTION("perturb wants exactly one corruption") {
    const std::string io = " --in " + q(td.path()) + " --out " + q(td / "o");
    CHECK(run_cli("perturb" + io + " --sigma 0.01 --translate 1,0,0")
              .exit_code == 2);
    CHECK(run_cli("perturb" + io).exit_code == 2);
  }
}

TEST_CASE("cli stderr chatter respects the log level", "[cli]") {
  TempDir td;
  const std::string args = "synth --out " + q(td / "f") + " --frames 1";

  const auto quiet = run_cli(args, "RECALIB_LOG=off");
  REQUIRE(quiet.exit_code == 0);
  CHECK(quiet.err.empty());

  const auto warn = run_cli(args, "RECALIB_LOG=warn");
  REQUIRE(warn.exit_code == 0);
  CHECK(warn.err.empty());

  const auto chatty = run_cli(args, "RECALIB_LOG=info");
  REQUIRE(chatty.exit_code == 0);
  CHECK(chatty.err.find("synth: wrote 1 frames") != std::string::npos);
}
