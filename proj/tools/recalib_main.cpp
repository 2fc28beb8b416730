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

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "recalib/recalib.hpp"

namespace fs = std::filesystem;
using namespace recalib;

namespace {

// ---------------------------------------------------------------------------
// Logging: RECALIB_LOG={debug,info,warn,error,off} controls stderr chatter.
// Timestamps never appear on stderr or in outputs; they live in the sidecar
// run log so outputs stay byte-reproducible.
// ---------------------------------------------------------------------------

enum class LogLevel { debug = 0, info, warn, error, off };

LogLevel log_threshold() {
  static const LogLevel level = [] {
    const char* env = std::getenv("RECALIB_LOG");
    const std::string v = env ? env : "warn";
    if (v == "debug") return LogLevel::debug;
    if (v == "info") return LogLevel::info;
    if (v == "warn") return LogLevel::warn;
    if (v == "error") return LogLevel::error;
    return LogLevel::off;
  }();
  return level;
}

void log_line(LogLevel level, const std::string& msg) {
  static const char* names[] = {"debug", "info", "warn", "error"};
  if (level < log_threshold() || level == LogLevel::off) return;
  std::cerr << "recalib [" << names[static_cast<int>(level)] << "] " << msg
            << "\n";
}

/// Append-only sidecar: wall-clock timestamps and durations are quarantined
/// here, never in manifests or reports.
class RunLog {
 public:
  explicit RunLog(const fs::path& path) : out_(path) {}

  void event(const std::string& what) {
    if (!out_.is_open()) return;
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::tm tm_buf{};
    gmtime_r(&tt, &tm_buf);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm_buf);
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  start_)
            .count();
    char line[64];
    std::snprintf(line, sizeof line, "%s +%.1fms ", stamp, elapsed);
    out_ << line << what << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

int default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

template <typename Fn>
void parallel_for(std::size_t total, int jobs, Fn&& fn) {
  if (jobs <= 1 || total <= 1) {
    for (std::size_t i = 0; i < total; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers =
      std::min(static_cast<std::size_t>(jobs), total);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1))
        fn(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return buf;
}

/// Sorted frame ids: filenames in `dir` ending in `suffix`, suffix stripped.
std::vector<std::string> discover_frames(const fs::path& dir,
                                         const std::string& suffix) {
  if (!fs::is_directory(dir))
    throw Error(ErrorCode::io_error, "not a directory: " + dir.string());
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

nlohmann::json load_json_file(const fs::path& path, ErrorCode on_parse_error) {
  const std::string text = read_file_text(path.string());
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t stop = std::min(text.size(), e.byte);
    for (std::size_t i = 0; i < stop; ++i)
      if (text[i] == '\n') ++line;
    throw Error(on_parse_error, path.string() + ": line " +
                                    std::to_string(line) + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
  write_file_text(path.string(), j.dump(2) + "\n");
}

std::string pretty_agg(const Aggregate& a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%10.4f %10.4f %10.4f", a.mean, a.median,
                a.p95);
  return buf;
}

void print_summary_table(const SweepSummary& s, std::ostream& os) {
  os << "frames: " << s.rows.size() << "  failed: " << s.failures.size()
     << "\n";
  os << "metric                        mean     median        p95\n";
  os << "translation_before_cm  " << pretty_agg(s.translation_before_cm) << "\n";
  os << "translation_after_cm   " << pretty_agg(s.translation_after_cm) << "\n";
  os << "rotation_before_deg    " << pretty_agg(s.rotation_before_deg) << "\n";
  os << "rotation_after_deg     " << pretty_agg(s.rotation_after_deg) << "\n";
  os << "objective_reduction    " << pretty_agg(s.objective_reduction) << "\n";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOptions {
  std::string spec_path;
  std::string out_dir;
  long long frames = -1;        // -1: take from file / default
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool dry_run = false;
};

int cmd_synth(const SynthOptions& opt) {
  long long frames = 3;
  std::uint64_t master_seed = 0;
  SceneRandomization scene;
  if (!opt.spec_path.empty()) {
    const nlohmann::json spec =
        load_json_file(opt.spec_path, ErrorCode::bad_config);
    frames = spec.value("frames", frames);
    master_seed = spec.value("master_seed", master_seed);
    if (spec.contains("scene")) scene = spec.at("scene").get<SceneRandomization>();
  }
  if (opt.frames >= 0) frames = opt.frames;
  if (opt.seed_given) master_seed = opt.seed;
  if (frames < 0) throw Error(ErrorCode::bad_config, "frame count < 0");

  nlohmann::ordered_json config;
  config["frames"] = frames;
  config["master_seed"] = master_seed;
  config["scene"] = scene_randomization_json(scene);

  if (opt.dry_run) {
    std::cout << config.dump(2) << "\n";
    return 0;
  }

  const fs::path out = opt.out_dir;
  fs::create_directories(out);
  RunLog log(out / "run.log");
  log.event("synth start");

  nlohmann::ordered_json manifest;
  manifest["schema"] = kReportSchema;
  manifest["command"] = "synth";
  manifest["config"] = config;
  manifest["frames"] = nlohmann::ordered_json::array();

  for (long long i = 0; i < frames; ++i) {
    const std::string id = frame_name(static_cast<std::size_t>(i));
    const SceneSpec spec = random_scene_spec(
        SplitMix64::derive(master_seed, static_cast<std::uint64_t>(i)), scene);
    const CalibrationSet calib = make_pinhole_calib(
        spec.image_width, spec.image_height, scene.focal_length);
    const SyntheticScene sc = synth_scene(spec, calib);
    write_file_bytes((out / (id + ".bin")).string(), write_cloud_bin(sc.cloud));
    write_file_bytes((out / (id + ".label")).string(),
                     write_labels(sc.cloud.labels));
    write_file_bytes((out / (id + ".pgm")).string(), write_mask_pgm(sc.mask));
    write_file_text((out / (id + ".calib.txt")).string(),
                    serialize_kitti_calibration(calib));
    manifest["frames"].push_back(id);
    log.event("frame " + id + " written");
  }
  write_json_file(out / "manifest.json", manifest);
  log.event("synth done");
  log_line(LogLevel::info,
           "synth: wrote " + std::to_string(frames) + " frames to " +
               out.string());
  return 0;
}

// ---------------------------------------------------------------------------
// perturb
// ---------------------------------------------------------------------------

struct PerturbOptions {
  std::string in_dir;
  std::string out_dir;
  std::optional<double> sigma;
  std::vector<double> translate;  // empty or size 3
  std::uint64_t seed = 0;
  bool dry_run = false;
};

int cmd_perturb(const PerturbOptions& opt) {
  if (opt.sigma.has_value() == !opt.translate.empty())
    throw Error(ErrorCode::bad_config,
                "exactly one of --sigma and --translate is required");
  if (opt.sigma && *opt.sigma < 0)
    throw Error(ErrorCode::bad_range, "sigma must be >= 0");

  nlohmann::ordered_json config;
  config["master_seed"] = opt.seed;
  if (opt.sigma) {
    config["corruption"] = {{"type", "gaussian_noise"}, {"sigma", *opt.sigma}};
  } else {
    config["corruption"] = {{"type", "cloud_translation"},
                            {"translation", opt.translate}};
  }
  if (opt.dry_run) {
    std::cout << config.dump(2) << "\n";
    return 0;
  }

  const fs::path in = opt.in_dir;
  const fs::path out = opt.out_dir;
  fs::create_directories(out);
  RunLog log(out / "run.log");
  log.event("perturb start");

  nlohmann::ordered_json manifest;
  manifest["schema"] = kReportSchema;
  manifest["command"] = "perturb";
  manifest["config"] = config;
  manifest["frames"] = nlohmann::ordered_json::array();

  const std::vector<std::string> ids = discover_frames(in, ".bin");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string& id = ids[i];
    const std::uint64_t frame_seed = SplitMix64::derive(opt.seed, i);
    const std::string calib_text =
        read_file_text((in / (id + ".calib.txt")).string());
    const CalibrationSet calib = parse_kitti_calibration(calib_text);
    const std::vector<std::uint8_t> cloud_bytes =
        read_file_bytes((in / (id + ".bin")).string());

    CorruptionManifest entry;
    entry.frame_id = id;
    entry.seed = frame_seed;
    if (opt.sigma) {
      entry.corruption_type = "gaussian_noise";
      entry.sigma = *opt.sigma;
      const CorruptedCalib noisy =
          gaussian_noise_calib(calib, {*opt.sigma, frame_seed});
      entry.true_bias = noisy.true_bias;
      write_file_bytes((out / (id + ".bin")).string(), cloud_bytes);
      write_file_text((out / (id + ".calib.txt")).string(),
                      serialize_kitti_calibration(noisy.calib));
      write_file_text((out / (id + ".calib_truth.txt")).string(), calib_text);
    } else {
      entry.corruption_type = "cloud_translation";
      entry.shift = {opt.translate[0], opt.translate[1], opt.translate[2]};
      const TranslatedScene shifted = translate_cloud_with_label(
          read_cloud_bin(cloud_bytes), calib, entry.shift);
      entry.true_bias = BiasSpec::additive(shifted.calib.v2c - calib.v2c);
      write_file_bytes((out / (id + ".bin")).string(),
                       write_cloud_bin(shifted.cloud));
      write_file_text((out / (id + ".calib.txt")).string(), calib_text);
      write_file_text((out / (id + ".calib_truth.txt")).string(),
                      serialize_kitti_calibration(shifted.calib));
    }
    for (const char* suffix : {".label", ".pgm"}) {
      const fs::path src = in / (id + suffix);
      if (fs::exists(src))
        write_file_bytes((out / (id + suffix)).string(),
                         read_file_bytes(src.string()));
    }
    nlohmann::json entry_json;
    to_json(entry_json, entry);
    manifest["frames"].push_back(nlohmann::ordered_json(entry_json));
    log.event("frame " + id + " perturbed");
  }
  write_json_file(out / "manifest.json", manifest);
  log.event("perturb done");
  return 0;
}

// ---------------------------------------------------------------------------
// export-features
// ---------------------------------------------------------------------------

struct ExportOptions {
  std::string in_dir;
  std::string out_dir;
  std::vector<std::uint32_t> classes = {1};
  bool verify = false;
  bool dry_run = false;
};

int cmd_export_features(const ExportOptions& opt) {
  if (opt.classes.empty())
    throw Error(ErrorCode::bad_config, "no interested classes given");

  nlohmann::ordered_json config;
  config["classes"] = opt.classes;
  config["verify"] = opt.verify;
  if (opt.dry_run) {
    std::cout << config.dump(2) << "\n";
    return 0;
  }

  const fs::path in = opt.in_dir;
  const fs::path out = opt.out_dir;
  fs::create_directories(out);
  RunLog log(out / "run.log");
  log.event("export-features start");

  nlohmann::ordered_json manifest;
  manifest["schema"] = kReportSchema;
  manifest["command"] = "export-features";
  manifest["config"] = config;
  manifest["frames"] = nlohmann::ordered_json::array();
  manifest["skipped"] = nlohmann::ordered_json::array();

  auto write_verified = [&](const fs::path& path, const Tensor& tensor) {
    const std::vector<std::uint8_t> bytes = export_tensor(tensor);
    write_file_bytes(path.string(), bytes);
    if (!opt.verify) return;
    const std::vector<std::uint8_t> reread = read_file_bytes(path.string());
    if (export_tensor(import_tensor(reread)) != bytes)
      throw Error(ErrorCode::internal,
                  "verification mismatch for " + path.string());
  };

  for (const std::string& id : discover_frames(in, ".bin")) {
    try {
      const LabeledCloud cloud = [&] {
        LabeledCloud c =
            read_cloud_bin(read_file_bytes((in / (id + ".bin")).string()));
        c.labels = read_labels(
            read_file_bytes((in / (id + ".label")).string()), c.points.size());
        return c;
      }();
      const CalibrationSet calib = parse_kitti_calibration(
          read_file_text((in / (id + ".calib.txt")).string()));
      const SegMask mask =
          read_mask_pgm(read_file_bytes((in / (id + ".pgm")).string()));

      const ProjectedSet projected = project_labeled(cloud, calib, opt.classes);
      write_verified(out / alignment_feature_filename(id),
                     to_tensor(make_alignment_feature(projected, mask)));
      write_verified(out / calibration_feature_filename(id),
                     to_tensor(make_calibration_feature(cloud, projected,
                                                        mask.width, mask.height)));
      manifest["frames"].push_back(id);
      log.event("frame " + id + " exported");
    } catch (const Error& e) {
      manifest["skipped"].push_back({{"frame_id", id},
                                     {"code", error_code_name(e.code())},
                                     {"message", e.what()}});
      log.event("frame " + id + " skipped: " + e.what());
    }
  }
  write_json_file(out / "manifest.json", manifest);
  log.event("export-features done");
  return 0;
}

// ---------------------------------------------------------------------------
// recalibrate
// ---------------------------------------------------------------------------

struct RecalibrateOptions {
  std::string in_dir;
  std::string config_path;
  std::string out_path = "report.json";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::vector<std::uint32_t> classes;
  int jobs = 0;  // 0: default
  bool jobs_given = false;
  bool dry_run = false;
};

int cmd_recalibrate(const RecalibrateOptions& opt) {
  std::string dataset_dir;
  bool has_synth = false;
  SweepConfig sweep;
  std::vector<std::uint32_t> interested = {1};
  SearchConfig search;
  std::uint64_t master_seed = 0;
  int jobs = default_jobs();

  if (!opt.config_path.empty()) {
    const nlohmann::json cfg =
        load_json_file(opt.config_path, ErrorCode::bad_config);
    dataset_dir = cfg.value("dataset_dir", std::string());
    if (cfg.contains("synthetic")) {
      has_synth = true;
      const nlohmann::json& s = cfg.at("synthetic");
      sweep.corruptions = s.value("corruptions", std::vector<CorruptionSpec>{});
      sweep.frames_per_level = s.value("frames_per_level", 10);
      if (s.contains("scene"))
        sweep.randomization = s.at("scene").get<SceneRandomization>();
    }
    interested = cfg.value("interested", interested);
    if (cfg.contains("search")) search = cfg.at("search").get<SearchConfig>();
    master_seed = cfg.value("master_seed", master_seed);
    jobs = cfg.value("jobs", jobs);
  }
  // Flags outrank the file.
  if (!opt.in_dir.empty()) {
    dataset_dir = opt.in_dir;
    has_synth = false;
  }
  if (opt.seed_given) master_seed = opt.seed;
  if (!opt.classes.empty()) interested = opt.classes;
  if (opt.jobs_given) jobs = opt.jobs;
  if (jobs < 1) throw Error(ErrorCode::bad_config, "jobs must be >= 1");

  if (dataset_dir.empty() == !has_synth)
    throw Error(ErrorCode::bad_config,
                "exactly one input source is required: a dataset directory "
                "(--in / dataset_dir) or a synthetic block in the config");

  // Resolved provenance echo. Deliberately excludes jobs: the report must
  // not depend on how many workers ran it.
  nlohmann::ordered_json config;
  if (has_synth) {
    sweep.master_seed = master_seed;
    sweep.interested = interested;
    sweep.search = search;
    sweep.jobs = jobs;
    config = sweep_config_json(sweep);
  } else {
    config["dataset_dir"] = dataset_dir;
    config["master_seed"] = master_seed;
    config["interested"] = interested;
    nlohmann::json sj;
    to_json(sj, search);
    config["search"] = sj;
  }

  if (opt.dry_run) {
    std::cout << config.dump(2) << "\n";
    return 0;
  }

  const fs::path out_path = opt.out_path;
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  RunLog log(out_path.string() + ".log");
  log.event("recalibrate start");

  SweepSummary summary;
  if (has_synth) {
    summary = run_sweep(sweep);
    log.event("synthetic sweep done: " + std::to_string(summary.rows.size()) +
              " frames");
  } else {
    const fs::path in = dataset_dir;
    const std::vector<std::string> ids = discover_frames(in, ".bin");

    // Corruption provenance, if the directory was written by `perturb`.
    std::map<std::string, nlohmann::ordered_json> corruption_by_frame;
    if (fs::exists(in / "manifest.json")) {
      const nlohmann::json manifest =
          load_json_file(in / "manifest.json", ErrorCode::bad_header);
      for (const auto& f : manifest.value("frames", nlohmann::json::array())) {
        if (!f.is_object() || !f.contains("frame_id")) continue;
        nlohmann::ordered_json c;
        c["type"] = f.value("corruption_type", "unknown");
        if (f.contains("sigma")) c["sigma"] = f.at("sigma");
        if (f.contains("translation")) c["translation"] = f.at("translation");
        corruption_by_frame[f.at("frame_id").get<std::string>()] = c;
      }
    }

    struct Cell {
      std::optional<SweepRow> row;
      std::optional<SweepFailure> failure;
      double wall_ms = 0.0;
    };
    std::vector<Cell> cells(ids.size());

    parallel_for(ids.size(), jobs, [&](std::size_t i) {
      const std::string& id = ids[i];
      Cell& cell = cells[i];
      try {
        LabeledCloud cloud =
            read_cloud_bin(read_file_bytes((in / (id + ".bin")).string()));
        cloud.labels = read_labels(
            read_file_bytes((in / (id + ".label")).string()),
            cloud.points.size());
        const SegMask mask =
            read_mask_pgm(read_file_bytes((in / (id + ".pgm")).string()));
        const CalibrationSet calib_in = parse_kitti_calibration(
            read_file_text((in / (id + ".calib.txt")).string()));
        const fs::path truth_path = in / (id + ".calib_truth.txt");
        const CalibrationSet truth =
            fs::exists(truth_path)
                ? parse_kitti_calibration(read_file_text(truth_path.string()))
                : calib_in;

        SearchConfig frame_search = search;
        frame_search.rng_seed = SplitMix64::derive(master_seed, i);
        const RecalibResult fit =
            recalibrate(cloud, mask, calib_in, interested, frame_search);

        SweepRow row;
        row.frame_id = id;
        auto it = corruption_by_frame.find(id);
        row.corruption = it == corruption_by_frame.end()
                             ? nlohmann::ordered_json{{"type", "none"}}
                             : it->second;
        row.before = calib_error(calib_in, truth);
        row.after = calib_error(apply_bias(calib_in, fit.bias), truth);
        row.chamfer_before = fit.objective_initial;
        row.chamfer_after = fit.objective_final;
        row.evaluations = fit.evaluations;
        cell.row = std::move(row);
        cell.wall_ms = fit.wall_time_ms;
      } catch (const Error& e) {
        cell.failure = SweepFailure{id, error_code_name(e.code()), e.what()};
      }
    });

    std::vector<SweepRow> rows;
    std::vector<SweepFailure> failures;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].failure) failures.push_back(std::move(*cells[i].failure));
      if (cells[i].row) {
        char msg[96];
        std::snprintf(msg, sizeof msg, "frame %s fit in %.1fms",
                      ids[i].c_str(), cells[i].wall_ms);
        log.event(msg);
        rows.push_back(std::move(*cells[i].row));
      }
    }
    summary = summarize_rows(std::move(rows), std::move(failures));
  }

  write_json_file(out_path, build_report(master_seed, config, summary));
  log.event("report written");
  print_summary_table(summary, std::cout);
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOptions {
  std::string report_path;
  std::string dir_a;
  std::string dir_b;
  std::string out_path;
};

int cmd_evaluate(const EvaluateOptions& opt) {
  const bool by_report = !opt.report_path.empty();
  const bool by_dirs = !opt.dir_a.empty() || !opt.dir_b.empty();
  if (by_report == by_dirs)
    throw Error(ErrorCode::bad_config,
                "pass either --report or both --dir-a and --dir-b");

  if (by_report) {
    const nlohmann::json report =
        load_json_file(opt.report_path, ErrorCode::bad_header);
    if (report.value("schema", -1) != kReportSchema)
      throw Error(ErrorCode::unsupported_version,
                  "unsupported report schema in " + opt.report_path);

    std::vector<SweepRow> rows;
    for (const auto& r : report.value("rows", nlohmann::json::array())) {
      SweepRow row;
      row.frame_id = r.at("frame_id").get<std::string>();
      row.corruption = r.value("corruption", nlohmann::json::object());
      row.before.translation_error_cm =
          r.at("before").at("translation_error_cm").get<double>();
      row.before.rotation_error_deg =
          r.at("before").at("rotation_error_deg").get<double>();
      row.chamfer_before = r.at("before").at("chamfer").get<double>();
      row.after.translation_error_cm =
          r.at("after").at("translation_error_cm").get<double>();
      row.after.rotation_error_deg =
          r.at("after").at("rotation_error_deg").get<double>();
      row.chamfer_after = r.at("after").at("chamfer").get<double>();
      row.evaluations = r.at("after").value("evaluations", 0ll);
      rows.push_back(std::move(row));
    }
    std::vector<SweepFailure> failures;
    for (const auto& f : report.value("failures", nlohmann::json::array()))
      failures.push_back(SweepFailure{f.value("frame_id", ""),
                                      f.value("code", ""),
                                      f.value("message", "")});

    const SweepSummary summary = summarize_rows(std::move(rows), std::move(failures));
    print_summary_table(summary, std::cout);
    if (!opt.out_path.empty()) {
      const nlohmann::ordered_json full = build_report(
          report.value("meta", nlohmann::json::object()).value("seed", 0ull),
          report.value("config", nlohmann::ordered_json::object()), summary);
      nlohmann::ordered_json out;
      out["schema"] = kReportSchema;
      out["summary"] = full["summary"];
      write_json_file(opt.out_path, out);
    }
    return 0;
  }

  if (opt.dir_a.empty() || opt.dir_b.empty())
    throw Error(ErrorCode::bad_config, "both --dir-a and --dir-b are required");
  const fs::path a = opt.dir_a, b = opt.dir_b;
  const std::vector<std::string> ids_a = discover_frames(a, ".calib.txt");
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  std::vector<double> terr, rerr;
  for (const std::string& id : ids_a) {
    const fs::path pb = b / (id + ".calib.txt");
    if (!fs::exists(pb)) continue;
    const CalibError e = calib_error(
        parse_kitti_calibration(read_file_text((a / (id + ".calib.txt")).string())),
        parse_kitti_calibration(read_file_text(pb.string())));
    terr.push_back(e.translation_error_cm);
    rerr.push_back(e.rotation_error_deg);
    pairs.push_back({{"frame_id", id},
                     {"translation_error_cm", e.translation_error_cm},
                     {"rotation_error_deg", e.rotation_error_deg}});
  }
  nlohmann::ordered_json out;
  out["schema"] = kReportSchema;
  out["pairs"] = pairs;
  const Aggregate ta = detail::aggregate(terr);
  const Aggregate ra = detail::aggregate(rerr);
  out["summary"] = {
      {"frames", pairs.size()},
      {"translation_error_cm",
       {{"mean", ta.mean}, {"median", ta.median}, {"p95", ta.p95}}},
      {"rotation_error_deg",
       {{"mean", ra.mean}, {"median", ra.median}, {"p95", ra.p95}}}};
  std::printf("frames: %zu\n", pairs.size());
  std::printf("translation_error_cm   %s\n", pretty_agg(ta).c_str());
  std::printf("rotation_error_deg     %s\n", pretty_agg(ra).c_str());
  if (!opt.out_path.empty()) write_json_file(opt.out_path, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR-camera extrinsic re-calibration toolkit"};
  app.require_subcommand(1);

  SynthOptions synth;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "Generate synthetic labeled frames");
  synth_cmd->add_option("--spec", synth.spec_path, "Scene spec JSON");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--frames", synth.frames, "Frame count override");
  CLI::Option* synth_seed =
      synth_cmd->add_option("--seed", synth.seed, "Master seed override");
  synth_cmd->add_flag("--dry-run", synth.dry_run,
                      "Print the resolved config and exit");

  PerturbOptions perturb;
  CLI::App* perturb_cmd =
      app.add_subcommand("perturb", "Corrupt calibration or clouds");
  perturb_cmd->add_option("--in", perturb.in_dir, "Input frame directory")
      ->required();
  perturb_cmd->add_option("--out", perturb.out_dir, "Output directory")
      ->required();
  double sigma_value = 0.0;
  CLI::Option* sigma_opt = perturb_cmd->add_option(
      "--sigma", sigma_value, "Gaussian noise level on the extrinsic");
  perturb_cmd
      ->add_option("--translate", perturb.translate,
                   "Cloud translation a,b,c in meters")
      ->delimiter(',')
      ->expected(3);
  perturb_cmd->add_option("--seed", perturb.seed, "Master seed");
  perturb_cmd->add_flag("--dry-run", perturb.dry_run,
                        "Print the resolved config and exit");

  ExportOptions exp;
  CLI::App* export_cmd = app.add_subcommand(
      "export-features", "Write alignment and calibration tensors");
  export_cmd->add_option("--in", exp.in_dir, "Input frame directory")
      ->required();
  export_cmd->add_option("--out", exp.out_dir, "Output directory")->required();
  export_cmd->add_option("--classes", exp.classes, "Interested class ids")
      ->delimiter(',');
  export_cmd->add_flag("--verify", exp.verify,
                       "Re-read and re-encode each tensor after writing");
  export_cmd->add_flag("--dry-run", exp.dry_run,
                       "Print the resolved config and exit");

  RecalibrateOptions recal;
  CLI::App* recal_cmd =
      app.add_subcommand("recalibrate", "Estimate and score extrinsic bias");
  recal_cmd->add_option("--in", recal.in_dir, "Dataset directory");
  recal_cmd->add_option("--config", recal.config_path, "Run config JSON");
  recal_cmd->add_option("--out", recal.out_path, "Report path");
  CLI::Option* recal_seed =
      recal_cmd->add_option("--seed", recal.seed, "Master seed override");
  recal_cmd->add_option("--classes", recal.classes, "Interested class ids")
      ->delimiter(',');
  CLI::Option* recal_jobs =
      recal_cmd->add_option("--jobs", recal.jobs, "Worker threads");
  recal_cmd->add_flag("--dry-run", recal.dry_run,
                      "Print the resolved config and exit");

  EvaluateOptions eval;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Summarize a report or compare calib dirs");
  eval_cmd->add_option("--report", eval.report_path, "Existing report JSON");
  eval_cmd->add_option("--dir-a", eval.dir_a, "First calibration directory");
  eval_cmd->add_option("--dir-b", eval.dir_b, "Second calibration directory");
  eval_cmd->add_option("--out", eval.out_path, "Summary JSON path");

  try {
    app.parse(argc, argv);
    if (synth_cmd->parsed()) {
      synth.seed_given = synth_seed->count() > 0;
      return cmd_synth(synth);
    }
    if (perturb_cmd->parsed()) {
      if (sigma_opt->count() > 0) perturb.sigma = sigma_value;
      return cmd_perturb(perturb);
    }
    if (export_cmd->parsed()) return cmd_export_features(exp);
    if (recal_cmd->parsed()) {
      recal.seed_given = recal_seed->count() > 0;
      recal.jobs_given = recal_jobs->count() > 0;
      return cmd_recalibrate(recal);
    }
    if (eval_cmd->parsed()) return cmd_evaluate(eval);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const Error& e) {
    log_line(LogLevel::error, e.what());
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what()
              << "\n";
    switch (e.code()) {
      case ErrorCode::bad_config:
      case ErrorCode::bad_range:
      case ErrorCode::bad_grid:
        return 2;
      case ErrorCode::internal:
        return 4;
      default:
        return 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}
