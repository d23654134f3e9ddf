#include "airtrack/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "airtrack/error.hpp"

namespace airtrack {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void ensure_parent(const std::filesystem::path& p) {
  const auto dir = p.parent_path();
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());
}

}  // namespace

PhantomData make_phantom(const PipelineConfig& cfg) {
  PhantomData d;
  d.tree = generate_tree(cfg.phantom_spec());
  d.clean = rasterize(d.tree, cfg.phantom_dims, cfg.phantom_spacing);
  d.corrupted = corrupt(d.clean, cfg.noise_sigma, cfg.occlusions, cfg.rng_seed);
  return d;
}

std::vector<Measurement> run_blobs(const Volume& vol, const PipelineConfig& cfg) { return detect_blobs(vol, cfg.blobs); }

TrackResult run_track(const Volume& vol, std::vector<Measurement> measurements, const PipelineConfig& cfg) {
  TrackResult r;
  r.branches = track_all(measurements, vol, cfg.tracker);
  for (const auto& b : r.branches) r.file.branches.push_back(to_record(b));
  r.file.config = config_to_json(cfg);
  return r;
}

void cmd_phantom(const PipelineConfig& cfg, const std::filesystem::path& prefix) {
  const PhantomData d = make_phantom(cfg);
  ensure_parent(prefix);
  save_volume(d.corrupted, prefix.string() + ".mhd");
  write_json_file(prefix.string() + ".truth.json", tree_to_json(d.tree));
}

void cmd_blobs(const std::filesystem::path& volume, const PipelineConfig& cfg, const std::filesystem::path& out) {
  const Volume vol = load_volume(volume);
  const auto ms = run_blobs(vol, cfg);
  ensure_parent(out);
  write_json_file(out, measurements_to_json(ms));
}

void cmd_track(const std::filesystem::path& volume, const std::filesystem::path& measurements, const PipelineConfig& cfg,
               const std::filesystem::path& out) {
  const Volume vol = load_volume(volume);
  auto ms = measurements_from_json(read_json_file(measurements));
  const TrackResult r = run_track(vol, std::move(ms), cfg);
  ensure_parent(out);
  write_json_file(out, branch_file_to_json(r.file));
}

CenterlineMetrics cmd_eval(const std::filesystem::path& branches, const std::filesystem::path& truth,
                           const PipelineConfig&, const std::filesystem::path& out) {
  const BranchFile f = branch_file_from_json(read_json_file(branches));
  const PhantomTree tree = tree_from_json(read_json_file(truth));
  const auto seg = f.accepted_points();
  const auto ref = tree.samples();
  if (seg.empty()) throw std::invalid_argument("eval: no accepted branch states (empty point set)");
  const CenterlineMetrics m = centerline_distance(seg, ref);
  ensure_parent(out);
  write_json_file(out, metrics_to_json(m));
  return m;
}

std::string format_table(const std::vector<MethodRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s | %10s | %10s | %10s | %12s\n", "Method", "d_FP (mm)", "d_FN (mm)",
                "d_err (mm)", "Std.Dev (mm)");
  out << line;
  out << std::string(10, '-') << "-+-" << std::string(10, '-') << "-+-" << std::string(10, '-') << "-+-"
      << std::string(10, '-') << "-+-" << std::string(12, '-') << '\n';
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-10s | %10.3f | %10.3f | %10.3f | %12s\n", r.method.c_str(), r.metrics.d_fp,
                  r.metrics.d_fn, r.metrics.d_err, "-");
    out << line;
  }
  return out.str();
}

PipelineReport cmd_pipeline(const PipelineConfig& cfg, const std::filesystem::path& workdir) {
  std::error_code ec;
  std::filesystem::create_directories(workdir, ec);
  if (ec) throw IoError("cannot create work directory " + workdir.string());

  PipelineReport report;
  const PhantomData phantom = make_phantom(cfg);
  save_volume(phantom.corrupted, workdir / "phantom.mhd");
  write_json_file(workdir / "phantom.truth.json", tree_to_json(phantom.tree));

  // Stages read back what the previous stage wrote, exactly as the subcommands do.
  const Volume vol = load_volume(workdir / "phantom.mhd");
  auto t0 = std::chrono::steady_clock::now();
  const auto ms = run_blobs(vol, cfg);
  report.blob_seconds = seconds_since(t0);
  report.measurements = ms.size();
  write_json_file(workdir / "measurements.json", measurements_to_json(ms));

  t0 = std::chrono::steady_clock::now();
  const TrackResult tracked = run_track(vol, measurements_from_json(read_json_file(workdir / "measurements.json")), cfg);
  report.track_seconds = seconds_since(t0);
  write_json_file(workdir / "branches.json", branch_file_to_json(tracked.file));

  const PhantomTree truth = tree_from_json(read_json_file(workdir / "phantom.truth.json"));
  const auto ref = truth.samples();
  report.branches_total = tracked.branches.size();
  for (const auto& b : tracked.branches) report.branches_accepted += b.accepted ? 1 : 0;
  report.recall_accepted = branch_recall(accepted_branches(tracked.branches), truth, cfg.recall_tol_mm);
  report.recall_all = branch_recall(tracked.branches, truth, cfg.recall_tol_mm);

  const auto rg_voxels = region_grow(vol, cfg.rg_threshold, truth.branches.front().points.front());
  const auto rg_points = voxel_centers(vol, rg_voxels);
  const auto rts_points = tracked.file.accepted_points();
  std::vector<Vec3> merged = rts_points;
  merged.insert(merged.end(), rg_points.begin(), rg_points.end());

  const CenterlineMetrics rg = centerline_distance(rg_points, ref);
  report.rows.push_back({"RG", rg});
  if (!rts_points.empty()) report.rows.push_back({"RTS", centerline_distance(rts_points, ref)});
  report.rows.push_back({"RTS+RG", centerline_distance(merged, ref)});

  if (!rts_points.empty()) write_json_file(workdir / "metrics.json", metrics_to_json(report.rows[1].metrics));
  write_json_file(workdir / "metrics_rg.json", metrics_to_json(rg));
  write_json_file(workdir / "metrics_rts_rg.json", metrics_to_json(report.rows.back().metrics));

  Json summary = Json::object();
  Json rows = Json::array();
  for (const auto& r : report.rows) rows.push_back({{"method", r.method}, {"metrics", metrics_to_json(r.metrics)}});
  summary["rows"] = rows;
  summary["branches_total"] = report.branches_total;
  summary["branches_accepted"] = report.branches_accepted;
  summary["measurements"] = report.measurements;
  summary["recall_accepted"] = quantize(report.recall_accepted);
  summary["recall_all"] = quantize(report.recall_all);
  write_json_file(workdir / "summary.json", summary);
  write_text_file(workdir / "summary.txt", format_table(report.rows));
  return report;
}

}  // namespace airtrack
