#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "airtrack/config.hpp"
#include "airtrack/evaluation.hpp"
#include "airtrack/io.hpp"

namespace airtrack {

struct PhantomData {
  PhantomTree tree;
  Volume clean;      // rasterized
  Volume corrupted;  // after noise and occlusions
};

PhantomData make_phantom(const PipelineConfig& cfg);

/// Blob detection with the configured blob settings.
std::vector<Measurement> run_blobs(const Volume& vol, const PipelineConfig& cfg);

/// Tracking and validation; the returned file carries the resolved config.
struct TrackResult {
  std::vector<Branch> branches;
  BranchFile file;
};
TrackResult run_track(const Volume& vol, std::vector<Measurement> measurements, const PipelineConfig& cfg);

// File-level subcommands.
void cmd_phantom(const PipelineConfig& cfg, const std::filesystem::path& prefix);
void cmd_blobs(const std::filesystem::path& volume, const PipelineConfig& cfg, const std::filesystem::path& out);
void cmd_track(const std::filesystem::path& volume, const std::filesystem::path& measurements, const PipelineConfig& cfg,
               const std::filesystem::path& out);
/// d_FP/d_FN/d_err of the accepted branch states against the truth samples.
CenterlineMetrics cmd_eval(const std::filesystem::path& branches, const std::filesystem::path& truth,
                           const PipelineConfig& cfg, const std::filesystem::path& out);

struct MethodRow {
  std::string method;
  CenterlineMetrics metrics;
};

struct PipelineReport {
  std::vector<MethodRow> rows;  // RG, RTS, RTS+RG
  double recall_accepted = 0.0;
  double recall_all = 0.0;
  std::size_t branches_total = 0;
  std::size_t branches_accepted = 0;
  std::size_t measurements = 0;
  double blob_seconds = 0.0;
  double track_seconds = 0.0;
};

/// phantom -> blobs -> track -> eval, plus the region-growing baseline and the merged
/// RTS+RG point set. Writes every artifact into `workdir`.
PipelineReport cmd_pipeline(const PipelineConfig& cfg, const std::filesystem::path& workdir);

/// Aligned Method / d_FP / d_FN / d_err / Std.Dev table.
std::string format_table(const std::vector<MethodRow>& rows);

}  // namespace airtrack
