#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "airtrack/blobs.hpp"
#include "airtrack/evaluation.hpp"
#include "airtrack/phantom.hpp"
#include "airtrack/tracker.hpp"

namespace airtrack {

using Json = nlohmann::ordered_json;

/// Rounds to 9 significant digits; the shortest round-trip form of the result is what
/// ends up in JSON output.
double quantize(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed (2-space indent) with a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& doc);

// Measurements: [{"pos": [x, y, z], "r": .., "scale": .., "response": ..}, ...]
Json measurements_to_json(const std::vector<Measurement>& ms);
std::vector<Measurement> measurements_from_json(const Json& doc);

/// One branch state as written to the branch file.
struct BranchStateRecord {
  Vec3 pos = Vec3::Zero();
  double r = 0.0;
  Vec3 dir = Vec3::Zero();  // unit direction
  double trace_filtered = 0.0;
  double trace_smoothed = 0.0;

  friend bool operator==(const BranchStateRecord&, const BranchStateRecord&) = default;
};

struct BranchRecord {
  long long seed = 0;
  bool accepted = false;
  double mu = 0.0;
  std::vector<BranchStateRecord> states;

  friend bool operator==(const BranchRecord&, const BranchRecord&) = default;
  std::vector<Vec3> positions() const;
};

struct BranchFile {
  std::vector<BranchRecord> branches;
  Json config = Json::object();

  friend bool operator==(const BranchFile&, const BranchFile&) = default;
  /// State positions of accepted branches.
  std::vector<Vec3> accepted_points() const;
  /// State positions of every branch.
  std::vector<Vec3> all_points() const;
};

/// Quantized file view of a tracked branch (smoothed positions/radii/directions).
BranchRecord to_record(const Branch& b);
Json branch_file_to_json(const BranchFile& f);
BranchFile branch_file_from_json(const Json& doc);

// Truth tree: {"branches": [{"points": [[x, y, z], ...], "radii": [...], "parent": int}]}
Json tree_to_json(const PhantomTree& tree);
PhantomTree tree_from_json(const Json& doc);

// Metrics: {"d_fp": .., "d_fn": .., "d_err": ..}
Json metrics_to_json(const CenterlineMetrics& m);
CenterlineMetrics metrics_from_json(const Json& doc);

}  // namespace airtrack
