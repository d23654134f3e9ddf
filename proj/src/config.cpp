#include "airtrack/config.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include "airtrack/error.hpp"

namespace airtrack {

namespace {

double number(const Json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key + ": expected a number");
  return v.get<double>();
}

long long integer(const Json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key + ": expected an integer");
  return v.get<long long>();
}

bool boolean(const Json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError(key + ": expected true or false");
  return v.get<bool>();
}

std::string string(const Json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key + ": expected a quoted string");
  return v.get<std::string>();
}

std::vector<double> numbers(const Json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(number(e, key));
  return out;
}

Vec3 triple(const Json& v, const std::string& key) {
  const auto n = numbers(v, key);
  if (n.size() != 3) throw ConfigError(key + ": expected 3 numbers");
  return {n[0], n[1], n[2]};
}

Json triple_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

std::string polarity_name(Polarity p) {
  switch (p) {
    case Polarity::Bright: return "bright";
    case Polarity::Dark: return "dark";
    case Polarity::Both: return "both";
  }
  return "bright";
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  auto add = [&](std::string name, std::string unit, std::string help, auto get, auto set) {
    k.push_back({std::move(name), std::move(unit), std::move(help), get, set});
  };

  add("rng_seed", "-", "seed for every random draw (phantom geometry, noise)",
      [](const PipelineConfig& c) { return Json(c.rng_seed); },
      [](PipelineConfig& c, const Json& v) {
        const auto s = integer(v, "rng_seed");
        if (s < 0) throw ConfigError("rng_seed: must be >= 0");
        c.rng_seed = static_cast<std::uint64_t>(s);
      });

  // Blob detection
  add("scales", "mm", "blob detection scales (strictly ascending)",
      [](const PipelineConfig& c) { return Json(c.blobs.scales); },
      [](PipelineConfig& c, const Json& v) { c.blobs.scales = numbers(v, "scales"); });
  add("response_threshold", "-", "minimum |scale-normalized LoG| of a blob",
      [](const PipelineConfig& c) { return Json(c.blobs.response_threshold); },
      [](PipelineConfig& c, const Json& v) { c.blobs.response_threshold = number(v, "response_threshold"); });
  add("polarity", "-", "\"bright\", \"dark\" or \"both\"",
      [](const PipelineConfig& c) { return Json(polarity_name(c.blobs.polarity)); },
      [](PipelineConfig& c, const Json& v) {
        const auto s = string(v, "polarity");
        if (s == "bright") c.blobs.polarity = Polarity::Bright;
        else if (s == "dark") c.blobs.polarity = Polarity::Dark;
        else if (s == "both") c.blobs.polarity = Polarity::Both;
        else throw ConfigError("polarity: expected bright, dark or both");
      });

  // State-space models
  add("delta", "mm", "tracking step size",
      [](const PipelineConfig& c) { return Json(c.tracker.delta); },
      [](PipelineConfig& c, const Json& v) { c.tracker.delta = number(v, "delta"); });
  add("sigma_q", "-", "process noise standard deviation (radius and direction)",
      [](const PipelineConfig& c) { return Json(c.tracker.sigma_q); },
      [](PipelineConfig& c, const Json& v) { c.tracker.sigma_q = number(v, "sigma_q"); });
  add("sigma_m_pos", "mm", "measurement noise standard deviation on position",
      [](const PipelineConfig& c) { return Json(c.tracker.sigma_m_pos); },
      [](PipelineConfig& c, const Json& v) { c.tracker.sigma_m_pos = number(v, "sigma_m_pos"); });
  add("sigma_m_r", "mm", "measurement noise standard deviation on radius",
      [](const PipelineConfig& c) { return Json(c.tracker.sigma_m_r); },
      [](PipelineConfig& c, const Json& v) { c.tracker.sigma_m_r = number(v, "sigma_m_r"); });
  add("p0_scale", "-", "seed covariance P0 = p0_scale * I",
      [](const PipelineConfig& c) { return Json(c.tracker.p0_scale); },
      [](PipelineConfig& c, const Json& v) { c.tracker.p0_scale = number(v, "p0_scale"); });
  add("renormalize_direction", "-", "rescale the direction estimate to unit length after updates",
      [](const PipelineConfig& c) { return Json(c.tracker.renormalize_direction); },
      [](PipelineConfig& c, const Json& v) { c.tracker.renormalize_direction = boolean(v, "renormalize_direction"); });

  // Gating
  add("kappa", "-", "rectangular gate coefficient (>= 3)",
      [](const PipelineConfig& c) { return Json(c.tracker.kappa); },
      [](PipelineConfig& c, const Json& v) { c.tracker.kappa = number(v, "kappa"); });
  add("P_g", "-", "gate probability; G = -2 ln(1 - P_g)",
      [](const PipelineConfig& c) { return Json(c.tracker.P_g); },
      [](PipelineConfig& c, const Json& v) { c.tracker.P_g = number(v, "P_g"); });
  add("rect_gate_use_stddev", "-", "rectangular gate on kappa*sqrt(diag S) instead of kappa*diag S",
      [](const PipelineConfig& c) { return Json(c.tracker.rect_gate_use_stddev); },
      [](PipelineConfig& c, const Json& v) { c.tracker.rect_gate_use_stddev = boolean(v, "rect_gate_use_stddev"); });

  // Branches
  add("mu_c", "mm^2", "branch validation cutoff on the mean covariance trace",
      [](const PipelineConfig& c) { return Json(c.tracker.mu_c); },
      [](PipelineConfig& c, const Json& v) { c.tracker.mu_c = number(v, "mu_c"); });
  add("min_branch_length", "steps", "shortest branch that can be accepted",
      [](const PipelineConfig& c) { return Json(c.tracker.min_branch_length); },
      [](PipelineConfig& c, const Json& v) { c.tracker.min_branch_length = static_cast<int>(integer(v, "min_branch_length")); });
  add("max_branch_length", "steps", "tracking stops after this many states per direction",
      [](const PipelineConfig& c) { return Json(c.tracker.max_branch_length); },
      [](PipelineConfig& c, const Json& v) { c.tracker.max_branch_length = static_cast<int>(integer(v, "max_branch_length")); });
  add("covariance_source", "-", "\"smoothed\" or \"filtered\" covariances in the branch score",
      [](const PipelineConfig& c) {
        return Json(c.tracker.covariance_source == CovarianceSource::Smoothed ? "smoothed" : "filtered");
      },
      [](PipelineConfig& c, const Json& v) {
        const auto s = string(v, "covariance_source");
        if (s == "smoothed") c.tracker.covariance_source = CovarianceSource::Smoothed;
        else if (s == "filtered") c.tracker.covariance_source = CovarianceSource::Filtered;
        else throw ConfigError("covariance_source: expected smoothed or filtered");
      });
  add("max_coast_steps", "steps", "consecutive prediction-only steps allowed through empty gates",
      [](const PipelineConfig& c) { return Json(c.tracker.max_coast_steps); },
      [](PipelineConfig& c, const Json& v) { c.tracker.max_coast_steps = static_cast<int>(integer(v, "max_coast_steps")); });

  // Evaluation
  add("rg_threshold", "-", "region-growing intensity threshold",
      [](const PipelineConfig& c) { return Json(c.rg_threshold); },
      [](PipelineConfig& c, const Json& v) { c.rg_threshold = number(v, "rg_threshold"); });
  add("recall_tol_mm", "mm", "distance within which a ground-truth sample counts as recovered",
      [](const PipelineConfig& c) { return Json(c.recall_tol_mm); },
      [](PipelineConfig& c, const Json& v) { c.recall_tol_mm = number(v, "recall_tol_mm"); });

  // Phantom
  add("phantom_root", "mm", "root branch start point",
      [](const PipelineConfig& c) { return triple_json(c.phantom.root); },
      [](PipelineConfig& c, const Json& v) { c.phantom.root = triple(v, "phantom_root"); });
  add("phantom_root_direction", "-", "root branch direction (normalized on use)",
      [](const PipelineConfig& c) { return triple_json(c.phantom.root_direction); },
      [](PipelineConfig& c, const Json& v) { c.phantom.root_direction = triple(v, "phantom_root_direction"); });
  add("phantom_root_radius", "mm", "root branch radius",
      [](const PipelineConfig& c) { return Json(c.phantom.root_radius); },
      [](PipelineConfig& c, const Json& v) { c.phantom.root_radius = number(v, "phantom_root_radius"); });
  add("phantom_depth", "generations", "number of bifurcation generations",
      [](const PipelineConfig& c) { return Json(c.phantom.depth); },
      [](PipelineConfig& c, const Json& v) { c.phantom.depth = static_cast<int>(integer(v, "phantom_depth")); });
  add("phantom_branch_angle_deg", "deg", "bifurcation half-angle",
      [](const PipelineConfig& c) { return Json(c.phantom.branch_angle_deg); },
      [](PipelineConfig& c, const Json& v) { c.phantom.branch_angle_deg = number(v, "phantom_branch_angle_deg"); });
  add("phantom_radius_taper", "-", "child radius / parent radius, in (0, 1)",
      [](const PipelineConfig& c) { return Json(c.phantom.radius_taper); },
      [](PipelineConfig& c, const Json& v) { c.phantom.radius_taper = number(v, "phantom_radius_taper"); });
  add("phantom_segment_length", "mm", "length of every branch",
      [](const PipelineConfig& c) { return Json(c.phantom.segment_length); },
      [](PipelineConfig& c, const Json& v) { c.phantom.segment_length = number(v, "phantom_segment_length"); });
  add("phantom_dims", "voxels", "phantom volume size",
      [](const PipelineConfig& c) { return Json::array({c.phantom_dims[0], c.phantom_dims[1], c.phantom_dims[2]}); },
      [](PipelineConfig& c, const Json& v) {
        if (!v.is_array() || v.size() != 3) throw ConfigError("phantom_dims: expected 3 integers");
        for (int a = 0; a < 3; ++a) c.phantom_dims[a] = static_cast<int>(integer(v[a], "phantom_dims"));
      });
  add("phantom_spacing", "mm", "phantom voxel spacing",
      [](const PipelineConfig& c) { return triple_json(c.phantom_spacing); },
      [](PipelineConfig& c, const Json& v) { c.phantom_spacing = triple(v, "phantom_spacing"); });
  add("noise_sigma", "-", "additive Gaussian noise on the phantom volume",
      [](const PipelineConfig& c) { return Json(c.noise_sigma); },
      [](PipelineConfig& c, const Json& v) { c.noise_sigma = number(v, "noise_sigma"); });
  add("occlusions", "mm", "zeroed boxes: [[cx, cy, cz, half], ...] or [[cx, cy, cz, hx, hy, hz], ...]",
      [](const PipelineConfig& c) {
        Json arr = Json::array();
        for (const auto& o : c.occlusions)
          arr.push_back({o.center.x(), o.center.y(), o.center.z(), o.half_extent.x(), o.half_extent.y(),
                         o.half_extent.z()});
        return arr;
      },
      [](PipelineConfig& c, const Json& v) {
        if (!v.is_array()) throw ConfigError("occlusions: expected an array of boxes");
        c.occlusions.clear();
        for (const auto& box : v) {
          const auto n = numbers(box, "occlusions");
          Occlusion o;
          if (n.size() == 4) o = {Vec3(n[0], n[1], n[2]), Vec3::Constant(n[3])};
          else if (n.size() == 6) o = {Vec3(n[0], n[1], n[2]), Vec3(n[3], n[4], n[5])};
          else throw ConfigError("occlusions: each box needs 4 or 6 numbers");
          c.occlusions.push_back(o);
        }
      });
  return k;
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void PipelineConfig::validate() const {
  try {
    blobs.validate();
    tracker.validate();
    phantom_spec().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (int a = 0; a < 3; ++a) {
    if (phantom_dims[a] < 4) throw ConfigError("phantom_dims: every axis needs at least 4 voxels");
    if (!(phantom_spacing[a] > 0.0)) throw ConfigError("phantom_spacing: must be positive");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma: must be >= 0");
  for (const auto& o : occlusions)
    if (!(o.half_extent.array() >= 0.0).all()) throw ConfigError("occlusions: half widths must be >= 0");
  if (!(recall_tol_mm > 0.0)) throw ConfigError("recall_tol_mm: must be positive");
}

PhantomSpec PipelineConfig::phantom_spec() const {
  PhantomSpec s = phantom;
  s.rng_seed = rng_seed;
  return s;
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& keys = config_keys();
    const auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; });
    if (it == keys.end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    Json v;
    try {
      v = Json::parse(value);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config line " + std::to_string(line_no) + ": cannot parse value for '" + key + "'");
    }
    it->set(cfg, v);
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

Json config_to_json(const PipelineConfig& cfg) {
  Json j = Json::object();
  for (const auto& k : config_keys()) j[k.name] = k.get(cfg);
  return j;
}

std::string config_to_text(const PipelineConfig& cfg) {
  std::ostringstream out;
  for (const auto& k : config_keys()) out << k.name << " = " << k.get(cfg).dump() << '\n';
  return out.str();
}

std::string config_reference() {
  const PipelineConfig defaults;
  std::ostringstream out;
  out << "Config keys (key = value, one per line; '#' starts a comment):\n";
  for (const auto& k : config_keys()) {
    out << "  " << std::left << std::setw(24) << k.name << " default " << std::setw(22) << k.get(defaults).dump()
        << " [" << k.unit << "]  " << k.help << '\n';
  }
  return out.str();
}

}  // namespace airtrack
