#include "airtrack/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "airtrack/error.hpp"

namespace airtrack {

double quantize(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

namespace {

Json vec_json(const Vec3& v) { return Json::array({quantize(v.x()), quantize(v.y()), quantize(v.z())}); }

Vec3 vec_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw IoError(std::string(what) + ": expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

Json measurements_to_json(const std::vector<Measurement>& ms) {
  Json arr = Json::array();
  for (const auto& m : ms)
    arr.push_back({{"pos", vec_json(m.position)},
                   {"r", quantize(m.radius)},
                   {"scale", quantize(m.scale)},
                   {"response", quantize(m.response)}});
  return arr;
}

std::vector<Measurement> measurements_from_json(const Json& doc) {
  return guarded("measurement file", [&] {
    const Json& arr = doc.is_object() ? doc.at("measurements") : doc;
    if (!arr.is_array()) throw IoError("measurement file: expected an array");
    std::vector<Measurement> out;
    for (const auto& j : arr) {
      Measurement m;
      m.position = vec_from(j.at("pos"), "pos");
      m.radius = j.at("r").get<double>();
      m.scale = j.at("scale").get<double>();
      m.response = j.at("response").get<double>();
      if (!(m.radius > 0.0)) throw IoError("measurement file: radius must be positive");
      out.push_back(m);
    }
    return out;
  });
}

std::vector<Vec3> BranchRecord::positions() const {
  std::vector<Vec3> out;
  for (const auto& s : states) out.push_back(s.pos);
  return out;
}

std::vector<Vec3> BranchFile::accepted_points() const {
  std::vector<Vec3> out;
  for (const auto& b : branches)
    if (b.accepted)
      for (const auto& s : b.states) out.push_back(s.pos);
  return out;
}

std::vector<Vec3> BranchFile::all_points() const {
  std::vector<Vec3> out;
  for (const auto& b : branches)
    for (const auto& s : b.states) out.push_back(s.pos);
  return out;
}

BranchRecord to_record(const Branch& b) {
  BranchRecord r;
  r.seed = static_cast<long long>(b.seed_index);
  r.accepted = b.accepted;
  r.mu = quantize(b.score_mu);
  for (std::size_t k = 0; k < b.smoothed.size(); ++k) {
    const GaussianState& s = b.smoothed[k].state;
    BranchStateRecord st;
    st.pos = s.position().unaryExpr([](double v) { return quantize(v); });
    st.r = quantize(s.radius());
    const Vec3 d = s.direction();
    st.dir = (d.norm() > 0.0 ? Vec3(d.normalized()) : d).unaryExpr([](double v) { return quantize(v); });
    st.trace_filtered = quantize(b.filtered[k].posterior.cov.trace());
    st.trace_smoothed = quantize(s.cov.trace());
    r.states.push_back(st);
  }
  return r;
}

Json branch_file_to_json(const BranchFile& f) {
  Json branches = Json::array();
  for (const auto& b : f.branches) {
    Json states = Json::array();
    for (const auto& s : b.states)
      states.push_back({{"pos", vec_json(s.pos)},
                        {"r", quantize(s.r)},
                        {"dir", vec_json(s.dir)},
                        {"trace_filtered", quantize(s.trace_filtered)},
                        {"trace_smoothed", quantize(s.trace_smoothed)}});
    branches.push_back({{"seed", b.seed}, {"accepted", b.accepted}, {"mu", quantize(b.mu)}, {"states", states}});
  }
  return {{"branches", branches}, {"config", f.config}};
}

BranchFile branch_file_from_json(const Json& doc) {
  return guarded("branch file", [&] {
    BranchFile f;
    for (const auto& jb : doc.at("branches")) {
      BranchRecord b;
      b.seed = jb.at("seed").get<long long>();
      b.accepted = jb.at("accepted").get<bool>();
      b.mu = jb.at("mu").get<double>();
      for (const auto& js : jb.at("states")) {
        BranchStateRecord s;
        s.pos = vec_from(js.at("pos"), "pos");
        s.r = js.at("r").get<double>();
        s.dir = vec_from(js.at("dir"), "dir");
        s.trace_filtered = js.at("trace_filtered").get<double>();
        s.trace_smoothed = js.at("trace_smoothed").get<double>();
        b.states.push_back(s);
      }
      f.branches.push_back(std::move(b));
    }
    if (doc.contains("config")) f.config = doc.at("config");
    return f;
  });
}

Json tree_to_json(const PhantomTree& tree) {
  Json branches = Json::array();
  for (const auto& b : tree.branches) {
    Json pts = Json::array();
    for (const auto& p : b.points) pts.push_back(vec_json(p));
    Json radii = Json::array();
    for (double r : b.radii) radii.push_back(quantize(r));
    branches.push_back({{"points", pts}, {"radii", radii}, {"parent", b.parent}});
  }
  return {{"branches", branches}};
}

PhantomTree tree_from_json(const Json& doc) {
  return guarded("truth file", [&] {
    PhantomTree t;
    for (const auto& jb : doc.at("branches")) {
      PhantomBranch b;
      for (const auto& p : jb.at("points")) b.points.push_back(vec_from(p, "points"));
      b.radii = jb.at("radii").get<std::vector<double>>();
      b.parent = jb.at("parent").get<int>();
      if (b.radii.size() != b.points.size()) throw IoError("truth file: points/radii length mismatch");
      t.branches.push_back(std::move(b));
    }
    return t;
  });
}

Json metrics_to_json(const CenterlineMetrics& m) {
  return {{"d_fp", quantize(m.d_fp)}, {"d_fn", quantize(m.d_fn)}, {"d_err", quantize(m.d_err)}};
}

CenterlineMetrics metrics_from_json(const Json& doc) {
  return guarded("metrics file", [&] {
    return CenterlineMetrics{doc.at("d_fp").get<double>(), doc.at("d_fn").get<double>(),
                             doc.at("d_err").get<double>()};
  });
}

}  // namespace airtrack
