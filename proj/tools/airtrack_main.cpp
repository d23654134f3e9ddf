// airtrack: batch front end for phantom generation, blob detection, branch tracking
// and centerline evaluation.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "airtrack/config.hpp"
#include "airtrack/error.hpp"
#include "airtrack/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kIo = 3, kNumerical = 4 };

}  // namespace

int main(int argc, char** argv) {
  using namespace airtrack;

  CLI::App app{"Tree extraction from 3D volumes by blob measurements and RTS smoothing"};
  app.footer(config_reference());
  app.require_subcommand(1);

  std::string config_path;
  std::optional<long long> seed;
  bool dry_run = false;
  bool quiet = false;
  app.add_option("--config", config_path, "config file (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override rng_seed");
  app.add_flag("--dry-run", dry_run, "print the resolved config and write nothing");
  app.add_flag("--quiet", quiet, "suppress progress output");

  std::string prefix = "phantom";
  auto* phantom = app.add_subcommand("phantom", "write <prefix>.mhd/.raw and <prefix>.truth.json");
  phantom->add_option("--out", prefix, "output prefix");

  std::string volume_path, meas_path, branches_path, truth_path, out_path;
  auto* blobs = app.add_subcommand("blobs", "detect multi-scale blobs in a volume");
  blobs->add_option("volume", volume_path, "MetaImage header (.mhd)")->required();
  blobs->add_option("--out", out_path, "measurement JSON")->required();

  auto* track = app.add_subcommand("track", "track, smooth and validate branches");
  track->add_option("volume", volume_path, "MetaImage header (.mhd)")->required();
  track->add_option("measurements", meas_path, "measurement JSON")->required();
  track->add_option("--out", out_path, "branch JSON")->required();

  auto* eval = app.add_subcommand("eval", "centerline distances of accepted branches to the truth tree");
  eval->add_option("branches", branches_path, "branch JSON")->required();
  eval->add_option("truth", truth_path, "truth tree JSON")->required();
  eval->add_option("--out", out_path, "metrics JSON")->required();

  std::string workdir = "pipeline_out";
  auto* pipeline = app.add_subcommand("pipeline", "phantom, blobs, track, eval and the region-growing comparison");
  pipeline->add_option("--workdir", workdir, "output directory");

  for (auto* sub : {phantom, blobs, track, eval, pipeline}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    PipelineConfig cfg = config_path.empty() ? parse_config("") : load_config(config_path);
    if (seed) {
      if (*seed < 0) throw ConfigError("--seed must be >= 0");
      cfg.rng_seed = static_cast<std::uint64_t>(*seed);
      cfg.validate();
    }

    if (dry_run) {
      std::cout << config_to_text(cfg);
      return kOk;
    }

    auto log = [&](const std::string& msg) {
      if (!quiet) std::cerr << msg << '\n';
    };

    if (*phantom) {
      cmd_phantom(cfg, prefix);
      log("wrote " + prefix + ".mhd, " + prefix + ".raw, " + prefix + ".truth.json");
    } else if (*blobs) {
      cmd_blobs(volume_path, cfg, out_path);
      log("wrote " + out_path);
    } else if (*track) {
      cmd_track(volume_path, meas_path, cfg, out_path);
      log("wrote " + out_path);
    } else if (*eval) {
      const auto m = cmd_eval(branches_path, truth_path, cfg, out_path);
      if (!quiet) std::cout << format_table({{"RTS", m}});
    } else if (*pipeline) {
      const auto report = cmd_pipeline(cfg, workdir);
      if (!quiet) {
        std::cout << format_table(report.rows);
        char line[200];
        std::snprintf(line, sizeof line,
                      "measurements %zu, branches %zu (accepted %zu), recall accepted %.3f / all %.3f\n"
                      "blob stage %.2f s, tracking %.2f s\n",
                      report.measurements, report.branches_total, report.branches_accepted, report.recall_accepted,
                      report.recall_all, report.blob_seconds, report.track_seconds);
        std::cout << line;
      }
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
}
