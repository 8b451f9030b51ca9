// cspecon: run, sweep and analyze the market simulation from the command line.
//
//   cspecon run <config> [--seed S] [--out DIR] [--emit-full-series]
//   cspecon sweep <sweep-config> [--threads K] [--out DIR]
//   cspecon analyze <dir>
//
// Exit codes: 0 ok, 1 runtime/IO failure, 2 bad configuration or usage,
// 3 sweep finished with failed cells.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cspecon/cspecon.hpp"

namespace {

void print_summary(const cspecon::RunSummary& s) {
  std::cout << cspecon::summary_json(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constraint-satisfaction market simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, analyze_dir;
  std::optional<std::uint64_t> seed;
  bool emit_full = false;
  int threads = 0;

  auto* run_cmd = app.add_subcommand("run", "Run one simulation");
  run_cmd->add_option("config", config_path, "Run configuration file")->required();
  run_cmd->add_option("--seed", seed, "Override the seed");
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_flag("--emit-full-series", emit_full, "Also write per-good series");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter sweep");
  sweep_cmd->add_option("config", config_path, "Sweep configuration file")->required();
  sweep_cmd->add_option("--threads", threads, "Worker threads (default: CSPECON_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", out_dir, "Output directory");
  sweep_cmd->add_flag("--emit-full-series", emit_full, "Also write per-good series");

  auto* analyze_cmd = app.add_subcommand("analyze", "Post-process a run directory");
  analyze_cmd->add_option("dir", analyze_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) {
      cspecon::RunConfig cfg = cspecon::load_run_config(config_path);
      if (seed) cfg.model.seed = *seed;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (emit_full) cfg.emit_full_series = true;
      cfg.validate();
      print_summary(cspecon::run(cfg));
      return 0;
    }
    if (*sweep_cmd) {
      cspecon::SweepConfig sw = cspecon::load_sweep_config(config_path);
      if (!out_dir.empty()) sw.base.out_dir = out_dir;
      if (emit_full) sw.base.emit_full_series = true;
      const int k = threads > 0 ? threads : cspecon::threads_from_env(1);
      const auto rows = cspecon::sweep(sw, k);
      std::size_t failed = 0;
      for (const auto& r : rows)
        if (!r.summary) {
          ++failed;
          std::cerr << "cell " << cspecon::format_double(r.value) << " replicate " << r.replicate
                    << " failed: " << r.error << "\n";
        }
      std::cout << "wrote " << sw.base.out_dir << "/sweep.csv (" << rows.size() << " cells, "
                << failed << " failed)\n";
      return failed ? 3 : 0;
    }
    if (*analyze_cmd) {
      print_summary(cspecon::analyze(analyze_dir).summary);
      return 0;
    }
  } catch (const cspecon::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cspecon::InvalidParams& e) {
    std::cerr << "invalid parameters: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
