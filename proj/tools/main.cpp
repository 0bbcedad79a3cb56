#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcrn/config.hpp"
#include "mcrn/harness.hpp"

namespace {

mcrn::ExperimentConfig load_config(const std::string& path, int64_t seed) {
  mcrn::ExperimentConfig config;
  if (!path.empty()) config = mcrn::parse_config_file(path);
  if (seed >= 0) config.seed = static_cast<uint64_t>(seed);
  return config;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

int cmd_run(const std::string& config_path, int64_t seed,
            const std::string& out_dir, const std::string& resume_path,
            int save_at, bool quiet) {
  mcrn::ExperimentConfig config = load_config(config_path, seed);

  std::ofstream metrics_file;
  mcrn::RunOptions options;
  options.log = quiet ? nullptr : &std::cerr;
  std::filesystem::path dir;
  if (!out_dir.empty()) {
    dir = out_dir;
    std::filesystem::create_directories(dir);
    metrics_file.open(dir / "metrics.jsonl");
    if (!metrics_file) {
      throw std::runtime_error("cannot write metrics under " + out_dir);
    }
    options.metrics_out = &metrics_file;
    options.save_path = (dir / "checkpoint.mcrn").string();
    options.save_at_epoch = save_at >= 0 ? save_at : config.epochs;
  } else {
    options.metrics_out = &std::cout;
    if (save_at >= 0) {
      throw std::runtime_error("--save-at needs --out");
    }
  }

  const mcrn::RunResult result =
      resume_path.empty()
          ? mcrn::run_experiment(config, options)
          : mcrn::resume_experiment(config, resume_path, options);

  if (!out_dir.empty()) {
    // Record the exact configuration the run used, seed override included.
    mcrn::ExperimentConfig echoed = config;
    mcrn::validate_config(echoed);
    write_text(dir / "config.ini", mcrn::canonical_config(echoed));
    if (!quiet) {
      std::cerr << "wrote " << result.records.size() << " records under "
                << out_dir << "\n";
    }
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, int64_t seed,
              const std::string& param, const std::vector<double>& values,
              const std::string& out_file, bool quiet) {
  const mcrn::ExperimentConfig config = load_config(config_path, seed);
  const std::string csv =
      mcrn::sweep(config, param, values, quiet ? nullptr : &std::cerr);
  if (out_file.empty()) {
    std::cout << csv;
  } else {
    write_text(out_file, csv);
  }
  return 0;
}

int cmd_ablate(const std::string& config_path, int64_t seed,
               const std::string& preset, int n_seeds,
               const std::string& out_file, bool quiet) {
  const mcrn::ExperimentConfig config = load_config(config_path, seed);
  const std::string csv =
      mcrn::ablate(config, preset, n_seeds, quiet ? nullptr : &std::cerr);
  if (out_file.empty()) {
    std::cout << csv;
  } else {
    write_text(out_file, csv);
  }
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint) {
  const mcrn::ExperimentConfig config = load_config(config_path, -1);
  const mcrn::MetricsRecord record =
      mcrn::evaluate_checkpoint(config, checkpoint);
  std::cout << mcrn::metrics_json_line(record) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "multi-centroid contrastive training on synthetic two-domain data"};
  app.require_subcommand(1);

  std::string config_path;
  int64_t seed = -1;
  std::string out_dir;
  std::string resume_path;
  int save_at = -1;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "train with a config");
  run->add_option("--config", config_path, "config file");
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out_dir,
                  "directory for metrics.jsonl, config.ini, checkpoint.mcrn");
  run->add_option("--resume", resume_path, "continue from a checkpoint");
  run->add_option("--save-at", save_at,
                  "checkpoint after this epoch (default: the last)");
  run->add_flag("--quiet", quiet, "suppress progress logging");

  std::string param;
  std::vector<double> values;
  std::string out_file;
  auto* sweep = app.add_subcommand("sweep", "one run per parameter value");
  sweep->add_option("--config", config_path, "config file");
  sweep->add_option("--seed", seed, "override the config seed");
  sweep->add_option("--param", param, "k or alpha")->required();
  sweep->add_option("--values", values, "parameter values")->required();
  sweep->add_option("--out", out_file, "CSV output file (default stdout)");
  sweep->add_flag("--quiet", quiet, "suppress progress logging");

  std::string preset;
  int n_seeds = 5;
  auto* ablate = app.add_subcommand("ablate", "fixed comparison suites");
  ablate->add_option("--config", config_path, "config file");
  ablate->add_option("--seed", seed, "override the base seed");
  ablate->add_option("--preset", preset, "table1, table2, table3 or dscl")
      ->required();
  ablate->add_option("--seeds", n_seeds, "runs per arm (default 5)");
  ablate->add_option("--out", out_file, "CSV output file (default stdout)");
  ablate->add_flag("--quiet", quiet, "suppress progress logging");

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--config", config_path, "config file");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(config_path, seed, out_dir, resume_path, save_at, quiet);
    }
    if (sweep->parsed()) {
      return cmd_sweep(config_path, seed, param, values, out_file, quiet);
    }
    if (ablate->parsed()) {
      return cmd_ablate(config_path, seed, preset, n_seeds, out_file, quiet);
    }
    if (eval->parsed()) {
      return cmd_eval(config_path, checkpoint);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
