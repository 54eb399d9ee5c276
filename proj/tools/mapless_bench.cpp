// Benchmark harness for the mapless planner: closed-loop trials in procedurally
// generated worlds, the v_max x density matrix, sampling-size study, per-module
// statistics and offline replay of recorded frames.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mapless/bench.hpp"
#include "mapless/config.hpp"
#include "mapless/error.hpp"

namespace fs = std::filesystem;
using namespace mapless;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::string resolution;
  int threads = -1;
};

Config load(const CommonOptions& opt) {
  Config config = opt.config_path.empty() ? Config{} : load_config(opt.config_path);
  if (!opt.resolution.empty()) {
    const auto [w, h] = parse_resolution(opt.resolution);
    set_resolution(config, w, h);
  }
  if (opt.threads >= 0) config.bench.threads = opt.threads;
  config.validate();
  return config;
}

// Writes `name` under the output directory, or to stdout when none was given.
template <typename Fn>
void emit(const CommonOptions& opt, const std::string& name, Fn&& fn) {
  if (opt.out_dir.empty()) {
    fn(std::cout);
    return;
  }
  fs::create_directories(opt.out_dir);
  const fs::path path = fs::path(opt.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  fn(out);
  std::cerr << "wrote " << path.string() << '\n';
}

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", opt.out_dir, "directory for CSV/JSON artifacts (default: stdout)");
  cmd->add_option("--resolution", opt.resolution, "render resolution WxH, e.g. 640x480");
  cmd->add_option("--threads", opt.threads, "worker threads (0 = all cores)");
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) sizes.push_back(static_cast<std::size_t>(std::stoul(item)));
  }
  if (sizes.empty()) throw Error(ErrorCode::invalid_argument, "--sizes needs at least one value");
  return sizes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mapless_bench: keyframe-map local planner benchmark"};
  app.require_subcommand(0, 1);
  bool print_config = false;
  std::string print_config_path;
  app.add_flag("--print-config", print_config, "print the effective config (defaults or --config) and exit");
  app.add_option("--config", print_config_path, "config file for --print-config")->check(CLI::ExistingFile);

  CommonOptions trial_opt;
  std::uint64_t trial_seed = 1;
  bool record_frames = false;
  auto* trial = app.add_subcommand("trial", "run one closed-loop episode");
  add_common(trial, trial_opt);
  trial->add_option("--seed", trial_seed, "world/trial seed");
  trial->add_flag("--record-frames", record_frames, "dump rendered frames (needs --out)");

  CommonOptions matrix_opt;
  auto* matrix = app.add_subcommand("matrix", "v_max x obstacle-density success matrix");
  add_common(matrix, matrix_opt);

  CommonOptions sampling_opt;
  std::string sizes_text = "50,100,200,400";
  int worlds = 30;
  auto* sampling = app.add_subcommand("sampling-study", "arrival time vs sampling size");
  add_common(sampling, sampling_opt);
  sampling->add_option("--sizes", sizes_text, "comma-separated sample counts");
  sampling->add_option("--worlds", worlds, "shared world seeds");

  CommonOptions modular_opt;
  std::size_t modular_trials = 1000;
  auto* modular = app.add_subcommand("modular", "ball/waypoint histograms and stage timings");
  add_common(modular, modular_opt);
  modular->add_option("--trials", modular_trials, "minimum number of replans to collect");

  CommonOptions replay_opt;
  std::string frames_dir;
  auto* replay = app.add_subcommand("replay", "offline pipeline on a recorded frame directory");
  add_common(replay, replay_opt);
  replay->add_option("--frames", frames_dir, "frame directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_config) {
      const Config config = print_config_path.empty() ? Config{} : load_config(print_config_path);
      std::cout << config_to_json(config) << '\n';
      return 0;
    }
    if (trial->parsed()) {
      const Config config = load(trial_opt);
      TrialOptions options;
      if (record_frames) {
        if (trial_opt.out_dir.empty()) throw Error(ErrorCode::invalid_argument, "--record-frames needs --out");
        options.record_frames_dir = (fs::path(trial_opt.out_dir) / "frames").string();
        fs::create_directories(options.record_frames_dir);
      }
      const TrialResult result = run_trial(config, trial_seed, options);
      emit(trial_opt, "trial.json", [&](std::ostream& out) { write_trial_json(out, result); });
      if (!trial_opt.out_dir.empty()) {
        emit(trial_opt, "episode.csv", [&](std::ostream& out) { write_episode_log(out, result); });
        emit(trial_opt, "world.txt",
             [&](std::ostream& out) { write_world(out, make_trial_world(config, trial_seed)); });
      }
      return result.outcome == Outcome::success ? 0 : 2;
    }
    if (matrix->parsed()) {
      const MatrixReport report = run_matrix(load(matrix_opt));
      emit(matrix_opt, "matrix.csv", [&](std::ostream& out) { write_matrix_csv(out, report); });
      if (!matrix_opt.out_dir.empty()) {
        emit(matrix_opt, "matrix.json", [&](std::ostream& out) { write_matrix_json(out, report); });
      }
      return 0;
    }
    if (sampling->parsed()) {
      const auto rows = sampling_study(load(sampling_opt), parse_sizes(sizes_text), worlds);
      emit(sampling_opt, "sampling.csv", [&](std::ostream& out) { write_sampling_csv(out, rows); });
      return 0;
    }
    if (modular->parsed()) {
      const ModularStats stats = modular_stats(load(modular_opt), modular_trials);
      emit(modular_opt, "modular.json", [&](std::ostream& out) { write_modular_json(out, stats); });
      if (!modular_opt.out_dir.empty()) {
        emit(modular_opt, "histograms.csv", [&](std::ostream& out) { write_histogram_csv(out, stats); });
      }
      return 0;
    }
    if (replay->parsed()) {
      const auto log = replay_frames(load(replay_opt), frames_dir);
      emit(replay_opt, "replay.csv", [&](std::ostream& out) {
        write_episode_header(out);
        for (const auto& r : log) write_episode_row(out, r);
      });
      return 0;
    }
    std::cout << app.help() << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return 1;
  }
}
