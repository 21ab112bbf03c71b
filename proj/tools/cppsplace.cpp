// Experiment harness: builds the coupled grid/cyber problem from a config
// file and runs scenario generation, training, inference evaluation, or one
// of the baseline strategies. One master seed determines every artifact.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>
#include <set>
#include <string>

#include "cpps/baselines.hpp"
#include "cpps/config.hpp"
#include "cpps/denoiser.hpp"
#include "cpps/diffusion.hpp"
#include "cpps/grid.hpp"
#include "cpps/problem.hpp"
#include "cpps/rng.hpp"
#include "cpps/scenario_io.hpp"
#include "cpps/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using cpps::config::ExperimentConfig;

std::string fmt_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// Anomaly times: a seeded uniform draw of distinct timesteps late enough
/// for a full detector warm-up window.
std::set<std::size_t> draw_anomaly_times(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::size_t first = cfg.detect.window_w + 1;
  if (cfg.scenario_steps <= first)
    throw std::runtime_error("scenario too short for the detector warm-up window");
  const std::size_t room = cfg.scenario_steps - first;  // times in [first, steps-1]
  if (cfg.scenario_anomalies == 0) throw std::runtime_error("need at least one anomaly");
  if (cfg.scenario_anomalies > room)
    throw std::runtime_error("more anomalies requested than available timesteps");

  std::vector<std::size_t> pool(room);
  for (std::size_t i = 0; i < room; ++i) pool[i] = first + i;
  cpps::Rng rng = cpps::make_rng(seed);
  std::set<std::size_t> times;
  for (std::size_t i = 0; i < cfg.scenario_anomalies; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, room - 1);
    std::swap(pool[i], pool[pick(rng)]);
    times.insert(pool[i]);
  }
  return times;
}

cpps::grid::ScenarioSet build_scenarios(const ExperimentConfig& cfg,
                                        const cpps::grid::PowerGrid& grid) {
  const std::uint64_t seed = cpps::derive_seed(cfg.seed, "scenario");
  const std::set<std::size_t> times =
      draw_anomaly_times(cfg, cpps::derive_seed(seed, "times"));
  return cpps::grid::generate_scenarios(grid, cfg.scenario_steps, times, cfg.load_noise_sigma,
                                        cpps::derive_seed(seed, "noise"));
}

cpps::problem::ProblemContext build_context(const ExperimentConfig& cfg) {
  if (cfg.case_path.empty()) throw std::runtime_error("config is missing case.path");
  cpps::grid::PowerGrid grid = cpps::grid::load_case(cfg.case_path);
  cpps::grid::ScenarioSet scenarios = build_scenarios(cfg, grid);
  cpps::cyber::CyberLayer layer =
      cpps::cyber::layer_from_grid(grid, cfg.path_loss, cfg.distance_scale);
  return cpps::problem::make_context(std::move(grid), std::move(scenarios), std::move(layer),
                                     cfg.detect, cfg.reward);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), std::streamsize(text.size()));
  if (!out) throw std::runtime_error("short write on " + path.string());
}

void write_manifest(const fs::path& dir, const ExperimentConfig& cfg,
                    const std::string& command) {
  nlohmann::json m;
  m["command"] = command;
  m["config_fingerprint"] = cpps::config::fingerprint(cfg);
  m["case"] = cfg.case_path;
  m["seed"] = cfg.seed;
  m["format_version"] = 1;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

nlohmann::json record_json(const cpps::trainer::InferenceRecord& rec) {
  nlohmann::json j = nlohmann::json::parse(cpps::placement::to_json(rec.nominal));
  j["mean_reward"] = rec.mean_reward;
  j["std_reward"] = rec.std_reward;
  j["detection_score"] = rec.s_a;
  j["lambda2"] = rec.lambda2;
  j["feasible"] = rec.feasible;
  return j;
}

nlohmann::json summarize(const std::vector<cpps::trainer::InferenceRecord>& records) {
  if (records.empty()) throw std::runtime_error("nothing to summarize");
  std::size_t best = 0;
  double mean_of_means = 0.0, feasible = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    mean_of_means += records[i].mean_reward;
    feasible += records[i].feasible ? 1.0 : 0.0;
    if (records[i].mean_reward > records[best].mean_reward) best = i;
  }
  nlohmann::json s;
  s["count"] = records.size();
  s["mean_reward_over_placements"] = mean_of_means / double(records.size());
  s["feasible_fraction"] = feasible / double(records.size());
  s["best_index"] = best;
  s["best"] = record_json(records[best]);
  return s;
}

int cmd_simulate(const ExperimentConfig& cfg, const fs::path& out_dir) {
  if (cfg.case_path.empty()) throw std::runtime_error("config is missing case.path");
  const cpps::grid::PowerGrid grid = cpps::grid::load_case(cfg.case_path);
  const cpps::grid::ScenarioSet set = build_scenarios(cfg, grid);
  fs::create_directories(out_dir);
  cpps::grid::save_scenarios((out_dir / "scenarios.json").string(), set);
  write_manifest(out_dir, cfg, "simulate");
  std::cerr << "wrote " << set.snapshots.size() << " snapshots, " << set.anomaly_times.size()
            << " anomalies to " << (out_dir / "scenarios.json").string() << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const cpps::problem::ProblemContext ctx = build_context(cfg);
  const cpps::diffusion::DiffusionSchedule sched =
      cpps::diffusion::make_schedule(cfg.diffusion_steps, cfg.schedule);
  fs::create_directories(out_dir);

  std::ofstream csv(out_dir / "metrics.csv", std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write metrics.csv");
  csv << "epoch,avg_reward,feasible_fraction,buffer_min_reward,wall_time_s\n";

  cpps::trainer::TrainConfig train_cfg = cfg.train;
  const auto on_epoch = [&](const cpps::trainer::EpochMetrics& m,
                            const cpps::denoiser::DenoiserParams& params) {
    csv << m.epoch << ',' << fmt_real(m.avg_reward) << ',' << fmt_real(m.feasible_fraction)
        << ',' << fmt_real(m.buffer_min_reward) << ',' << fmt_real(m.wall_time_s) << "\n";
    csv.flush();
    std::cerr << "epoch " << m.epoch << " avg_reward " << m.avg_reward << " feasible "
              << m.feasible_fraction << " loss " << m.loss << "\n";
    if (cfg.checkpoint_every != 0 && m.epoch % cfg.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch%04zu.ckpt", m.epoch);
      cpps::denoiser::save_checkpoint(params, (out_dir / name).string());
    }
  };

  const cpps::trainer::TrainResult result =
      cpps::trainer::train(train_cfg, ctx, sched, cfg.hyper, on_epoch);
  cpps::denoiser::save_checkpoint(result.params, (out_dir / "checkpoint.ckpt").string());
  write_manifest(out_dir, cfg, "train");
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const fs::path& out_dir,
                 const std::string& checkpoint, std::size_t count) {
  const cpps::problem::ProblemContext ctx = build_context(cfg);
  const cpps::diffusion::DiffusionSchedule sched =
      cpps::diffusion::make_schedule(cfg.diffusion_steps, cfg.schedule);
  const cpps::denoiser::DenoiserParams params = cpps::denoiser::load_checkpoint(checkpoint);

  const std::vector<cpps::trainer::InferenceRecord> records =
      cpps::trainer::inference(params, sched, ctx, count, cfg.eval_conditions,
                               cpps::derive_seed(cfg.seed, "inference"), cfg.train.threads);

  fs::create_directories(out_dir);
  nlohmann::json placements = nlohmann::json::array();
  for (const auto& rec : records) placements.push_back(record_json(rec));
  write_text(out_dir / "placements.json", placements.dump(2) + "\n");
  write_text(out_dir / "summary.json", summarize(records).dump(2) + "\n");
  write_manifest(out_dir, cfg, "evaluate");
  return 0;
}

int cmd_baseline(const ExperimentConfig& cfg, const fs::path& out_dir,
                 const std::string& which) {
  const cpps::problem::ProblemContext ctx = build_context(cfg);

  cpps::placement::PlacementGraph p;
  if (which == "greedy-accuracy") {
    p = cpps::baselines::greedy_accuracy(ctx, cfg.reward.budget);
  } else if (which == "greedy-robustness") {
    p = cpps::baselines::greedy_robustness(ctx, cfg.reward.budget);
  } else if (which == "random") {
    p = cpps::baselines::random_placement(ctx, cfg.reward.budget,
                                          cpps::derive_seed(cfg.seed, "baseline-random"));
  } else {
    throw std::runtime_error("unknown baseline: " + which +
                             " (expected greedy-accuracy, greedy-robustness or random)");
  }

  // Same test conditions as cmd_evaluate, so rewards are comparable.
  const std::uint64_t eval_seed =
      cpps::derive_seed(cpps::derive_seed(cfg.seed, "inference"), "eval");
  const cpps::trainer::InferenceRecord rec =
      cpps::trainer::evaluate_record(ctx, p, cfg.eval_conditions, eval_seed);

  fs::create_directories(out_dir);
  nlohmann::json out = record_json(rec);
  out["baseline"] = which;
  write_text(out_dir / "placement.json", out.dump(2) + "\n");
  write_manifest(out_dir, cfg, "baseline " + which);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust sensor placement on cyber-physical power grids"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "out";
  std::string mode;
  std::string which = "random";
  std::string checkpoint;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t count = 0;
  bool timings = false;

  app.add_option("--config", config_path, "experiment config file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "master seed override");
  app.add_option("--threads", threads, "worker threads for rollouts and evaluation");
  app.add_option("--mode", mode, "training mode override (ddpo | gdpo | efgd)");
  app.add_flag("--timings", timings,
               "record real wall times in metrics.csv (breaks byte-exact replay)");

  CLI::App* simulate = app.add_subcommand("simulate", "generate and store the scenario set");
  CLI::App* train = app.add_subcommand("train", "train the diffusion policy");
  CLI::App* evaluate = app.add_subcommand("evaluate", "run inference from a checkpoint");
  evaluate->add_option("--checkpoint", checkpoint, "trained parameter archive")->required();
  evaluate->add_option("--count", count, "rollout count override");
  CLI::App* baseline = app.add_subcommand("baseline", "run a baseline strategy");
  baseline->add_option("--which", which,
                       "greedy-accuracy | greedy-robustness | random");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    ExperimentConfig cfg = cpps::config::load_config(config_path);
    if (app.count("--seed") > 0) {
      cfg.seed = seed;
      cfg.train.seed = seed;
    }
    if (!mode.empty()) cfg.train.mode = cpps::trainer::parse_mode(mode);
    cfg.train.threads = threads;
    cfg.train.record_wall_time = timings;

    if (simulate->parsed()) return cmd_simulate(cfg, out_dir);
    if (train->parsed()) return cmd_train(cfg, out_dir);
    if (evaluate->parsed())
      return cmd_evaluate(cfg, out_dir, checkpoint, count == 0 ? cfg.eval_rollouts : count);
    if (baseline->parsed()) return cmd_baseline(cfg, out_dir, which);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
