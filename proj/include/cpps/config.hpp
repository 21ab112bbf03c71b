#pragma once

#include <cstdint>
#include <string>

#include "cpps/cyber.hpp"
#include "cpps/denoiser.hpp"
#include "cpps/detect.hpp"
#include "cpps/diffusion.hpp"
#include "cpps/placement.hpp"
#include "cpps/trainer.hpp"

namespace cpps::config {

/// Full experiment description. Every default matches the reference
/// experiment settings, so an empty file is a valid (if caseless) config.
struct ExperimentConfig {
  std::string case_path;

  std::size_t scenario_steps = 400;
  std::size_t scenario_anomalies = 20;
  double load_noise_sigma = 0.05;

  cyber::PathLossParams path_loss;
  double distance_scale = 1.0;  // meters of cable per unit resistance distance

  detect::DetectionConfig detect;
  placement::RewardConfig reward;  // reward.lambda_c mirrors path_loss.lambda_c

  std::size_t diffusion_steps = 20;
  diffusion::ScheduleKind schedule = diffusion::ScheduleKind::cosine;

  denoiser::DenoiserHyper hyper;
  trainer::TrainConfig train;

  std::size_t eval_rollouts = 50;
  std::size_t eval_conditions = 100;

  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;  // 0 = final checkpoint only
};

/// Parses the INI-style config text ('#' comments, [section] headers,
/// key = value lines). Unknown sections or keys fail with the offending
/// line; so do malformed values.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<memory>");
ExperimentConfig load_config(const std::string& path);

/// Canonical key = value dump of every setting; equal configs serialize
/// identically regardless of input formatting.
std::string canonical(const ExperimentConfig& cfg);

/// FNV-1a hash of the canonical form, as fixed-width hex. Manifest material.
std::string fingerprint(const ExperimentConfig& cfg);

}  // namespace cpps::config
