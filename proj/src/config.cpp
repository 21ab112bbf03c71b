#include "cpps/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cpps::config {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& origin, std::size_t line, const std::string& msg) {
  throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_real(const std::string& origin, std::size_t line, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    fail(origin, line, "expected a number, got '" + v + "'");
  }
}

std::uint64_t parse_uint(const std::string& origin, std::size_t line, const std::string& v) {
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    fail(origin, line, "expected a non-negative integer, got '" + v + "'");
  return x;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;

  // One setter per known key; anything else is rejected with its line.
  using Setter = std::function<void(const std::string&, std::size_t, const std::string&)>;
  std::map<std::string, Setter> keys;
  auto real_key = [&](const std::string& name, double& slot) {
    keys[name] = [&slot](const std::string& o, std::size_t l, const std::string& v) {
      slot = parse_real(o, l, v);
    };
  };
  auto uint_key = [&](const std::string& name, std::size_t& slot) {
    keys[name] = [&slot](const std::string& o, std::size_t l, const std::string& v) {
      slot = std::size_t(parse_uint(o, l, v));
    };
  };

  keys["case.path"] = [&cfg](const std::string&, std::size_t, const std::string& v) {
    cfg.case_path = v;
  };
  uint_key("scenario.steps", cfg.scenario_steps);
  uint_key("scenario.anomalies", cfg.scenario_anomalies);
  real_key("scenario.noise_sigma", cfg.load_noise_sigma);

  real_key("cyber.d0", cfg.path_loss.d0);
  real_key("cyber.bpl_d0", cfg.path_loss.bpl_d0);
  real_key("cyber.gamma", cfg.path_loss.gamma);
  real_key("cyber.sigma_shadow", cfg.path_loss.sigma_shadow);
  real_key("cyber.pt_dbm", cfg.path_loss.pt_dbm);
  real_key("cyber.pn_dbm", cfg.path_loss.pn_dbm);
  real_key("cyber.lambda_c", cfg.path_loss.lambda_c);
  real_key("cyber.distance_scale", cfg.distance_scale);

  real_key("detect.lambda_a", cfg.detect.lambda_a);
  uint_key("detect.window_w", cfg.detect.window_w);
  real_key("detect.iqr_floor", cfg.detect.iqr_floor);

  real_key("reward.r1", cfg.reward.r1);
  real_key("reward.r2", cfg.reward.r2);
  real_key("reward.r3", cfg.reward.r3);
  uint_key("reward.budget", cfg.reward.budget);
  real_key("reward.lambda_s", cfg.reward.lambda_s);

  uint_key("diffusion.steps", cfg.diffusion_steps);
  keys["diffusion.schedule"] = [&cfg](const std::string& o, std::size_t l,
                                      const std::string& v) {
    if (v == "linear")
      cfg.schedule = diffusion::ScheduleKind::linear;
    else if (v == "cosine")
      cfg.schedule = diffusion::ScheduleKind::cosine;
    else
      fail(o, l, "schedule must be linear or cosine, got '" + v + "'");
  };

  uint_key("denoiser.hidden", cfg.hyper.hidden);
  uint_key("denoiser.blocks", cfg.hyper.blocks);
  real_key("denoiser.dropout", cfg.hyper.dropout);

  keys["train.mode"] = [&cfg](const std::string& o, std::size_t l, const std::string& v) {
    try {
      cfg.train.mode = trainer::parse_mode(v);
    } catch (const std::exception& e) {
      fail(o, l, e.what());
    }
  };
  uint_key("train.trajectories", cfg.train.trajectories_per_epoch);
  uint_key("train.timestep_samples", cfg.train.timestep_samples);
  real_key("train.beta", cfg.train.beta);
  real_key("train.learning_rate", cfg.train.learning_rate);
  uint_key("train.epochs", cfg.train.epochs);
  uint_key("train.buffer", cfg.train.buffer_size);
  keys["train.optimizer"] = [&cfg](const std::string& o, std::size_t l, const std::string& v) {
    if (v == "sgd")
      cfg.train.adam = false;
    else if (v == "adam")
      cfg.train.adam = true;
    else
      fail(o, l, "optimizer must be sgd or adam, got '" + v + "'");
  };
  uint_key("train.checkpoint_every", cfg.checkpoint_every);

  uint_key("eval.rollouts", cfg.eval_rollouts);
  uint_key("eval.conditions", cfg.eval_conditions);

  keys["experiment.seed"] = [&cfg](const std::string& o, std::size_t l, const std::string& v) {
    cfg.seed = parse_uint(o, l, v);
  };

  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail(origin, lineno, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(origin, lineno, "empty key");
    if (section.empty()) fail(origin, lineno, "key outside any section");
    const std::string full = section + "." + key;
    const auto it = keys.find(full);
    if (it == keys.end()) fail(origin, lineno, "unknown key '" + full + "'");
    it->second(origin, lineno, value);
  }

  // The path-loss threshold lives in the cyber section; the reward config
  // carries a copy so the two can never drift apart.
  cfg.reward.lambda_c = cfg.path_loss.lambda_c;
  cfg.train.seed = cfg.seed;
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::string canonical(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "case.path=" << cfg.case_path << "\n"
      << "scenario.steps=" << cfg.scenario_steps << "\n"
      << "scenario.anomalies=" << cfg.scenario_anomalies << "\n"
      << "scenario.noise_sigma=" << fmt(cfg.load_noise_sigma) << "\n"
      << "cyber.d0=" << fmt(cfg.path_loss.d0) << "\n"
      << "cyber.bpl_d0=" << fmt(cfg.path_loss.bpl_d0) << "\n"
      << "cyber.gamma=" << fmt(cfg.path_loss.gamma) << "\n"
      << "cyber.sigma_shadow=" << fmt(cfg.path_loss.sigma_shadow) << "\n"
      << "cyber.pt_dbm=" << fmt(cfg.path_loss.pt_dbm) << "\n"
      << "cyber.pn_dbm=" << fmt(cfg.path_loss.pn_dbm) << "\n"
      << "cyber.lambda_c=" << fmt(cfg.path_loss.lambda_c) << "\n"
      << "cyber.distance_scale=" << fmt(cfg.distance_scale) << "\n"
      << "detect.lambda_a=" << fmt(cfg.detect.lambda_a) << "\n"
      << "detect.window_w=" << cfg.detect.window_w << "\n"
      << "detect.iqr_floor=" << fmt(cfg.detect.iqr_floor) << "\n"
      << "reward.r1=" << fmt(cfg.reward.r1) << "\n"
      << "reward.r2=" << fmt(cfg.reward.r2) << "\n"
      << "reward.r3=" << fmt(cfg.reward.r3) << "\n"
      << "reward.budget=" << cfg.reward.budget << "\n"
      << "reward.lambda_s=" << fmt(cfg.reward.lambda_s) << "\n"
      << "diffusion.steps=" << cfg.diffusion_steps << "\n"
      << "diffusion.schedule="
      << (cfg.schedule == diffusion::ScheduleKind::linear ? "linear" : "cosine") << "\n"
      << "denoiser.hidden=" << cfg.hyper.hidden << "\n"
      << "denoiser.blocks=" << cfg.hyper.blocks << "\n"
      << "denoiser.dropout=" << fmt(cfg.hyper.dropout) << "\n"
      << "train.mode=" << trainer::mode_name(cfg.train.mode) << "\n"
      << "train.trajectories=" << cfg.train.trajectories_per_epoch << "\n"
      << "train.timestep_samples=" << cfg.train.timestep_samples << "\n"
      << "train.beta=" << fmt(cfg.train.beta) << "\n"
      << "train.learning_rate=" << fmt(cfg.train.learning_rate) << "\n"
      << "train.epochs=" << cfg.train.epochs << "\n"
      << "train.buffer=" << cfg.train.buffer_size << "\n"
      << "train.optimizer=" << (cfg.train.adam ? "adam" : "sgd") << "\n"
      << "train.checkpoint_every=" << cfg.checkpoint_every << "\n"
      << "eval.rollouts=" << cfg.eval_rollouts << "\n"
      << "eval.conditions=" << cfg.eval_conditions << "\n"
      << "experiment.seed=" << cfg.seed << "\n";
  return out.str();
}

std::string fingerprint(const ExperimentConfig& cfg) {
  // FNV-1a, 64 bit.
  std::uint64_t h = 1469598103934665603ull;
  for (const char c : canonical(cfg)) {
    h ^= std::uint8_t(c);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cpps::config
