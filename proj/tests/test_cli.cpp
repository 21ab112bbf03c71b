#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cpps/config.hpp"
#include "cpps/denoiser.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::current_path() / "cli_work";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run_cli(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt";
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(CPPS_CLI_PATH) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

/// A deliberately tiny experiment: case9, short scenarios, a toy denoiser,
/// two training epochs. Everything the CLI touches, nothing slow.
fs::path write_config() {
  const fs::path path = work_dir() / "exp.cfg";
  std::ofstream out(path);
  out << "[case]\n"
      << "path = " << CPPS_DATA_DIR << "/case9.txt\n"
      << "[scenario]\n"
      << "steps = 60\nanomalies = 4\nnoise_sigma = 0.01\n"
      << "[cyber]\ndistance_scale = 250\n"
      << "[detect]\nlambda_a = 10\nwindow_w = 16\n"
      << "[reward]\nbudget = 3\nlambda_s = 0.5\n"
      << "[diffusion]\nsteps = 3\nschedule = cosine\n"
      << "[denoiser]\nhidden = 4\nblocks = 1\ndropout = 0\n"
      << "[train]\n"
      << "mode = efgd\ntrajectories = 6\ntimestep_samples = 2\nbeta = 0.2\n"
      << "learning_rate = 0.001\nepochs = 2\nbuffer = 8\noptimizer = sgd\n"
      << "checkpoint_every = 1\n"
      << "[eval]\nrollouts = 3\nconditions = 4\n"
      << "[experiment]\nseed = 5\n";
  return path;
}

std::vector<std::string> csv_lines(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

void check_manifest(const fs::path& dir, const std::string& command, std::uint64_t seed) {
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(m.at("command") == command);
  CHECK(m.at("seed") == seed);
  CHECK(m.at("format_version") == 1);
  CHECK(m.at("config_fingerprint").get<std::string>().size() == 16);
}

}  // namespace

TEST_CASE("help and argument errors use the documented exit codes") {
  CHECK(run_cli("--help").code == 0);
  const auto help = run_cli("--help");
  CHECK(help.out.find("simulate") != std::string::npos);
  CHECK(help.out.find("train") != std::string::npos);
  CHECK(help.out.find("evaluate") != std::string::npos);
  CHECK(help.out.find("baseline") != std::string::npos);

  CHECK(run_cli("simulate").code == 1);              // missing --config
  CHECK(run_cli("--config x.cfg").code == 1);        // missing subcommand
  CHECK(run_cli("--config x.cfg frobnicate").code == 1);
  CHECK(run_cli("--config x.cfg simulate --bogus").code == 1);
}

TEST_CASE("runtime failures exit with code 2 and a message") {
  const auto cfg = write_config();

  const auto missing = run_cli("--config " + (work_dir() / "nope.cfg").string() + " simulate");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("cannot read config file") != std::string::npos);

  fs::path bad_case = work_dir() / "bad.cfg";
  {
    std::ofstream out(bad_case);
    out << "[case]\npath = " << (work_dir() / "no_case.txt").string() << "\n";
  }
  const auto nocase = run_cli("--config " + bad_case.string() + " simulate");
  CHECK(nocase.code == 2);
  CHECK(nocase.err.find("cannot open case file") != std::string::npos);

  const auto nockpt = run_cli("--config " + cfg.string() + " evaluate --checkpoint " +
                              (work_dir() / "missing.ckpt").string());
  CHECK(nockpt.code == 2);
  CHECK(nockpt.err.find("cannot read checkpoint") != std::string::npos);

  const auto badbase = run_cli("--config " + cfg.string() + " --out " +
                               (work_dir() / "bb").string() + " baseline --which fancy");
  CHECK(badbase.code == 2);
  CHECK(badbase.err.find("unknown baseline") != std::string::npos);
}

TEST_CASE("simulate writes a replayable scenario archive") {
  const auto cfg = write_config();
  const fs::path a = work_dir() / "sim_a";
  const fs::path b = work_dir() / "sim_b";
  CHECK(run_cli("--config " + cfg.string() + " --out " + a.string() + " simulate").code == 0);
  CHECK(run_cli("--config " + cfg.string() + " --out " + b.string() + " simulate").code == 0);
  check_manifest(a, "simulate", 5);

  const std::string scen_a = slurp(a / "scenarios.json");
  CHECK(scen_a == slurp(b / "scenarios.json"));  // byte-for-byte replay
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));

  const auto j = nlohmann::json::parse(scen_a);
  CHECK(j.at("snapshots").size() == 60);
  CHECK(j.at("anomaly_times").size() == 4);

  // A different master seed draws different scenarios.
  const fs::path c = work_dir() / "sim_c";
  CHECK(run_cli("--config " + cfg.string() + " --seed 99 --out " + c.string() + " simulate")
            .code == 0);
  check_manifest(c, "simulate", 99);
  CHECK(slurp(c / "scenarios.json") != scen_a);
}

TEST_CASE("train writes metrics and loadable checkpoints deterministically") {
  const auto cfg = write_config();
  const fs::path a = work_dir() / "train_a";
  const fs::path b = work_dir() / "train_b";
  CHECK(run_cli("--config " + cfg.string() + " --out " + a.string() + " train").code == 0);
  CHECK(run_cli("--config " + cfg.string() + " --out " + b.string() + " train").code == 0);
  check_manifest(a, "train", 5);

  const auto lines = csv_lines(a / "metrics.csv");
  REQUIRE(lines.size() == 3);  // header + one row per epoch
  CHECK(lines[0] == "epoch,avg_reward,feasible_fraction,buffer_min_reward,wall_time_s");
  CHECK(lines[1].rfind("1,", 0) == 0);
  CHECK(lines[2].rfind("2,", 0) == 0);
  // Replay default: the wall-time column is exactly zero.
  CHECK(lines[1].substr(lines[1].rfind(',') + 1) == "0");

  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(slurp(a / "checkpoint.ckpt") == slurp(b / "checkpoint.ckpt"));
  CHECK(fs::exists(a / "checkpoint_epoch0001.ckpt"));
  CHECK(fs::exists(a / "checkpoint_epoch0002.ckpt"));

  const auto params = cpps::denoiser::load_checkpoint((a / "checkpoint.ckpt").string());
  CHECK(params.hyper.hidden == 4);
  CHECK(params.hyper.blocks == 1);

  // Real timings are opt-in and change only that column.
  const fs::path t = work_dir() / "train_t";
  CHECK(run_cli("--config " + cfg.string() + " --timings --out " + t.string() + " train").code ==
        0);
  const auto timed = csv_lines(t / "metrics.csv");
  CHECK(std::stod(timed[1].substr(timed[1].rfind(',') + 1)) > 0.0);
  const auto strip_last = [](std::string s) { return s.substr(0, s.rfind(',')); };
  CHECK(strip_last(timed[1]) == strip_last(lines[1]));
  CHECK(strip_last(timed[2]) == strip_last(lines[2]));
}

TEST_CASE("evaluate scores rollouts from a checkpoint") {
  const auto cfg = write_config();
  const fs::path train_dir = work_dir() / "train_a";  // produced above
  REQUIRE(fs::exists(train_dir / "checkpoint.ckpt"));

  const fs::path a = work_dir() / "eval_a";
  const fs::path b = work_dir() / "eval_b";
  CHECK(run_cli("--config " + cfg.string() + " --out " + a.string() +
                " evaluate --checkpoint " + (train_dir / "checkpoint.ckpt").string())
            .code == 0);
  CHECK(run_cli("--config " + cfg.string() + " --out " + b.string() +
                " evaluate --checkpoint " + (train_dir / "checkpoint.ckpt").string())
            .code == 0);
  check_manifest(a, "evaluate", 5);
  CHECK(slurp(a / "placements.json") == slurp(b / "placements.json"));
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));

  const auto placements = nlohmann::json::parse(slurp(a / "placements.json"));
  REQUIRE(placements.is_array());
  REQUIRE(placements.size() == 3);  // eval.rollouts
  double best = -1e300;
  for (const auto& p : placements) {
    CHECK(p.contains("nodes"));
    CHECK(p.contains("edges"));
    CHECK(p.contains("mean_reward"));
    CHECK(p.contains("detection_score"));
    CHECK(p.contains("lambda2"));
    CHECK(p.contains("feasible"));
    best = std::max(best, p.at("mean_reward").get<double>());
  }
  const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
  CHECK(summary.at("count") == 3);
  CHECK(summary.at("best_index").get<std::size_t>() < 3);
  CHECK(summary.at("best").at("mean_reward").get<double>() == best);
  CHECK(summary.at("feasible_fraction").get<double>() >= 0.0);
  CHECK(summary.at("feasible_fraction").get<double>() <= 1.0);

  // --count overrides the configured rollout number.
  const fs::path c = work_dir() / "eval_c";
  CHECK(run_cli("--config " + cfg.string() + " --out " + c.string() +
                " evaluate --checkpoint " + (train_dir / "checkpoint.ckpt").string() +
                " --count 2")
            .code == 0);
  CHECK(nlohmann::json::parse(slurp(c / "placements.json")).size() == 2);
}

TEST_CASE("baselines run under the shared evaluation conditions") {
  const auto cfg = write_config();
  for (const std::string which : {"greedy-accuracy", "greedy-robustness", "random"}) {
    const fs::path dir = work_dir() / ("base_" + which);
    CHECK(run_cli("--config " + cfg.string() + " --out " + dir.string() + " baseline --which " +
                  which)
              .code == 0);
    check_manifest(dir, "baseline " + which, 5);
    const auto j = nlohmann::json::parse(slurp(dir / "placement.json"));
    CHECK(j.at("baseline") == which);
    CHECK(j.at("nodes").size() <= 3);  // reward.budget
    CHECK(j.contains("mean_reward"));
  }

  // The random baseline replays byte-for-byte under one seed.
  const fs::path again = work_dir() / "base_random2";
  CHECK(run_cli("--config " + cfg.string() + " --out " + again.string() +
                " baseline --which random")
            .code == 0);
  const auto first = nlohmann::json::parse(slurp(work_dir() / "base_random" / "placement.json"));
  const auto second = nlohmann::json::parse(slurp(again / "placement.json"));
  CHECK(first == second);
}
