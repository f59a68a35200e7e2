#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "cacl/checkpoint.hpp"
#include "cacl/config.hpp"

using namespace cacl;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "cacl_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

harness::RunConfig small_run(std::uint64_t seed, long long steps) {
    harness::RunConfig cfg = harness::parse_run_config("[run]\nenv = predator_prey\n");
    cfg.env.grid_size = 5;
    cfg.env.predators = 2;
    cfg.env.preys = 1;
    cfg.env.max_steps = 25;
    cfg.train.workers = 1;
    cfg.train.total_steps = steps;
    cfg.train.eval_every = steps / 2;
    cfg.train.eval_episodes = 2;
    cfg.seeds = {seed};
    return cfg;
}

train::TrainerOptions options_for(const harness::RunConfig& cfg, const fs::path& out) {
    train::TrainerOptions options;
    options.env_config = cfg.env;
    options.train = cfg.train;
    options.cacl = cfg.cacl;
    options.seed = cfg.seeds.front();
    options.out_dir = out;
    options.resolved_config_ini = harness::to_ini(cfg);
    return options;
}

// metrics.csv with the wall-time column blanked out.
std::string metrics_without_walltime(const fs::path& p) {
    std::istringstream in(read_file(p));
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        std::size_t first = line.find(',');
        std::size_t second = line.find(',', first + 1);
        if (first != std::string::npos && second != std::string::npos) {
            out << line.substr(0, first) << ",<wall>" << line.substr(second) << '\n';
        } else {
            out << line << '\n';
        }
    }
    return out.str();
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("config: defaults match the published hyperparameters") {
    auto cfg = harness::parse_run_config("[run]\nenv = predator_prey\nmethod = cacl\n");
    CHECK(cfg.train.lr == 0.0003);
    CHECK(cfg.train.gamma == 0.99);
    CHECK(cfg.train.entropy_coef == 0.01);
    CHECK(cfg.train.value_coef == 0.5);
    CHECK(cfg.train.adam_eps == 0.001);
    CHECK(cfg.train.grad_clip == 2500.0);
    CHECK(cfg.train.nstep == 5);
    CHECK(cfg.train.workers == 12);
    CHECK(cfg.train.eval_episodes == 12);
    CHECK(cfg.cacl.tau == 0.1);
    CHECK(cfg.cacl.kappa == 0.5);
    CHECK(cfg.cacl.buffer_capacity == 64);
    CHECK(cfg.cacl.batch_trajectories == 8);
    CHECK(cfg.analysis_eps == 0.15);
    CHECK(cfg.analysis_min_pts == 4);
    CHECK(cfg.analysis_episodes == 7);
    // Predator-prey defaults
    CHECK(cfg.env.grid_size == 7);
    CHECK(cfg.env.max_steps == 200);
    CHECK(cfg.env.predators == 4);
    CHECK(cfg.env.preys == 2);
    CHECK(cfg.env.view_radius == 1);
    CHECK(cfg.env.capture_reward == 10.0);
    CHECK(cfg.env.attempt_penalty == -0.5);
    CHECK(cfg.env.step_penalty == -0.01);
    CHECK(cfg.env.prey_move_probs ==
          std::array<double, 5>{0.175, 0.175, 0.175, 0.175, 0.3});

    auto tj = harness::parse_run_config("[run]\nenv = traffic_junction\n");
    CHECK(tj.env.grid_size == 8);
    CHECK(tj.env.max_steps == 20);
    CHECK(tj.env.cars == 5);
    CHECK(tj.env.vision == 1);
    CHECK(tj.env.rate_min == 0.1);
    CHECK(tj.env.rate_max == 0.3);
}

TEST_CASE("config: unknown keys are rejected by name") {
    CHECK_THROWS_WITH_AS(harness::parse_run_config("[run]\nfoo = 1\n"),
                         doctest::Contains("run.foo"), ContractError);
    CHECK_THROWS_WITH_AS(harness::parse_run_config("[typo]\nlr = 1\n"),
                         doctest::Contains("typo"), ContractError);
    CHECK_THROWS_WITH_AS(harness::parse_run_config("[train]\nlearning_rate = 1\n"),
                         doctest::Contains("train.learning_rate"), ContractError);
}

TEST_CASE("config: overrides apply after the file") {
    std::vector<std::string> overrides{"grounding.kappa=0", "run.seeds=4,5",
                                       "env.grid_size=5"};
    auto cfg = harness::parse_run_config("[run]\nenv = predator_prey\n", overrides);
    CHECK(cfg.cacl.kappa == 0.0);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5});
    CHECK(cfg.env.grid_size == 5);
    CHECK_THROWS_WITH_AS(
        harness::parse_run_config("[run]\nenv = predator_prey\n",
                                  std::vector<std::string>{"nonsense"}),
        doctest::Contains("nonsense"), ContractError);
}

TEST_CASE("config: serialization round-trips exactly") {
    auto cfg = harness::parse_run_config(
        "[run]\nenv = traffic_junction\nmethod = aecomm\nseeds = 3,9\n"
        "[train]\nlr = 0.00025\n[grounding]\ntau = 0.07\n");
    std::string ini = harness::to_ini(cfg);
    auto reparsed = harness::parse_run_config(ini);
    CHECK(harness::to_ini(reparsed) == ini);
    CHECK(reparsed.train.lr == cfg.train.lr);
    CHECK(reparsed.cacl.tau == cfg.cacl.tau);
}

TEST_CASE("config: validation failures") {
    CHECK_THROWS_AS(harness::parse_run_config("[grounding]\ntau = 0\n"), ContractError);
    CHECK_THROWS_AS(harness::parse_run_config("[run]\nworkers = 0\n"), ContractError);
    CHECK_THROWS_AS(
        harness::parse_run_config("[env]\nprey_move_probs = 0.5,0.5,0.5,0.5,0.5\n"),
        ContractError);
    CHECK_THROWS_AS(harness::parse_run_config("[train]\nlr = abc\n"), ContractError);
}

TEST_CASE("checkpoint: save-load-save produces identical bytes") {
    auto dir = temp_dir("roundtrip");
    auto cfg = small_run(11, 100);
    train::Trainer a(options_for(cfg, dir / "a"));
    a.run();
    const fs::path first = dir / "a" / "checkpoint_final.ckpt";
    REQUIRE(fs::exists(first));

    train::Trainer b(options_for(cfg, dir / "b"));
    b.restore(first);
    const fs::path second = dir / "second.ckpt";
    b.save_checkpoint(second);
    CHECK(read_file(first) == read_file(second));
}

TEST_CASE("checkpoint: wrong version and corrupt files are rejected with context") {
    auto dir = temp_dir("rejects");
    auto cfg = small_run(12, 50);
    train::Trainer a(options_for(cfg, dir / "a"));
    a.run();
    const fs::path good = dir / "a" / "checkpoint_final.ckpt";

    // Patch the version field (bytes 8..11, after the magic).
    std::string bytes = read_file(good);
    bytes[8] = 99;
    const fs::path bad_version = dir / "bad_version.ckpt";
    std::ofstream(bad_version, std::ios::binary) << bytes;
    CHECK_THROWS_WITH_AS(harness::load_checkpoint_header(bad_version),
                         doctest::Contains("version"), IoError);

    // Truncated file: the failing section is named.
    const fs::path truncated = dir / "truncated.ckpt";
    std::ofstream(truncated, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    train::Trainer c(options_for(cfg, dir / "c"));
    CHECK_THROWS_AS(c.restore(truncated), IoError);

    // Not a checkpoint at all.
    const fs::path garbage = dir / "garbage.ckpt";
    std::ofstream(garbage, std::ios::binary) << "hello world, not a checkpoint";
    CHECK_THROWS_WITH_AS(harness::load_checkpoint_header(garbage),
                         doctest::Contains("magic"), IoError);
}

TEST_CASE("checkpoint: incompatible architecture is rejected") {
    auto dir = temp_dir("incompatible");
    auto cfg = small_run(13, 50);
    train::Trainer a(options_for(cfg, dir / "a"));
    a.run();

    auto other = cfg;
    other.env.grid_size = 6; // different observation size
    train::Trainer b(options_for(other, dir / "b"));
    CHECK_THROWS_AS(b.restore(dir / "a" / "checkpoint_final.ckpt"), IoError);
}

TEST_CASE("checkpoint: resumed single-worker runs match uninterrupted ones bitwise") {
    auto dir = temp_dir("resume");
    auto cfg = small_run(14, 400);
    cfg.train.eval_every = 100;
    cfg.train.checkpoint_every = 200;

    train::Trainer full(options_for(cfg, dir / "full"));
    full.run();

    train::Trainer resumed(options_for(cfg, dir / "resumed"));
    resumed.restore(dir / "full" / "checkpoint_200.ckpt");
    CHECK(resumed.steps_done() == 200);
    resumed.run();

    CHECK(read_file(dir / "full" / "checkpoint_final.ckpt") ==
          read_file(dir / "resumed" / "checkpoint_final.ckpt"));

    // The resumed metrics tail equals the uninterrupted rows after step 200,
    // wall time aside.
    std::string full_rows = metrics_without_walltime(dir / "full" / "metrics.csv");
    std::string resumed_rows = metrics_without_walltime(dir / "resumed" / "metrics.csv");
    std::istringstream full_in(full_rows);
    std::vector<std::string> tail;
    std::string line;
    while (std::getline(full_in, line)) {
        if (!line.empty() && line.find("step") != 0) {
            long long step = std::stoll(line.substr(0, line.find(',')));
            if (step > 200) {
                tail.push_back(line);
            }
        }
    }
    std::istringstream resumed_in(resumed_rows);
    std::vector<std::string> resumed_tail;
    while (std::getline(resumed_in, line)) {
        if (!line.empty() && line.find("step") != 0) {
            resumed_tail.push_back(line);
        }
    }
    CHECK(tail == resumed_tail);
}

TEST_CASE("checkpoint: evaluation from a reloaded team reproduces the trainer's team") {
    auto dir = temp_dir("inference");
    auto cfg = small_run(15, 100);
    train::Trainer a(options_for(cfg, dir / "a"));
    a.run();
    const fs::path ckpt = dir / "a" / "checkpoint_final.ckpt";

    auto header = harness::load_checkpoint_header(ckpt);
    CHECK(header.step == 100);
    auto parsed = harness::parse_run_config(header.config_ini);
    auto acfg = train::derive_agent_config(parsed.env, parsed.method());
    auto team = net::make_team(acfg, parsed.seeds.front());
    harness::load_checkpoint_agents(ckpt, team);

    auto from_disk = train::evaluate(team, parsed.env, 3, 555);
    auto from_memory = train::evaluate(a.agents(), parsed.env, 3, 555);
    CHECK(from_disk.episode_rewards == from_memory.episode_rewards);
}

} // TEST_SUITE
