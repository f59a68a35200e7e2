#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cacl/env.hpp"
#include "cacl/grounding.hpp"
#include "cacl/trainer.hpp"

namespace cacl::harness {

// Resolved experiment configuration. Defaults are the trainer's published
// hyperparameters; a run needs only an environment, a method and a seed.
struct RunConfig {
    env::EnvConfig env = env::default_env_config(env::EnvKind::kPredatorPrey);
    train::TrainConfig train;
    grounding::CaclConfig cacl;
    std::vector<std::uint64_t> seeds{1};
    std::string out_dir = "runs";

    double analysis_eps = 0.15;
    int analysis_min_pts = 4;
    int analysis_episodes = 7;

    net::Method method() const { return train.method; }
};

// Plain-text key-value config with [run], [env], [train], [grounding] and
// [analysis] sections. Unknown sections or keys are rejected with the
// offending name. Overrides are "section.key=value" strings applied after
// the file.
RunConfig parse_run_config(const std::string& text,
                           std::span<const std::string> overrides = {});
RunConfig load_run_config(const std::filesystem::path& path,
                          std::span<const std::string> overrides = {});

// Canonical serialization; parse_run_config(to_ini(c)) resolves to c.
std::string to_ini(const RunConfig& config);

} // namespace cacl::harness
