#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "cacl/analysis.hpp"
#include "cacl/checkpoint.hpp"
#include "cacl/config.hpp"
#include "cacl/trainer.hpp"

namespace fs = std::filesystem;

namespace {

fs::path output_root() {
    if (const char* root = std::getenv("CACL_OUT_ROOT")) {
        return fs::path(root);
    }
    return fs::current_path();
}

fs::path resolve_out(const fs::path& p) {
    return p.is_absolute() ? p : output_root() / p;
}

fs::path resolve_config_path(const std::string& name) {
    fs::path direct(name);
    if (fs::exists(direct)) {
        return direct;
    }
    fs::path preset = fs::path("configs") / (name + ".ini");
    if (fs::exists(preset)) {
        return preset;
    }
    throw cacl::IoError("config '" + name + "' not found (tried '" + direct.string() +
                        "' and '" + preset.string() + "')");
}

struct LoadedCheckpoint {
    cacl::harness::RunConfig config;
    cacl::harness::CheckpointHeader header;
    std::vector<cacl::net::AgentNet> agents;
};

LoadedCheckpoint load_for_inference(const fs::path& checkpoint) {
    LoadedCheckpoint loaded;
    loaded.header = cacl::harness::load_checkpoint_header(checkpoint);
    loaded.config = cacl::harness::parse_run_config(loaded.header.config_ini);
    auto agent_config =
        cacl::train::derive_agent_config(loaded.config.env, loaded.config.method());
    loaded.agents = cacl::net::make_team(agent_config, loaded.config.seeds.front());
    cacl::harness::load_checkpoint_agents(checkpoint, loaded.agents);
    return loaded;
}

double checkpoint_progress(const cacl::harness::RunConfig& config,
                           const cacl::harness::CheckpointHeader& header) {
    if (config.train.total_steps <= 0) {
        return 1.0;
    }
    double p = static_cast<double>(header.step) /
               static_cast<double>(config.train.total_steps);
    return std::min(p, 1.0);
}

void write_message_csv(const fs::path& path,
                       const std::vector<cacl::train::MessageRow>& rows,
                       const std::vector<int>& labels) {
    std::ofstream out(path);
    out << "episode,step,agent,m1,m2,m3,m4,label\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        out << row.episode << ',' << row.step << ',' << row.agent;
        for (double v : row.message) {
            out << ',' << v;
        }
        out << ',' << (i < labels.size() ? labels[i] : cacl::analysis::kNoiseLabel) << '\n';
    }
}

int cmd_train(const std::string& config_name, std::vector<std::string> overrides,
              std::vector<std::uint64_t> seeds, const std::string& out_override,
              const std::string& resume) {
    cacl::harness::RunConfig config =
        cacl::harness::load_run_config(resolve_config_path(config_name), overrides);
    if (!seeds.empty()) {
        config.seeds = seeds;
    }
    if (!out_override.empty()) {
        config.out_dir = out_override;
    }
    if (!resume.empty() && config.seeds.size() != 1) {
        throw cacl::ContractError("--resume requires exactly one seed");
    }
    const std::string run_name = cacl::net::method_name(config.method()) + "_" +
                                 cacl::env::env_kind_name(config.env.kind);
    for (std::uint64_t seed : config.seeds) {
        cacl::harness::RunConfig per_seed = config;
        per_seed.seeds = {seed};
        fs::path run_dir =
            resolve_out(config.out_dir) / run_name / ("seed_" + std::to_string(seed));
        cacl::train::TrainerOptions options;
        options.env_config = per_seed.env;
        options.train = per_seed.train;
        options.cacl = per_seed.cacl;
        options.seed = seed;
        options.out_dir = run_dir;
        options.resolved_config_ini = cacl::harness::to_ini(per_seed);
        cacl::train::Trainer trainer(std::move(options));
        if (!resume.empty()) {
            trainer.restore(resume);
            std::cout << "resumed from " << resume << " at step " << trainer.steps_done()
                      << "\n";
        }
        std::cout << "training " << run_name << " seed " << seed << " -> " << run_dir.string()
                  << std::endl;
        trainer.run();
        std::cout << "done: " << trainer.steps_done() << " env steps\n";
    }
    return 0;
}

int cmd_eval(const std::string& checkpoint, int episodes, std::uint64_t seed,
             std::string out_dir) {
    if (episodes <= 0) {
        throw cacl::ContractError("eval: --episodes must be positive");
    }
    LoadedCheckpoint loaded = load_for_inference(checkpoint);
    double progress = checkpoint_progress(loaded.config, loaded.header);
    cacl::train::EvalResult result = cacl::train::evaluate(
        loaded.agents, loaded.config.env, episodes, seed, progress);

    fs::path out = out_dir.empty() ? fs::path(checkpoint).parent_path() : resolve_out(out_dir);
    fs::create_directories(out);

    {
        std::ofstream summary(out / "eval_summary.txt");
        summary << std::setprecision(17);
        summary << "episodes = " << result.episodes << "\n";
        summary << "seed = " << seed << "\n";
        summary << "reward_mean = " << result.reward_mean << "\n";
        summary << "reward_se = " << result.reward_se << "\n";
        summary << "success_rate = " << result.success_rate << "\n";
    }
    {
        std::ofstream rows(out / "eval_episodes.csv");
        rows << "episode,reward,success\n";
        rows << std::setprecision(17);
        for (std::size_t e = 0; e < result.episode_rewards.size(); ++e) {
            rows << e << ',' << result.episode_rewards[e] << ','
                 << static_cast<int>(result.episode_success[e]) << '\n';
        }
    }
    {
        std::ofstream traj(out / "eval_trajectories.csv");
        traj << "episode,step,agent,action,reward,m1,m2,m3,m4\n";
        traj << std::setprecision(17);
        for (const auto& row : result.rows) {
            traj << row.episode << ',' << row.step << ',' << row.agent << ',' << row.action
                 << ',' << row.reward;
            for (double v : row.message) {
                traj << ',' << v;
            }
            traj << '\n';
        }
    }
    std::cout << "episodes " << result.episodes << ": reward " << result.reward_mean << " +- "
              << result.reward_se << " (se), success rate " << result.success_rate << "\n"
              << "wrote " << (out / "eval_summary.txt").string() << std::endl;
    return 0;
}

int cmd_analyze(const std::string& checkpoint, int episodes, double eps, int min_pts,
                std::uint64_t seed, std::string out_dir) {
    LoadedCheckpoint loaded = load_for_inference(checkpoint);
    cacl::analysis::AnalyzeOptions options;
    options.episodes = episodes > 0 ? episodes : loaded.config.analysis_episodes;
    options.eps = eps > 0 ? eps : loaded.config.analysis_eps;
    options.min_pts = min_pts > 0 ? min_pts : loaded.config.analysis_min_pts;
    options.seed = seed;
    options.env_progress = checkpoint_progress(loaded.config, loaded.header);
    cacl::analysis::AnalyzeResult result =
        cacl::analysis::analyze_run(loaded.agents, loaded.config.env, options);

    fs::path out = out_dir.empty() ? fs::path(checkpoint).parent_path() : resolve_out(out_dir);
    fs::create_directories(out);
    {
        std::ofstream report(out / "cluster_report.txt");
        report << std::setprecision(17);
        report << "nc = " << result.report.num_clusters << "\n";
        report << "np = " << result.report.num_noise << "\n";
        if (result.report.silhouette_coefficient) {
            report << "sc = " << *result.report.silhouette_coefficient << "\n";
        } else {
            report << "sc = unavailable\n";
        }
        report << "eps = " << options.eps << "\n";
        report << "min_pts = " << options.min_pts << "\n";
        report << "episodes = " << options.episodes << "\n";
        report << "messages = " << result.points.size() << "\n";
    }
    write_message_csv(out / "messages.csv", result.points, result.report.labels);

    std::cout << "clusters " << result.report.num_clusters << ", noise "
              << result.report.num_noise << ", silhouette ";
    if (result.report.silhouette_coefficient) {
        std::cout << *result.report.silhouette_coefficient;
    } else {
        std::cout << "unavailable";
    }
    std::cout << " (" << result.points.size() << " messages)\n"
              << "wrote " << (out / "cluster_report.txt").string() << std::endl;
    return 0;
}

int cmd_inspect(const std::string& config_name, std::vector<std::string> overrides) {
    cacl::harness::RunConfig config =
        cacl::harness::load_run_config(resolve_config_path(config_name), overrides);
    std::cout << cacl::harness::to_ini(config);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"decentralized multi-agent RL with contrastively grounded communication"};
    app.require_subcommand(1);

    std::string config_name;
    std::vector<std::string> overrides;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    std::string resume;
    std::string checkpoint;
    int episodes = 0;
    std::uint64_t eval_seed = 1;
    double eps = 0.0;
    int min_pts = 0;
    double kappa = -1.0;
    long long steps = -1;
    int workers = -1;

    CLI::App* train = app.add_subcommand("train", "train a team on a config");
    train->add_option("--config", config_name, "config file path or configs/ preset name")
        ->required();
    train->add_option("--seed", seeds, "seed(s); overrides the config's seed list");
    train->add_option("--set", overrides, "override, e.g. --set train.lr=0.001");
    train->add_option("--kappa", kappa, "shortcut for --set grounding.kappa=...");
    train->add_option("--steps", steps, "shortcut for --set run.total_steps=...");
    train->add_option("--workers", workers, "shortcut for --set run.workers=...");
    train->add_option("--out", out_dir, "output directory (under CACL_OUT_ROOT if relative)");
    train->add_option("--resume", resume, "checkpoint to resume from (single seed)");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval->add_option("--episodes", episodes, "evaluation episodes")->default_val(12);
    eval->add_option("--seed", eval_seed, "evaluation seed")->default_val(1);
    eval->add_option("--out", out_dir, "output directory (default: checkpoint's directory)");

    CLI::App* analyze = app.add_subcommand("analyze", "cluster a checkpoint's sent messages");
    analyze->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    analyze->add_option("--episodes", episodes, "evaluation episodes (default from config: 7)");
    analyze->add_option("--eps", eps, "DBSCAN eps (default from config: 0.15)");
    analyze->add_option("--min-pts", min_pts, "DBSCAN min_pts (default from config: 4)");
    analyze->add_option("--seed", eval_seed, "evaluation seed")->default_val(1);
    analyze->add_option("--out", out_dir, "output directory (default: checkpoint's directory)");

    CLI::App* inspect = app.add_subcommand("inspect-config", "print the resolved config");
    inspect->add_option("--config", config_name, "config file path or preset name")->required();
    inspect->add_option("--set", overrides, "override, e.g. --set train.lr=0.001");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            if (kappa >= 0.0) {
                overrides.push_back("grounding.kappa=" + std::to_string(kappa));
            }
            if (steps >= 0) {
                overrides.push_back("run.total_steps=" + std::to_string(steps));
            }
            if (workers > 0) {
                overrides.push_back("run.workers=" + std::to_string(workers));
            }
            return cmd_train(config_name, overrides, seeds, out_dir, resume);
        }
        if (eval->parsed()) {
            return cmd_eval(checkpoint, episodes, eval_seed, out_dir);
        }
        if (analyze->parsed()) {
            return cmd_analyze(checkpoint, episodes, eps, min_pts, eval_seed, out_dir);
        }
        if (inspect->parsed()) {
            return cmd_inspect(config_name, overrides);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
