#include "cacl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cacl::harness {

namespace {

struct Entry {
    std::string section;
    std::string key;
    std::string value;
};

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return "";
    }
    std::size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<Entry> tokenize(const std::string& text) {
    std::vector<Entry> entries;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) {
            line = line.substr(0, comment);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ContractError("config line " + std::to_string(line_no) +
                                    ": malformed section header '" + line + "'");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ContractError("config line " + std::to_string(line_no) +
                                ": expected key = value, got '" + line + "'");
        }
        if (section.empty()) {
            throw ContractError("config line " + std::to_string(line_no) +
                                ": key outside any [section]");
        }
        entries.push_back(Entry{section, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
    }
    return entries;
}

Entry parse_override(const std::string& text) {
    std::size_t eq = text.find('=');
    std::size_t dot = text.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw ContractError("override '" + text + "' must look like section.key=value");
    }
    return Entry{trim(text.substr(0, dot)), trim(text.substr(dot + 1, eq - dot - 1)),
                 trim(text.substr(eq + 1))};
}

double to_double(const Entry& e) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (ec != std::errc{} || ptr != e.value.data() + e.value.size()) {
        throw ContractError("config key '" + e.section + "." + e.key + "': '" + e.value +
                            "' is not a number");
    }
    return v;
}

long long to_int(const Entry& e) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (ec != std::errc{} || ptr != e.value.data() + e.value.size()) {
        throw ContractError("config key '" + e.section + "." + e.key + "': '" + e.value +
                            "' is not an integer");
    }
    return v;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : value) {
        if (c == ',') {
            parts.push_back(trim(current));
            current.clear();
        } else {
            current += c;
        }
    }
    parts.push_back(trim(current));
    return parts;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void apply_entry(RunConfig& config, const Entry& e) {
    const std::string full = e.section + "." + e.key;
    if (e.section == "run") {
        if (e.key == "method") {
            config.train.method = net::method_from_name(e.value);
        } else if (e.key == "env") {
            // handled in the pre-pass; validate anyway
            env::env_kind_from_name(e.value);
        } else if (e.key == "seeds") {
            config.seeds.clear();
            for (const auto& part : split_list(e.value)) {
                Entry tmp{e.section, e.key, part};
                config.seeds.push_back(static_cast<std::uint64_t>(to_int(tmp)));
            }
        } else if (e.key == "total_steps") {
            config.train.total_steps = to_int(e);
        } else if (e.key == "eval_every") {
            config.train.eval_every = to_int(e);
        } else if (e.key == "eval_episodes") {
            config.train.eval_episodes = static_cast<int>(to_int(e));
        } else if (e.key == "checkpoint_every") {
            config.train.checkpoint_every = to_int(e);
        } else if (e.key == "workers") {
            config.train.workers = static_cast<int>(to_int(e));
        } else if (e.key == "out_dir") {
            config.out_dir = e.value;
        } else {
            throw ContractError("unknown config key '" + full + "'");
        }
    } else if (e.section == "env") {
        if (e.key == "grid_size") {
            config.env.grid_size = static_cast<int>(to_int(e));
        } else if (e.key == "max_steps") {
            config.env.max_steps = static_cast<int>(to_int(e));
        } else if (e.key == "predators") {
            config.env.predators = static_cast<int>(to_int(e));
        } else if (e.key == "preys") {
            config.env.preys = static_cast<int>(to_int(e));
        } else if (e.key == "view_radius") {
            config.env.view_radius = static_cast<int>(to_int(e));
        } else if (e.key == "capture_reward") {
            config.env.capture_reward = to_double(e);
        } else if (e.key == "attempt_penalty") {
            config.env.attempt_penalty = to_double(e);
        } else if (e.key == "step_penalty") {
            config.env.step_penalty = to_double(e);
        } else if (e.key == "prey_move_probs") {
            auto parts = split_list(e.value);
            if (parts.size() != config.env.prey_move_probs.size()) {
                throw ContractError("config key '" + full + "': expected 5 probabilities");
            }
            for (std::size_t i = 0; i < parts.size(); ++i) {
                Entry tmp{e.section, e.key, parts[i]};
                config.env.prey_move_probs[i] = to_double(tmp);
            }
        } else if (e.key == "cars") {
            config.env.cars = static_cast<int>(to_int(e));
        } else if (e.key == "vision") {
            config.env.vision = static_cast<int>(to_int(e));
        } else if (e.key == "rate_min") {
            config.env.rate_min = to_double(e);
        } else if (e.key == "rate_max") {
            config.env.rate_max = to_double(e);
        } else if (e.key == "collision_penalty") {
            config.env.collision_penalty = to_double(e);
        } else if (e.key == "car_time_penalty") {
            config.env.car_time_penalty = to_double(e);
        } else {
            throw ContractError("unknown config key '" + full + "'");
        }
    } else if (e.section == "train") {
        if (e.key == "gamma") {
            config.train.gamma = to_double(e);
        } else if (e.key == "entropy_coef") {
            config.train.entropy_coef = to_double(e);
        } else if (e.key == "value_coef") {
            config.train.value_coef = to_double(e);
        } else if (e.key == "lr") {
            config.train.lr = to_double(e);
        } else if (e.key == "adam_eps") {
            config.train.adam_eps = to_double(e);
        } else if (e.key == "adam_beta1") {
            config.train.adam_beta1 = to_double(e);
        } else if (e.key == "adam_beta2") {
            config.train.adam_beta2 = to_double(e);
        } else if (e.key == "grad_clip") {
            config.train.grad_clip = to_double(e);
        } else if (e.key == "nstep") {
            config.train.nstep = static_cast<int>(to_int(e));
        } else {
            throw ContractError("unknown config key '" + full + "'");
        }
    } else if (e.section == "grounding") {
        if (e.key == "tau") {
            config.cacl.tau = to_double(e);
        } else if (e.key == "kappa") {
            config.cacl.kappa = to_double(e);
        } else if (e.key == "buffer_capacity") {
            config.cacl.buffer_capacity = static_cast<int>(to_int(e));
        } else if (e.key == "batch_trajectories") {
            config.cacl.batch_trajectories = static_cast<int>(to_int(e));
        } else if (e.key == "max_messages_per_trajectory") {
            config.cacl.max_messages_per_trajectory = static_cast<int>(to_int(e));
        } else {
            throw ContractError("unknown config key '" + full + "'");
        }
    } else if (e.section == "analysis") {
        if (e.key == "eps") {
            config.analysis_eps = to_double(e);
        } else if (e.key == "min_pts") {
            config.analysis_min_pts = static_cast<int>(to_int(e));
        } else if (e.key == "episodes") {
            config.analysis_episodes = static_cast<int>(to_int(e));
        } else {
            throw ContractError("unknown config key '" + full + "'");
        }
    } else {
        throw ContractError("unknown config section '" + e.section + "'");
    }
}

void validate(const RunConfig& config) {
    if (config.seeds.empty()) {
        throw ContractError("config: seed list is empty");
    }
    if (config.train.nstep < 1) {
        throw ContractError("config: train.nstep must be at least 1");
    }
    if (config.train.workers < 1) {
        throw ContractError("config: run.workers must be at least 1");
    }
    if (config.train.eval_episodes < 1) {
        throw ContractError("config: run.eval_episodes must be at least 1");
    }
    if (!(config.cacl.tau > 0.0)) {
        throw ContractError("config: grounding.tau must be positive");
    }
    if (config.cacl.buffer_capacity < 1 || config.cacl.batch_trajectories < 1) {
        throw ContractError("config: grounding buffer sizes must be positive");
    }
    if (config.cacl.batch_trajectories > config.cacl.buffer_capacity) {
        throw ContractError("config: grounding.batch_trajectories exceeds buffer capacity");
    }
    if (!(config.analysis_eps > 0.0) || config.analysis_min_pts < 1 ||
        config.analysis_episodes < 1) {
        throw ContractError("config: invalid analysis parameters");
    }
    double prob_sum = 0.0;
    for (double p : config.env.prey_move_probs) {
        if (p < 0.0) {
            throw ContractError("config: env.prey_move_probs must be non-negative");
        }
        prob_sum += p;
    }
    if (std::abs(prob_sum - 1.0) > 1e-9) {
        throw ContractError("config: env.prey_move_probs must sum to 1");
    }
}

} // namespace

RunConfig parse_run_config(const std::string& text, std::span<const std::string> overrides) {
    std::vector<Entry> entries = tokenize(text);
    for (const std::string& o : overrides) {
        entries.push_back(parse_override(o));
    }
    // The environment kind decides the env-section defaults, so resolve it
    // before applying anything else.
    env::EnvKind kind = env::EnvKind::kPredatorPrey;
    for (const Entry& e : entries) {
        if (e.section == "run" && e.key == "env") {
            kind = env::env_kind_from_name(e.value);
        }
    }
    RunConfig config;
    config.env = env::default_env_config(kind);
    for (const Entry& e : entries) {
        apply_entry(config, e);
    }
    validate(config);
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path,
                          std::span<const std::string> overrides) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("config: cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str(), overrides);
}

std::string to_ini(const RunConfig& config) {
    std::ostringstream out;
    out << "[run]\n";
    out << "method = " << net::method_name(config.train.method) << "\n";
    out << "env = " << env::env_kind_name(config.env.kind) << "\n";
    out << "seeds = ";
    for (std::size_t i = 0; i < config.seeds.size(); ++i) {
        out << (i ? "," : "") << config.seeds[i];
    }
    out << "\n";
    out << "total_steps = " << config.train.total_steps << "\n";
    out << "eval_every = " << config.train.eval_every << "\n";
    out << "eval_episodes = " << config.train.eval_episodes << "\n";
    out << "checkpoint_every = " << config.train.checkpoint_every << "\n";
    out << "workers = " << config.train.workers << "\n";
    out << "out_dir = " << config.out_dir << "\n";
    out << "\n[env]\n";
    out << "grid_size = " << config.env.grid_size << "\n";
    out << "max_steps = " << config.env.max_steps << "\n";
    if (config.env.kind == env::EnvKind::kPredatorPrey) {
        out << "predators = " << config.env.predators << "\n";
        out << "preys = " << config.env.preys << "\n";
        out << "view_radius = " << config.env.view_radius << "\n";
        out << "capture_reward = " << format_double(config.env.capture_reward) << "\n";
        out << "attempt_penalty = " << format_double(config.env.attempt_penalty) << "\n";
        out << "step_penalty = " << format_double(config.env.step_penalty) << "\n";
        out << "prey_move_probs = ";
        for (std::size_t i = 0; i < config.env.prey_move_probs.size(); ++i) {
            out << (i ? "," : "") << format_double(config.env.prey_move_probs[i]);
        }
        out << "\n";
    } else {
        out << "cars = " << config.env.cars << "\n";
        out << "vision = " << config.env.vision << "\n";
        out << "rate_min = " << format_double(config.env.rate_min) << "\n";
        out << "rate_max = " << format_double(config.env.rate_max) << "\n";
        out << "collision_penalty = " << format_double(config.env.collision_penalty) << "\n";
        out << "car_time_penalty = " << format_double(config.env.car_time_penalty) << "\n";
    }
    out << "\n[train]\n";
    out << "gamma = " << format_double(config.train.gamma) << "\n";
    out << "entropy_coef = " << format_double(config.train.entropy_coef) << "\n";
    out << "value_coef = " << format_double(config.train.value_coef) << "\n";
    out << "lr = " << format_double(config.train.lr) << "\n";
    out << "adam_eps = " << format_double(config.train.adam_eps) << "\n";
    out << "adam_beta1 = " << format_double(config.train.adam_beta1) << "\n";
    out << "adam_beta2 = " << format_double(config.train.adam_beta2) << "\n";
    out << "grad_clip = " << format_double(config.train.grad_clip) << "\n";
    out << "nstep = " << config.train.nstep << "\n";
    out << "\n[grounding]\n";
    out << "tau = " << format_double(config.cacl.tau) << "\n";
    out << "kappa = " << format_double(config.cacl.kappa) << "\n";
    out << "buffer_capacity = " << config.cacl.buffer_capacity << "\n";
    out << "batch_trajectories = " << config.cacl.batch_trajectories << "\n";
    out << "max_messages_per_trajectory = " << config.cacl.max_messages_per_trajectory << "\n";
    out << "\n[analysis]\n";
    out << "eps = " << format_double(config.analysis_eps) << "\n";
    out << "min_pts = " << config.analysis_min_pts << "\n";
    out << "episodes = " << config.analysis_episodes << "\n";
    return out.str();
}

} // namespace cacl::harness
