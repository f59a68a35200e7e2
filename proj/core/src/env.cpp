#include "cacl/env.hpp"

#include "cacl/errors.hpp"
#include "cacl/predator_prey.hpp"
#include "cacl/traffic_junction.hpp"

namespace cacl::env {

std::string env_kind_name(EnvKind kind) {
    return kind == EnvKind::kPredatorPrey ? "predator_prey" : "traffic_junction";
}

EnvKind env_kind_from_name(const std::string& name) {
    if (name == "predator_prey" || name == "predator-prey" || name == "pp") {
        return EnvKind::kPredatorPrey;
    }
    if (name == "traffic_junction" || name == "traffic-junction" || name == "tj") {
        return EnvKind::kTrafficJunction;
    }
    throw ContractError("unknown environment '" + name +
                        "' (expected predator_prey or traffic_junction)");
}

EnvConfig default_env_config(EnvKind kind) {
    EnvConfig config;
    config.kind = kind;
    if (kind == EnvKind::kPredatorPrey) {
        config.grid_size = 7;
        config.max_steps = 200;
    } else {
        config.grid_size = 8;
        config.max_steps = 20;
    }
    return config;
}

bool Env::agent_active(int) const { return true; }
void Env::set_progress(double) {}

std::unique_ptr<Env> make_env(const EnvConfig& config) {
    if (config.kind == EnvKind::kPredatorPrey) {
        return std::make_unique<PredatorPreyEnv>(config);
    }
    return std::make_unique<TrafficJunctionEnv>(config);
}

} // namespace cacl::env
