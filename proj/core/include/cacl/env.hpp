#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cacl/rng.hpp"

namespace cacl::env {

enum class EnvKind { kPredatorPrey, kTrafficJunction };

std::string env_kind_name(EnvKind kind);
EnvKind env_kind_from_name(const std::string& name);

struct EnvConfig {
    EnvKind kind = EnvKind::kPredatorPrey;
    int grid_size = 7;
    int max_steps = 200;

    // Predator-prey
    int predators = 4;
    int preys = 2;
    int view_radius = 1; // 3x3 field of view
    double capture_reward = 10.0;
    double attempt_penalty = -0.5;
    double step_penalty = -0.01;
    // LEFT, RIGHT, UP, DOWN, NO-OP move probabilities of a prey.
    std::array<double, 5> prey_move_probs{0.175, 0.175, 0.175, 0.175, 0.3};

    // Traffic junction
    int cars = 5;
    int vision = 1;
    double rate_min = 0.1;
    double rate_max = 0.3;
    double collision_penalty = -10.0;
    double car_time_penalty = -0.01;

    int num_agents() const { return kind == EnvKind::kPredatorPrey ? predators : cars; }
};

// Defaults per environment kind (grid size and episode cap differ).
EnvConfig default_env_config(EnvKind kind);

struct StepInfo {
    int captures = 0;        // preys captured this step
    int failed_attempts = 0; // preys with an adjacent predator, not captured
    int collisions = 0;      // colliding cars this step
    bool success = false;    // meaningful when done
};

struct StepResult {
    std::vector<std::vector<double>> observations; // one per agent
    double reward = 0.0;                           // shared by all agents
    bool done = false;
    StepInfo info;
};

class Env {
public:
    virtual ~Env() = default;

    virtual EnvKind kind() const = 0;
    virtual int num_agents() const = 0;
    virtual int obs_dim() const = 0;
    virtual int num_actions() const = 0;
    virtual int max_steps() const = 0;

    virtual std::vector<std::vector<double>> reset(std::uint64_t seed) = 0;
    virtual StepResult step(std::span<const int> actions) = 0;

    virtual bool agent_active(int agent) const;
    virtual int steps_taken() const = 0;

    // Training-curriculum hook; progress in [0,1]. Ramps the traffic arrival
    // rate, no-op elsewhere.
    virtual void set_progress(double progress);

    // Full mid-episode state, for checkpoint resume.
    virtual void save_state(std::ostream& out) const = 0;
    virtual void load_state(std::istream& in) = 0;
};

std::unique_ptr<Env> make_env(const EnvConfig& config);

// Shared action indexing for the gridworld moves.
inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;
inline constexpr int kUp = 2;
inline constexpr int kDown = 3;
inline constexpr int kNoOp = 4;

inline constexpr int kGas = 0;
inline constexpr int kBrake = 1;

} // namespace cacl::env
