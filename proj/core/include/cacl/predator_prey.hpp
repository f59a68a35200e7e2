#pragma once

#include "cacl/env.hpp"

namespace cacl::env {

// Fully-cooperative predator-prey gridworld. Predators must entirely
// surround a prey (every orthogonal neighbor a predator or the grid edge)
// to capture it; they never see each other, only preys within their field
// of view.
class PredatorPreyEnv final : public Env {
public:
    explicit PredatorPreyEnv(const EnvConfig& config);

    EnvKind kind() const override { return EnvKind::kPredatorPrey; }
    int num_agents() const override { return config_.predators; }
    int obs_dim() const override;
    int num_actions() const override { return 5; }
    int max_steps() const override { return config_.max_steps; }
    int steps_taken() const override { return step_count_; }

    std::vector<std::vector<double>> reset(std::uint64_t seed) override;
    StepResult step(std::span<const int> actions) override;

    void save_state(std::ostream& out) const override;
    void load_state(std::istream& in) override;

    struct Cell {
        int row = 0;
        int col = 0;
        bool operator==(const Cell&) const = default;
    };

    std::vector<double> observe(int agent) const;

    // Deterministic setup for scripted scenarios.
    void place_entities(std::span<const Cell> predators, std::span<const Cell> preys);

    const std::vector<Cell>& predator_positions() const { return predators_; }
    std::vector<Cell> alive_prey_positions() const;

private:
    bool in_grid(const Cell& c) const;
    bool predator_at(const Cell& c) const;
    bool alive_prey_at(const Cell& c, int except = -1) const;

    EnvConfig config_;
    Rng rng_;
    std::vector<Cell> predators_;
    struct Prey {
        Cell pos;
        bool alive = true;
    };
    std::vector<Prey> preys_;
    int step_count_ = 0;
    bool done_ = true;
};

} // namespace cacl::env
