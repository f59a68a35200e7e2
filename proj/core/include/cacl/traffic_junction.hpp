#pragma once

#include "cacl/env.hpp"

namespace cacl::env {

// Easy traffic junction: two straight routes crossing at a single cell.
// Inactive cars enter at one of the two arrival points with the current
// arrival-rate probability (only onto a free entry cell); gas advances one
// cell along the fixed route, brake holds. Cars sharing a cell collide.
class TrafficJunctionEnv final : public Env {
public:
    explicit TrafficJunctionEnv(const EnvConfig& config);

    EnvKind kind() const override { return EnvKind::kTrafficJunction; }
    int num_agents() const override { return config_.cars; }
    int obs_dim() const override;
    int num_actions() const override { return 2; }
    int max_steps() const override { return config_.max_steps; }
    int steps_taken() const override { return step_count_; }

    std::vector<std::vector<double>> reset(std::uint64_t seed) override;
    StepResult step(std::span<const int> actions) override;

    bool agent_active(int agent) const override;
    void set_progress(double progress) override;
    double arrival_rate() const { return arrival_rate_; }

    void save_state(std::ostream& out) const override;
    void load_state(std::istream& in) override;

    std::vector<double> observe(int agent) const;

    struct Car {
        bool active = false;
        int route = 0;
        int pos = 0; // index along the route
        int age = 0; // steps since arrival
    };
    const std::vector<Car>& cars() const { return cars_; }
    // Deterministic setup for scripted scenarios.
    void place_cars(std::span<const Car> cars);

    // Route geometry: route 0 runs west to east along the middle row,
    // route 1 north to south along the middle column.
    int route_length() const { return config_.grid_size; }
    std::pair<int, int> route_cell(int route, int pos) const;

private:
    EnvConfig config_;
    Rng rng_;
    std::vector<Car> cars_;
    int step_count_ = 0;
    bool done_ = true;
    bool collided_this_episode_ = false;
    double arrival_rate_;
};

} // namespace cacl::env
