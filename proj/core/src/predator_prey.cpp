#include "cacl/predator_prey.hpp"

#include <algorithm>

#include "cacl/errors.hpp"
#include "cacl/serial.hpp"

namespace cacl::env {

namespace {
constexpr int kRowDelta[5] = {0, 0, -1, 1, 0}; // LEFT RIGHT UP DOWN NO-OP
constexpr int kColDelta[5] = {-1, 1, 0, 0, 0};
} // namespace

PredatorPreyEnv::PredatorPreyEnv(const EnvConfig& config) : config_(config) {
    if (config.grid_size < 2 || config.predators < 1 || config.preys < 1) {
        throw ContractError("PredatorPreyEnv: need grid_size >= 2 and at least one of each entity");
    }
    if (config.predators + config.preys > config.grid_size * config.grid_size) {
        throw ContractError("PredatorPreyEnv: more entities than grid cells");
    }
    predators_.resize(static_cast<std::size_t>(config.predators));
    preys_.resize(static_cast<std::size_t>(config.preys));
}

int PredatorPreyEnv::obs_dim() const {
    int window = (2 * config_.view_radius + 1) * (2 * config_.view_radius + 1);
    return 2 * window + 2; // prey channel, out-of-bounds channel, own coords
}

bool PredatorPreyEnv::in_grid(const Cell& c) const {
    return c.row >= 0 && c.row < config_.grid_size && c.col >= 0 && c.col < config_.grid_size;
}

bool PredatorPreyEnv::predator_at(const Cell& c) const {
    return std::find(predators_.begin(), predators_.end(), c) != predators_.end();
}

bool PredatorPreyEnv::alive_prey_at(const Cell& c, int except) const {
    for (std::size_t i = 0; i < preys_.size(); ++i) {
        if (static_cast<int>(i) != except && preys_[i].alive && preys_[i].pos == c) {
            return true;
        }
    }
    return false;
}

std::vector<std::vector<double>> PredatorPreyEnv::reset(std::uint64_t seed) {
    rng_ = Rng(seed);
    step_count_ = 0;
    done_ = false;
    const int cells = config_.grid_size * config_.grid_size;
    // Uniform placement on distinct cells by rejection.
    std::vector<bool> occupied(static_cast<std::size_t>(cells), false);
    auto draw_free_cell = [&] {
        for (;;) {
            int cell = static_cast<int>(rng_.uniform_int(static_cast<std::uint64_t>(cells)));
            if (!occupied[static_cast<std::size_t>(cell)]) {
                occupied[static_cast<std::size_t>(cell)] = true;
                return Cell{cell / config_.grid_size, cell % config_.grid_size};
            }
        }
    };
    for (Cell& p : predators_) {
        p = draw_free_cell();
    }
    for (Prey& p : preys_) {
        p.pos = draw_free_cell();
        p.alive = true;
    }
    std::vector<std::vector<double>> obs;
    obs.reserve(predators_.size());
    for (int i = 0; i < config_.predators; ++i) {
        obs.push_back(observe(i));
    }
    return obs;
}

void PredatorPreyEnv::place_entities(std::span<const Cell> predators, std::span<const Cell> preys) {
    if (predators.size() != predators_.size() || preys.size() != preys_.size()) {
        throw ContractError("PredatorPreyEnv::place_entities: entity count mismatch");
    }
    step_count_ = 0;
    done_ = false;
    for (std::size_t i = 0; i < predators.size(); ++i) {
        predators_[i] = predators[i];
    }
    for (std::size_t i = 0; i < preys.size(); ++i) {
        preys_[i] = Prey{preys[i], true};
    }
}

StepResult PredatorPreyEnv::step(std::span<const int> actions) {
    if (done_) {
        throw ContractError("PredatorPreyEnv::step: episode finished, reset first");
    }
    if (actions.size() != predators_.size()) {
        throw ContractError("PredatorPreyEnv::step: expected " +
                            std::to_string(predators_.size()) + " actions, got " +
                            std::to_string(actions.size()));
    }
    for (int a : actions) {
        if (a < 0 || a >= 5) {
            throw ContractError("PredatorPreyEnv::step: invalid action index " +
                                std::to_string(a));
        }
    }
    ++step_count_;

    // Predators move in index order; blocked moves become NO-OPs. Earlier
    // indices vacate their cells before later ones move (fixed priority).
    for (std::size_t i = 0; i < predators_.size(); ++i) {
        int a = actions[i];
        Cell target{predators_[i].row + kRowDelta[a], predators_[i].col + kColDelta[a]};
        if (target == predators_[i]) {
            continue;
        }
        if (in_grid(target) && !predator_at(target) && !alive_prey_at(target)) {
            predators_[i] = target;
        }
    }

    StepResult result;
    // Capture check: a prey whose four orthogonal neighbors are all
    // non-traversable (predator or outside the grid) is captured. Prey cells
    // do not block. A prey with at least one adjacent predator that is not
    // captured is a failed attempt.
    for (Prey& prey : preys_) {
        if (!prey.alive) {
            continue;
        }
        int blocked = 0;
        bool adjacent_predator = false;
        for (int d = 0; d < 4; ++d) {
            Cell nb{prey.pos.row + kRowDelta[d], prey.pos.col + kColDelta[d]};
            if (!in_grid(nb)) {
                ++blocked;
            } else if (predator_at(nb)) {
                ++blocked;
                adjacent_predator = true;
            }
        }
        if (blocked == 4) {
            prey.alive = false;
            result.reward += config_.capture_reward;
            ++result.info.captures;
        } else if (adjacent_predator) {
            result.reward += config_.attempt_penalty;
            ++result.info.failed_attempts;
        }
    }

    // Surviving preys move; blocked moves become NO-OPs without resampling.
    for (std::size_t i = 0; i < preys_.size(); ++i) {
        Prey& prey = preys_[i];
        if (!prey.alive) {
            continue;
        }
        int mv = rng_.categorical(config_.prey_move_probs);
        if (mv == kNoOp) {
            continue;
        }
        Cell target{prey.pos.row + kRowDelta[mv], prey.pos.col + kColDelta[mv]};
        if (in_grid(target) && !predator_at(target) &&
            !alive_prey_at(target, static_cast<int>(i))) {
            prey.pos = target;
        }
    }

    result.reward += config_.step_penalty;

    bool all_captured = std::none_of(preys_.begin(), preys_.end(),
                                     [](const Prey& p) { return p.alive; });
    done_ = all_captured || step_count_ >= config_.max_steps;
    result.done = done_;
    result.info.success = all_captured;

    result.observations.reserve(predators_.size());
    for (int i = 0; i < config_.predators; ++i) {
        result.observations.push_back(observe(i));
    }
    return result;
}

std::vector<double> PredatorPreyEnv::observe(int agent) const {
    if (agent < 0 || agent >= config_.predators) {
        throw ContractError("PredatorPreyEnv::observe: bad agent index");
    }
    const int radius = config_.view_radius;
    const int side = 2 * radius + 1;
    const int window = side * side;
    std::vector<double> obs(static_cast<std::size_t>(obs_dim()), 0.0);
    const Cell& self = predators_[static_cast<std::size_t>(agent)];
    for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
            int idx = (dr + radius) * side + (dc + radius);
            Cell c{self.row + dr, self.col + dc};
            if (!in_grid(c)) {
                obs[static_cast<std::size_t>(window + idx)] = 1.0;
            } else if (alive_prey_at(c)) {
                // Other predators are never visible.
                obs[static_cast<std::size_t>(idx)] = 1.0;
            }
        }
    }
    const double g = static_cast<double>(config_.grid_size);
    obs[static_cast<std::size_t>(2 * window)] = self.row / g;
    obs[static_cast<std::size_t>(2 * window + 1)] = self.col / g;
    return obs;
}

std::vector<PredatorPreyEnv::Cell> PredatorPreyEnv::alive_prey_positions() const {
    std::vector<Cell> cells;
    for (const Prey& p : preys_) {
        if (p.alive) {
            cells.push_back(p.pos);
        }
    }
    return cells;
}

void PredatorPreyEnv::save_state(std::ostream& out) const {
    serial::write_u64(out, predators_.size());
    for (const Cell& p : predators_) {
        serial::write_i64(out, p.row);
        serial::write_i64(out, p.col);
    }
    serial::write_u64(out, preys_.size());
    for (const Prey& p : preys_) {
        serial::write_i64(out, p.pos.row);
        serial::write_i64(out, p.pos.col);
        serial::write_u32(out, p.alive ? 1 : 0);
    }
    serial::write_i64(out, step_count_);
    serial::write_u32(out, done_ ? 1 : 0);
    serial::write_string(out, rng_.serialize());
}

void PredatorPreyEnv::load_state(std::istream& in) {
    const char* section = "predator_prey_state";
    std::uint64_t n_pred = serial::read_u64(in, section);
    if (n_pred != predators_.size()) {
        throw IoError("PredatorPreyEnv::load_state: predator count mismatch");
    }
    for (Cell& p : predators_) {
        p.row = static_cast<int>(serial::read_i64(in, section));
        p.col = static_cast<int>(serial::read_i64(in, section));
    }
    std::uint64_t n_prey = serial::read_u64(in, section);
    if (n_prey != preys_.size()) {
        throw IoError("PredatorPreyEnv::load_state: prey count mismatch");
    }
    for (Prey& p : preys_) {
        p.pos.row = static_cast<int>(serial::read_i64(in, section));
        p.pos.col = static_cast<int>(serial::read_i64(in, section));
        p.alive = serial::read_u32(in, section) != 0;
    }
    step_count_ = static_cast<int>(serial::read_i64(in, section));
    done_ = serial::read_u32(in, section) != 0;
    rng_ = Rng::deserialize(serial::read_string(in, section));
}

} // namespace cacl::env
