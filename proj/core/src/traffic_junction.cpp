#include "cacl/traffic_junction.hpp"

#include <algorithm>
#include <map>

#include "cacl/errors.hpp"
#include "cacl/serial.hpp"

namespace cacl::env {

TrafficJunctionEnv::TrafficJunctionEnv(const EnvConfig& config)
    : config_(config), arrival_rate_(config.rate_min) {
    if (config.grid_size < 3) {
        throw ContractError("TrafficJunctionEnv: grid too small for a junction");
    }
    if (config.cars < 1) {
        throw ContractError("TrafficJunctionEnv: need at least one car");
    }
    if (config.rate_min < 0.0 || config.rate_max > 1.0 || config.rate_min > config.rate_max) {
        throw ContractError("TrafficJunctionEnv: invalid arrival-rate range");
    }
    cars_.resize(static_cast<std::size_t>(config.cars));
}

int TrafficJunctionEnv::obs_dim() const {
    int side = 2 * config_.vision + 1;
    return side * side + 2 + 1 + 1; // occupancy, route one-hot, progress, inactive flag
}

std::pair<int, int> TrafficJunctionEnv::route_cell(int route, int pos) const {
    int mid = config_.grid_size / 2;
    if (route == 0) {
        return {mid, pos};
    }
    return {pos, mid};
}

void TrafficJunctionEnv::set_progress(double progress) {
    double p = std::clamp(progress, 0.0, 1.0);
    arrival_rate_ = config_.rate_min + (config_.rate_max - config_.rate_min) * p;
}

bool TrafficJunctionEnv::agent_active(int agent) const {
    return cars_[static_cast<std::size_t>(agent)].active;
}

std::vector<std::vector<double>> TrafficJunctionEnv::reset(std::uint64_t seed) {
    rng_ = Rng(seed);
    step_count_ = 0;
    done_ = false;
    collided_this_episode_ = false;
    for (Car& c : cars_) {
        c = Car{};
    }
    std::vector<std::vector<double>> obs;
    obs.reserve(cars_.size());
    for (int i = 0; i < config_.cars; ++i) {
        obs.push_back(observe(i));
    }
    return obs;
}

void TrafficJunctionEnv::place_cars(std::span<const Car> cars) {
    if (cars.size() != cars_.size()) {
        throw ContractError("TrafficJunctionEnv::place_cars: car count mismatch");
    }
    step_count_ = 0;
    done_ = false;
    collided_this_episode_ = false;
    std::copy(cars.begin(), cars.end(), cars_.begin());
}

StepResult TrafficJunctionEnv::step(std::span<const int> actions) {
    if (done_) {
        throw ContractError("TrafficJunctionEnv::step: episode finished, reset first");
    }
    if (actions.size() != cars_.size()) {
        throw ContractError("TrafficJunctionEnv::step: expected " + std::to_string(cars_.size()) +
                            " actions, got " + std::to_string(actions.size()));
    }
    for (int a : actions) {
        if (a != kGas && a != kBrake) {
            throw ContractError("TrafficJunctionEnv::step: invalid action " + std::to_string(a));
        }
    }
    ++step_count_;

    // Arrivals first, in index order. An entry is only usable when free, so
    // braking cars never spawn on top of each other. A car arriving this
    // step holds its entry cell and starts acting next step.
    std::vector<bool> arrived(cars_.size(), false);
    for (std::size_t i = 0; i < cars_.size(); ++i) {
        if (cars_[i].active) {
            continue;
        }
        if (rng_.uniform01() >= arrival_rate_) {
            continue;
        }
        int route = static_cast<int>(rng_.uniform_int(2));
        auto entry = route_cell(route, 0);
        bool entry_free = true;
        for (const Car& other : cars_) {
            if (other.active && route_cell(other.route, other.pos) == entry) {
                entry_free = false;
                break;
            }
        }
        if (entry_free) {
            cars_[i] = Car{true, route, 0, 0};
            arrived[i] = true;
        }
    }

    // Movement: gas advances one cell along the route, brake holds. Cars
    // stepping past the last cell leave the grid and return to the pool.
    for (std::size_t i = 0; i < cars_.size(); ++i) {
        Car& car = cars_[i];
        if (!car.active || arrived[i]) {
            continue;
        }
        if (actions[i] == kGas) {
            ++car.pos;
            if (car.pos >= route_length()) {
                car = Car{};
            }
        }
    }

    StepResult result;

    // Collisions: every car on a cell shared by two or more is penalized.
    std::map<std::pair<int, int>, int> occupancy;
    for (const Car& car : cars_) {
        if (car.active) {
            ++occupancy[route_cell(car.route, car.pos)];
        }
    }
    for (const auto& [cell, count] : occupancy) {
        if (count >= 2) {
            result.reward += config_.collision_penalty * count;
            result.info.collisions += count;
            collided_this_episode_ = true;
        }
    }

    // Time penalty per active car, proportional to steps since arrival.
    for (Car& car : cars_) {
        if (car.active) {
            result.reward += config_.car_time_penalty * car.age;
            ++car.age;
        }
    }

    done_ = step_count_ >= config_.max_steps;
    result.done = done_;
    result.info.success = !collided_this_episode_;

    result.observations.reserve(cars_.size());
    for (int i = 0; i < config_.cars; ++i) {
        result.observations.push_back(observe(i));
    }
    return result;
}

std::vector<double> TrafficJunctionEnv::observe(int agent) const {
    if (agent < 0 || agent >= config_.cars) {
        throw ContractError("TrafficJunctionEnv::observe: bad agent index");
    }
    std::vector<double> obs(static_cast<std::size_t>(obs_dim()), 0.0);
    const Car& self = cars_[static_cast<std::size_t>(agent)];
    const int side = 2 * config_.vision + 1;
    const int window = side * side;
    if (!self.active) {
        obs.back() = 1.0; // inactive flag
        return obs;
    }
    auto [row, col] = route_cell(self.route, self.pos);
    for (std::size_t j = 0; j < cars_.size(); ++j) {
        if (j == static_cast<std::size_t>(agent) || !cars_[j].active) {
            continue;
        }
        auto [orow, ocol] = route_cell(cars_[j].route, cars_[j].pos);
        int dr = orow - row;
        int dc = ocol - col;
        if (std::abs(dr) <= config_.vision && std::abs(dc) <= config_.vision) {
            int idx = (dr + config_.vision) * side + (dc + config_.vision);
            obs[static_cast<std::size_t>(idx)] = 1.0;
        }
    }
    obs[static_cast<std::size_t>(window + self.route)] = 1.0;
    obs[static_cast<std::size_t>(window + 2)] =
        route_length() > 1 ? static_cast<double>(self.pos) / (route_length() - 1) : 0.0;
    // obs.back() stays 0: active
    return obs;
}

void TrafficJunctionEnv::save_state(std::ostream& out) const {
    serial::write_u64(out, cars_.size());
    for (const Car& c : cars_) {
        serial::write_u32(out, c.active ? 1 : 0);
        serial::write_i64(out, c.route);
        serial::write_i64(out, c.pos);
        serial::write_i64(out, c.age);
    }
    serial::write_i64(out, step_count_);
    serial::write_u32(out, done_ ? 1 : 0);
    serial::write_u32(out, collided_this_episode_ ? 1 : 0);
    serial::write_f64(out, arrival_rate_);
    serial::write_string(out, rng_.serialize());
}

void TrafficJunctionEnv::load_state(std::istream& in) {
    const char* section = "traffic_junction_state";
    std::uint64_t n = serial::read_u64(in, section);
    if (n != cars_.size()) {
        throw IoError("TrafficJunctionEnv::load_state: car count mismatch");
    }
    for (Car& c : cars_) {
        c.active = serial::read_u32(in, section) != 0;
        c.route = static_cast<int>(serial::read_i64(in, section));
        c.pos = static_cast<int>(serial::read_i64(in, section));
        c.age = static_cast<int>(serial::read_i64(in, section));
    }
    step_count_ = static_cast<int>(serial::read_i64(in, section));
    done_ = serial::read_u32(in, section) != 0;
    collided_this_episode_ = serial::read_u32(in, section) != 0;
    arrival_rate_ = serial::read_f64(in, section);
    rng_ = Rng::deserialize(serial::read_string(in, section));
}

} // namespace cacl::env
