#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cacl/agent.hpp"
#include "cacl/env.hpp"
#include "cacl/grounding.hpp"
#include "cacl/optim.hpp"

namespace cacl::train {

struct TrainConfig {
    double gamma = 0.99;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    double lr = 3e-4;
    double adam_eps = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double grad_clip = 2500.0;
    int nstep = 5;
    int workers = 12;
    long long total_steps = 1'000'000;
    long long eval_every = 50'000; // 0: evaluate only at the end
    int eval_episodes = 12;
    long long checkpoint_every = 0; // 0: checkpoint only at the end
    net::Method method = net::Method::kCacl;
};

// Discounted n-step returns by backward recursion:
//   R_t = sum_k gamma^k r_{t+k} + gamma^len * bootstrap.
// The bootstrap is the value estimate at the segment end, 0 if terminal.
std::vector<double> nstep_returns(std::span<const double> rewards, double bootstrap,
                                  double gamma);

// Same recursion with done markers: the carry resets at episode boundaries.
std::vector<double> segment_returns(std::span<const double> rewards,
                                    std::span<const char> dones, double bootstrap,
                                    double gamma);

struct AgentStep {
    std::vector<double> observation;
    std::vector<double> received; // other agents' previous messages, concatenated
    int action = 0;
};

struct SegmentStep {
    std::vector<AgentStep> agents;
    double reward = 0.0;
    bool done = false;
    bool episode_start = false; // hidden state was reset before this step
};

struct RolloutSegment {
    std::vector<std::vector<double>> hidden_start; // per agent
    std::vector<SegmentStep> steps;
    std::vector<std::vector<double>> next_observation; // bootstrap inputs
    std::vector<std::vector<double>> next_received;
    // Episode logs completed during this segment, per agent.
    std::vector<std::vector<grounding::TrajectoryRecord>> finished;
    std::vector<double> finished_returns;
    std::vector<char> finished_success;
    int worker_id = 0;
};

struct A2cParts {
    ad::Tensor loss;
    double policy_term = 0.0;
    double value_term = 0.0;
    double entropy_sum = 0.0;
};

// Recomputes the forward pass over the segment under current parameters and
// assembles  -sum(adv * logpi) + value_coef * sum((R - V)^2)
//            - entropy_coef * sum(H),
// with advantages detached.
A2cParts a2c_loss_parts(net::AgentNet& agent, const RolloutSegment& segment, int agent_idx,
                        const TrainConfig& config);
ad::Tensor a2c_loss(net::AgentNet& agent, const RolloutSegment& segment, int agent_idx,
                    const TrainConfig& config);

struct TotalLossOut {
    ad::Tensor loss;
    double rl_term = 0.0;
    double grounding_term = 0.0;
    double entropy_sum = 0.0;
};

// L = L_RL + kappa * L_ground, where the grounding term is the CACL loss
// (kCacl), the reconstruction loss (kAeComm) or absent (kNoComm). Until the
// buffer holds at least 2 trajectories the grounding term is 0.
TotalLossOut total_loss(net::AgentNet& agent, const RolloutSegment& segment, int agent_idx,
                        const TrainConfig& config, const grounding::CaclConfig& cacl_config,
                        const grounding::MessageBuffer& buffer, Rng& grounding_rng);

// Steps one private environment copy, producing fixed-length segments. Owns
// the episode state (hidden vectors, previous messages, partial episode
// logs) so it can be checkpointed mid-episode.
class RolloutWorker {
public:
    RolloutWorker(const env::EnvConfig& env_config, const net::AgentConfig& agent_config,
                  const TrainConfig& train_config, std::uint64_t run_seed, int worker_id);

    // Advances nstep environment steps using the given nets (forced to eval
    // mode for the duration). global_steps drives the curriculum progress.
    RolloutSegment collect(std::vector<net::AgentNet>& nets, long long global_steps);

    int worker_id() const { return worker_id_; }

    void save_state(std::ostream& out) const;
    void load_state(std::istream& in);

private:
    void start_episode(long long global_steps);

    env::EnvConfig env_config_;
    net::AgentConfig agent_config_;
    TrainConfig train_config_;
    std::uint64_t run_seed_ = 0;
    int worker_id_ = 0;

    std::unique_ptr<env::Env> env_;
    Rng action_rng_;
    std::vector<std::vector<double>> obs_;
    std::vector<std::vector<double>> hidden_;
    std::vector<std::array<double, grounding::kMsgDim>> prev_messages_;
    std::vector<grounding::TrajectoryRecord> partial_;
    std::uint64_t episode_index_ = 0;
    double episode_return_ = 0.0;
    bool episode_fresh_ = true;
    bool started_ = false;
};

struct MessageRow {
    int episode = 0;
    int step = 0;
    int agent = 0;
    std::array<double, grounding::kMsgDim> message{};
};

struct TrajectoryRow {
    int episode = 0;
    int step = 0;
    int agent = 0;
    int action = 0;
    double reward = 0.0;
    std::array<double, grounding::kMsgDim> message{};
    bool active = true;
};

struct EvalResult {
    int episodes = 0;
    double reward_mean = 0.0;
    double reward_se = 0.0;
    double success_rate = 0.0;
    std::vector<double> episode_rewards;
    std::vector<char> episode_success;
    std::vector<MessageRow> messages; // messages actually sent (active agents)
    std::vector<TrajectoryRow> rows;
};

// Runs evaluation episodes with the stochastic policy and logs every sent
// message. Deterministic given the seed; agents are restored to their
// previous spectral-norm mode afterwards.
EvalResult evaluate(std::vector<net::AgentNet>& agents, const env::EnvConfig& env_config,
                    int episodes, std::uint64_t seed, double env_progress = 1.0);

// Agent dimensions implied by an environment (observation size, action
// count, team size).
net::AgentConfig derive_agent_config(const env::EnvConfig& env_config, net::Method method);

struct TrainerOptions {
    env::EnvConfig env_config;
    net::AgentConfig agent_config; // obs_dim/n_actions filled from env if zero
    TrainConfig train;
    grounding::CaclConfig cacl;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir; // metrics, checkpoints, resolved config
    std::string resolved_config_ini;
};

// Owns the agents, optimizers, grounding buffers and workers; runs the
// decentralized training loop (serialized learner, parallel workers when
// workers > 1) and emits metrics and checkpoints.
class Trainer {
public:
    explicit Trainer(TrainerOptions options);
    ~Trainer();

    void run();

    void save_checkpoint(const std::filesystem::path& path);
    void restore(const std::filesystem::path& checkpoint_path);

    std::vector<net::AgentNet>& agents() { return agents_; }
    long long steps_done() const { return steps_done_; }
    const TrainerOptions& options() const { return options_; }

    // Exposed for the checkpoint codec.
    struct State;

private:
    void update(RolloutSegment segment);
    void run_single_worker();
    void run_multi_worker();
    void maybe_eval_and_checkpoint(bool force_final = false);
    EvalResult run_eval();

    TrainerOptions options_;
    std::vector<net::AgentNet> agents_;
    std::vector<std::vector<ad::Tensor>> params_;
    std::vector<ad::Adam> adams_;
    std::vector<grounding::MessageBuffer> buffers_;
    std::vector<RolloutWorker> workers_;
    Rng grounding_rng_;

    long long steps_done_ = 0;
    std::uint64_t eval_round_ = 0;
    std::uint64_t checkpoint_round_ = 0;
    long long updates_since_row_ = 0;
    double rl_loss_acc_ = 0.0;
    double ground_loss_acc_ = 0.0;
    double entropy_acc_ = 0.0;
    double grad_norm_acc_ = 0.0;

    std::unique_ptr<std::ofstream> metrics_;
    bool metrics_header_written_ = false;
    double start_time_seconds_ = 0.0;

    friend struct TrainerCheckpointCodec;
};

} // namespace cacl::train
