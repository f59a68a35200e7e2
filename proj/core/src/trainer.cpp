#include "cacl/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <thread>

#include "cacl/checkpoint.hpp"
#include "cacl/ops.hpp"
#include "cacl/serial.hpp"

namespace cacl::train {

namespace {

// Stream tags for derive_seed; keep distinct so no two purposes share a
// random stream.
constexpr std::uint64_t kStreamEnv = 2;
constexpr std::uint64_t kStreamEnvEpisode = 3;
constexpr std::uint64_t kStreamAction = 4;
constexpr std::uint64_t kStreamGrounding = 5;
constexpr std::uint64_t kStreamEval = 6;

double now_seconds() {
    using namespace std::chrono;
    return duration_cast<duration<double>>(steady_clock::now().time_since_epoch()).count();
}

std::vector<double> build_received(
    const std::vector<std::array<double, grounding::kMsgDim>>& messages, int self) {
    std::vector<double> received;
    received.reserve((messages.size() - 1) * grounding::kMsgDim);
    for (std::size_t j = 0; j < messages.size(); ++j) {
        if (static_cast<int>(j) == self) {
            continue;
        }
        received.insert(received.end(), messages[j].begin(), messages[j].end());
    }
    return received;
}

} // namespace

std::vector<double> nstep_returns(std::span<const double> rewards, double bootstrap,
                                  double gamma) {
    std::vector<double> returns(rewards.size());
    double carry = bootstrap;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        carry = rewards[t] + gamma * carry;
        returns[t] = carry;
    }
    return returns;
}

std::vector<double> segment_returns(std::span<const double> rewards,
                                    std::span<const char> dones, double bootstrap,
                                    double gamma) {
    if (rewards.size() != dones.size()) {
        throw ContractError("segment_returns: rewards/dones length mismatch");
    }
    std::vector<double> returns(rewards.size());
    double carry = bootstrap;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        carry = dones[t] ? rewards[t] : rewards[t] + gamma * carry;
        returns[t] = carry;
    }
    return returns;
}

A2cParts a2c_loss_parts(net::AgentNet& agent, const RolloutSegment& segment, int agent_idx,
                        const TrainConfig& config) {
    if (segment.steps.empty()) {
        throw ContractError("a2c_loss: empty segment");
    }
    const auto idx = static_cast<std::size_t>(agent_idx);

    ad::Tensor h = ad::Tensor::vector(segment.hidden_start[idx]);
    std::vector<ad::Tensor> log_probs;
    std::vector<ad::Tensor> values;
    std::vector<ad::Tensor> entropies;
    std::vector<double> rewards;
    std::vector<char> dones;
    log_probs.reserve(segment.steps.size());
    values.reserve(segment.steps.size());
    entropies.reserve(segment.steps.size());

    for (const SegmentStep& step : segment.steps) {
        if (step.episode_start) {
            h = agent.zero_hidden();
        }
        const AgentStep& mine = step.agents[idx];
        auto out = agent.policy_step(ad::Tensor::vector(mine.observation),
                                     ad::Tensor::vector(mine.received), h);
        h = out.hidden;
        ad::Tensor probs = ad::softmax(out.logits);
        ad::Tensor lps = ad::log_softmax(out.logits);
        log_probs.push_back(ad::pick(lps, static_cast<std::size_t>(mine.action)));
        entropies.push_back(ad::neg(ad::dot(probs, lps)));
        values.push_back(out.value);
        rewards.push_back(step.reward);
        dones.push_back(step.done ? 1 : 0);
    }

    double bootstrap = 0.0;
    if (!segment.steps.back().done) {
        // Value of the state after the segment, used as a constant. The
        // forward pass lands on the tape but receives no gradient.
        auto out = agent.policy_step(ad::Tensor::vector(segment.next_observation[idx]),
                                     ad::Tensor::vector(segment.next_received[idx]), h);
        bootstrap = out.value.value();
    }
    std::vector<double> returns = segment_returns(rewards, dones, bootstrap, config.gamma);

    A2cParts parts;
    ad::Tensor policy_term = ad::Tensor::scalar(0.0);
    ad::Tensor value_term = ad::Tensor::scalar(0.0);
    ad::Tensor entropy_term = ad::Tensor::scalar(0.0);
    for (std::size_t t = 0; t < returns.size(); ++t) {
        const double advantage = returns[t] - values[t].value(); // detached
        policy_term = ad::add(policy_term, ad::scale(log_probs[t], -advantage));
        ad::Tensor diff = ad::sub(ad::Tensor::scalar(returns[t]), values[t]);
        value_term = ad::add(value_term, ad::mul(diff, diff));
        entropy_term = ad::add(entropy_term, entropies[t]);
    }
    parts.policy_term = policy_term.value();
    parts.value_term = value_term.value();
    parts.entropy_sum = entropy_term.value();
    parts.loss = ad::add(policy_term, ad::add(ad::scale(value_term, config.value_coef),
                                              ad::scale(entropy_term, -config.entropy_coef)));
    if (!std::isfinite(parts.loss.value())) {
        throw NumericError("a2c_loss: non-finite loss term");
    }
    return parts;
}

ad::Tensor a2c_loss(net::AgentNet& agent, const RolloutSegment& segment, int agent_idx,
                    const TrainConfig& config) {
    return a2c_loss_parts(agent, segment, agent_idx, config).loss;
}

TotalLossOut total_loss(net::AgentNet& agent, const RolloutSegment& segment, int agent_idx,
                        const TrainConfig& config, const grounding::CaclConfig& cacl_config,
                        const grounding::MessageBuffer& buffer, Rng& grounding_rng) {
    A2cParts rl = a2c_loss_parts(agent, segment, agent_idx, config);
    TotalLossOut out;
    out.rl_term = rl.loss.value();
    out.entropy_sum = rl.entropy_sum;
    out.loss = rl.loss;

    if (config.method == net::Method::kNoComm || cacl_config.kappa == 0.0) {
        return out;
    }
    if (buffer.size() < 2) {
        return out; // warm-up: grounding term is zero until 2 trajectories exist
    }
    const std::size_t k =
        std::min<std::size_t>(static_cast<std::size_t>(cacl_config.batch_trajectories),
                              buffer.size());
    auto batch = buffer.sample(k, grounding_rng);
    ad::Tensor ground;
    if (config.method == net::Method::kCacl) {
        ground = grounding::cacl_gradient_scope(agent, batch, cacl_config, grounding_rng);
    } else {
        auto observations = grounding::collect_observations(
            batch, static_cast<std::size_t>(cacl_config.max_messages_per_trajectory),
            grounding_rng);
        ground = grounding::ae_loss(agent, observations);
    }
    out.grounding_term = ground.value();
    out.loss = ad::add(rl.loss, ad::scale(ground, cacl_config.kappa));
    return out;
}

RolloutWorker::RolloutWorker(const env::EnvConfig& env_config,
                             const net::AgentConfig& agent_config,
                             const TrainConfig& train_config, std::uint64_t run_seed,
                             int worker_id)
    : env_config_(env_config), agent_config_(agent_config), train_config_(train_config),
      run_seed_(run_seed), worker_id_(worker_id), env_(env::make_env(env_config)),
      action_rng_(derive_seed(run_seed, kStreamAction, static_cast<std::uint64_t>(worker_id))) {
    const auto n = static_cast<std::size_t>(agent_config_.n_agents);
    obs_.resize(n);
    hidden_.assign(n, std::vector<double>(static_cast<std::size_t>(agent_config_.hidden_dim), 0.0));
    prev_messages_.assign(n, {});
    partial_.resize(n);
}

void RolloutWorker::start_episode(long long global_steps) {
    const auto n = static_cast<std::size_t>(agent_config_.n_agents);
    double progress = train_config_.total_steps > 0
                          ? static_cast<double>(global_steps) /
                                static_cast<double>(train_config_.total_steps)
                          : 0.0;
    env_->set_progress(progress);
    std::uint64_t worker_base =
        derive_seed(run_seed_, kStreamEnv, static_cast<std::uint64_t>(worker_id_));
    obs_ = env_->reset(derive_seed(worker_base, kStreamEnvEpisode, episode_index_));
    for (auto& h : hidden_) {
        std::fill(h.begin(), h.end(), 0.0);
    }
    prev_messages_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        partial_[i] = grounding::TrajectoryRecord{};
        partial_[i].trajectory_id =
            static_cast<std::uint64_t>(worker_id_) * 1'000'000'000'000ULL + episode_index_;
    }
    episode_return_ = 0.0;
    episode_fresh_ = true;
    ++episode_index_;
}

RolloutSegment RolloutWorker::collect(std::vector<net::AgentNet>& nets, long long global_steps) {
    const int n = agent_config_.n_agents;
    if (static_cast<int>(nets.size()) != n) {
        throw ContractError("RolloutWorker::collect: team size mismatch");
    }
    if (!started_) {
        start_episode(global_steps);
        started_ = true;
    }
    const bool comm = agent_config_.method != net::Method::kNoComm;

    RolloutSegment segment;
    segment.worker_id = worker_id_;
    segment.hidden_start = hidden_;
    segment.finished.resize(static_cast<std::size_t>(n));

    for (int t = 0; t < train_config_.nstep; ++t) {
        std::vector<std::array<double, grounding::kMsgDim>> messages(
            static_cast<std::size_t>(n));
        if (comm) {
            for (int i = 0; i < n; ++i) {
                ad::Tensor m = nets[static_cast<std::size_t>(i)].produce_message(
                    ad::Tensor::vector(obs_[static_cast<std::size_t>(i)]));
                std::copy(m.data().begin(), m.data().end(),
                          messages[static_cast<std::size_t>(i)].begin());
            }
        }
        SegmentStep step;
        step.episode_start = episode_fresh_;
        episode_fresh_ = false;
        step.agents.resize(static_cast<std::size_t>(n));
        std::vector<int> actions(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            auto& mine = step.agents[static_cast<std::size_t>(i)];
            mine.observation = obs_[static_cast<std::size_t>(i)];
            mine.received = build_received(prev_messages_, i);
            auto act = nets[static_cast<std::size_t>(i)].act(
                ad::Tensor::vector(hidden_[static_cast<std::size_t>(i)]),
                ad::Tensor::vector(mine.observation), ad::Tensor::vector(mine.received),
                action_rng_);
            actions[static_cast<std::size_t>(i)] = act.action;
            mine.action = act.action;
            hidden_[static_cast<std::size_t>(i)].assign(act.hidden.data().begin(),
                                                        act.hidden.data().end());
        }
        env::StepResult result = env_->step(actions);
        step.reward = result.reward;
        step.done = result.done;
        episode_return_ += result.reward;

        if (comm) {
            for (int i = 0; i < n; ++i) {
                grounding::TrajectoryStep ts;
                ts.observation = obs_[static_cast<std::size_t>(i)];
                ts.own_message = messages[static_cast<std::size_t>(i)];
                ts.other_messages.reserve(static_cast<std::size_t>(n - 1));
                for (int j = 0; j < n; ++j) {
                    if (j != i) {
                        ts.other_messages.push_back(messages[static_cast<std::size_t>(j)]);
                    }
                }
                partial_[static_cast<std::size_t>(i)].steps.push_back(std::move(ts));
            }
        }
        prev_messages_ = std::move(messages);
        obs_ = std::move(result.observations);
        segment.steps.push_back(std::move(step));

        if (result.done) {
            for (int i = 0; i < n; ++i) {
                segment.finished[static_cast<std::size_t>(i)].push_back(
                    std::move(partial_[static_cast<std::size_t>(i)]));
            }
            segment.finished_returns.push_back(episode_return_);
            segment.finished_success.push_back(result.info.success ? 1 : 0);
            start_episode(global_steps + t + 1);
        }
    }

    segment.next_observation = obs_;
    segment.next_received.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        segment.next_received.push_back(build_received(prev_messages_, i));
    }
    return segment;
}

void RolloutWorker::save_state(std::ostream& out) const {
    env_->save_state(out);
    auto write_vec_list = [&](const std::vector<std::vector<double>>& list) {
        serial::write_u64(out, list.size());
        for (const auto& v : list) {
            serial::write_f64_vec(out, v);
        }
    };
    write_vec_list(obs_);
    write_vec_list(hidden_);
    serial::write_u64(out, prev_messages_.size());
    for (const auto& m : prev_messages_) {
        for (double v : m) {
            serial::write_f64(out, v);
        }
    }
    serial::write_u64(out, partial_.size());
    for (const auto& record : partial_) {
        harness::write_trajectory_record(out, record);
    }
    serial::write_u64(out, episode_index_);
    serial::write_f64(out, episode_return_);
    serial::write_u32(out, episode_fresh_ ? 1 : 0);
    serial::write_u32(out, started_ ? 1 : 0);
    serial::write_string(out, action_rng_.serialize());
}

void RolloutWorker::load_state(std::istream& in) {
    const char* section = "worker_state";
    env_->load_state(in);
    auto read_vec_list = [&](std::vector<std::vector<double>>& list) {
        std::uint64_t count = serial::read_u64(in, section);
        if (count != list.size()) {
            throw IoError("RolloutWorker::load_state: agent count mismatch");
        }
        for (auto& v : list) {
            v = serial::read_f64_vec(in, section);
        }
    };
    read_vec_list(obs_);
    read_vec_list(hidden_);
    std::uint64_t n_msgs = serial::read_u64(in, section);
    if (n_msgs != prev_messages_.size()) {
        throw IoError("RolloutWorker::load_state: message count mismatch");
    }
    for (auto& m : prev_messages_) {
        for (double& v : m) {
            v = serial::read_f64(in, section);
        }
    }
    std::uint64_t n_partial = serial::read_u64(in, section);
    if (n_partial != partial_.size()) {
        throw IoError("RolloutWorker::load_state: trajectory count mismatch");
    }
    for (auto& record : partial_) {
        record = harness::read_trajectory_record(in);
    }
    episode_index_ = serial::read_u64(in, section);
    episode_return_ = serial::read_f64(in, section);
    episode_fresh_ = serial::read_u32(in, section) != 0;
    started_ = serial::read_u32(in, section) != 0;
    action_rng_ = Rng::deserialize(serial::read_string(in, section));
}

EvalResult evaluate(std::vector<net::AgentNet>& agents, const env::EnvConfig& env_config,
                    int episodes, std::uint64_t seed, double env_progress) {
    if (episodes <= 0) {
        throw ContractError("evaluate: episodes must be positive");
    }
    auto environment = env::make_env(env_config);
    environment->set_progress(env_progress);
    const int n = environment->num_agents();
    if (static_cast<int>(agents.size()) != n) {
        throw ContractError("evaluate: team has " + std::to_string(agents.size()) +
                            " agents, environment expects " + std::to_string(n));
    }
    const bool comm = agents.front().config().method != net::Method::kNoComm;

    std::vector<net::SnMode> saved_modes;
    for (auto& agent : agents) {
        saved_modes.push_back(agent.mode());
        agent.set_mode(net::SnMode::kEval);
    }

    EvalResult result;
    result.episodes = episodes;
    for (int e = 0; e < episodes; ++e) {
        // Each episode draws from its own streams so the metric does not
        // depend on evaluation order.
        Rng action_rng(derive_seed(seed, 1, static_cast<std::uint64_t>(e)));
        auto obs = environment->reset(derive_seed(seed, 2, static_cast<std::uint64_t>(e)));
        std::vector<ad::Tensor> hidden;
        for (auto& agent : agents) {
            hidden.push_back(agent.zero_hidden());
        }
        std::vector<std::array<double, grounding::kMsgDim>> prev(static_cast<std::size_t>(n));
        double episode_reward = 0.0;
        bool success = false;
        for (int t = 0;; ++t) {
            std::vector<std::array<double, grounding::kMsgDim>> messages(
                static_cast<std::size_t>(n));
            if (comm) {
                for (int i = 0; i < n; ++i) {
                    ad::Tensor m = agents[static_cast<std::size_t>(i)].produce_message(
                        ad::Tensor::vector(obs[static_cast<std::size_t>(i)]));
                    std::copy(m.data().begin(), m.data().end(),
                              messages[static_cast<std::size_t>(i)].begin());
                }
            }
            std::vector<bool> active(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                active[static_cast<std::size_t>(i)] = environment->agent_active(i);
                if (comm && active[static_cast<std::size_t>(i)]) {
                    result.messages.push_back(
                        MessageRow{e, t, i, messages[static_cast<std::size_t>(i)]});
                }
            }
            std::vector<int> actions(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                auto act = agents[static_cast<std::size_t>(i)].act(
                    hidden[static_cast<std::size_t>(i)],
                    ad::Tensor::vector(obs[static_cast<std::size_t>(i)]),
                    ad::Tensor::vector(build_received(prev, i)), action_rng);
                actions[static_cast<std::size_t>(i)] = act.action;
                hidden[static_cast<std::size_t>(i)] = act.hidden;
            }
            env::StepResult stepped = environment->step(actions);
            episode_reward += stepped.reward;
            for (int i = 0; i < n; ++i) {
                result.rows.push_back(TrajectoryRow{
                    e, t, i, actions[static_cast<std::size_t>(i)], stepped.reward,
                    messages[static_cast<std::size_t>(i)],
                    active[static_cast<std::size_t>(i)]});
            }
            prev = std::move(messages);
            obs = std::move(stepped.observations);
            if (stepped.done) {
                success = stepped.info.success;
                break;
            }
        }
        result.episode_rewards.push_back(episode_reward);
        result.episode_success.push_back(success ? 1 : 0);
    }

    for (std::size_t i = 0; i < agents.size(); ++i) {
        agents[i].set_mode(saved_modes[i]);
    }

    double sum = 0.0;
    for (double r : result.episode_rewards) {
        sum += r;
    }
    result.reward_mean = sum / episodes;
    if (episodes > 1) {
        double var = 0.0;
        for (double r : result.episode_rewards) {
            var += (r - result.reward_mean) * (r - result.reward_mean);
        }
        var /= (episodes - 1);
        result.reward_se = std::sqrt(var / episodes);
    }
    int successes = 0;
    for (char s : result.episode_success) {
        successes += s;
    }
    result.success_rate = static_cast<double>(successes) / episodes;
    return result;
}

net::AgentConfig derive_agent_config(const env::EnvConfig& env_config, net::Method method) {
    auto probe = env::make_env(env_config);
    net::AgentConfig config;
    config.obs_dim = probe->obs_dim();
    config.n_actions = probe->num_actions();
    config.n_agents = probe->num_agents();
    config.method = method;
    return config;
}

Trainer::Trainer(TrainerOptions options) : options_(std::move(options)) {
    options_.agent_config = derive_agent_config(options_.env_config, options_.train.method);
    const net::AgentConfig& acfg = options_.agent_config;

    if (options_.train.workers < 1) {
        throw ContractError("Trainer: need at least one worker");
    }
    agents_ = net::make_team(acfg, options_.seed);
    ad::AdamConfig adam_cfg{options_.train.lr, options_.train.adam_eps,
                            options_.train.adam_beta1, options_.train.adam_beta2};
    for (auto& agent : agents_) {
        params_.push_back(agent.parameters());
        adams_.emplace_back(params_.back(), adam_cfg);
        buffers_.emplace_back(static_cast<std::size_t>(options_.cacl.buffer_capacity));
    }
    for (int w = 0; w < options_.train.workers; ++w) {
        workers_.emplace_back(options_.env_config, acfg, options_.train, options_.seed, w);
    }
    grounding_rng_ = Rng(derive_seed(options_.seed, kStreamGrounding, 0));
}

Trainer::~Trainer() = default;

void Trainer::update(RolloutSegment segment) {
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        for (auto& record : segment.finished[i]) {
            buffers_[i].push(std::move(record));
        }
    }
    const auto n_steps = static_cast<double>(segment.steps.size());
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        agents_[i].set_mode(net::SnMode::kTrain);
        ad::Tape tape;
        ad::TapeScope scope(tape);
        TotalLossOut out = total_loss(agents_[i], segment, static_cast<int>(i), options_.train,
                                      options_.cacl, buffers_[i], grounding_rng_);
        if (!std::isfinite(out.loss.value())) {
            throw NumericError("Trainer::update: non-finite total loss for agent " +
                               std::to_string(i));
        }
        tape.backward(out.loss);
        double norm = ad::clip_gradients(params_[i], options_.train.grad_clip);
        adams_[i].step();
        adams_[i].zero_grad();

        rl_loss_acc_ += out.rl_term;
        ground_loss_acc_ += out.grounding_term;
        entropy_acc_ += out.entropy_sum / n_steps;
        grad_norm_acc_ += norm;
    }
    ++updates_since_row_;
}

EvalResult Trainer::run_eval() {
    double progress = options_.train.total_steps > 0
                          ? static_cast<double>(steps_done_) /
                                static_cast<double>(options_.train.total_steps)
                          : 1.0;
    return evaluate(agents_, options_.env_config, options_.train.eval_episodes,
                    derive_seed(options_.seed, kStreamEval, eval_round_), progress);
}

void Trainer::maybe_eval_and_checkpoint(bool force_final) {
    const auto& cfg = options_.train;
    bool want_eval =
        force_final || (cfg.eval_every > 0 &&
                        steps_done_ >= static_cast<long long>(eval_round_ + 1) * cfg.eval_every);
    if (want_eval) {
        EvalResult eval = run_eval();
        ++eval_round_;
        if (metrics_) {
            const double denom =
                updates_since_row_ > 0 ? static_cast<double>(updates_since_row_) *
                                             static_cast<double>(agents_.size())
                                       : 1.0;
            *metrics_ << steps_done_ << ',' << std::setprecision(17)
                      << (now_seconds() - start_time_seconds_) << ',' << eval.reward_mean << ','
                      << eval.reward_se << ',' << eval.success_rate << ','
                      << rl_loss_acc_ / denom << ',' << ground_loss_acc_ / denom << ','
                      << entropy_acc_ / denom << ',' << grad_norm_acc_ / denom << '\n';
            metrics_->flush();
        }
        rl_loss_acc_ = ground_loss_acc_ = entropy_acc_ = grad_norm_acc_ = 0.0;
        updates_since_row_ = 0;
    }
    bool want_checkpoint =
        cfg.checkpoint_every > 0 &&
        steps_done_ >= static_cast<long long>(checkpoint_round_ + 1) * cfg.checkpoint_every;
    if (want_checkpoint && !options_.out_dir.empty()) {
        ++checkpoint_round_;
        save_checkpoint(options_.out_dir / ("checkpoint_" + std::to_string(steps_done_) +
                                            ".ckpt"));
    }
    if (force_final && !options_.out_dir.empty()) {
        save_checkpoint(options_.out_dir / "checkpoint_final.ckpt");
    }
}

void Trainer::run_single_worker() {
    RolloutWorker& worker = workers_.front();
    while (steps_done_ < options_.train.total_steps) {
        for (auto& agent : agents_) {
            agent.set_mode(net::SnMode::kEval);
        }
        RolloutSegment segment = worker.collect(agents_, steps_done_);
        const auto got = static_cast<long long>(segment.steps.size());
        update(std::move(segment));
        steps_done_ += got;
        maybe_eval_and_checkpoint();
    }
}

namespace {

struct SegmentQueue {
    std::mutex mutex;
    std::condition_variable can_push;
    std::condition_variable can_pop;
    std::deque<RolloutSegment> queue;
    std::size_t capacity = 0;
    bool stop = false;
    std::string error;

    bool push(RolloutSegment segment) {
        std::unique_lock lock(mutex);
        can_push.wait(lock, [&] { return queue.size() < capacity || stop; });
        if (stop) {
            return false;
        }
        queue.push_back(std::move(segment));
        can_pop.notify_one();
        return true;
    }

    bool pop(RolloutSegment& out) {
        std::unique_lock lock(mutex);
        can_pop.wait(lock, [&] { return !queue.empty() || stop; });
        if (queue.empty()) {
            return false;
        }
        out = std::move(queue.front());
        queue.pop_front();
        can_push.notify_one();
        return true;
    }

    void shutdown(const std::string& why = {}) {
        std::scoped_lock lock(mutex);
        stop = true;
        if (!why.empty() && error.empty()) {
            error = why;
        }
        can_push.notify_all();
        can_pop.notify_all();
    }
};

} // namespace

void Trainer::run_multi_worker() {
    SegmentQueue queue;
    queue.capacity = static_cast<std::size_t>(2 * options_.train.workers);

    std::mutex snapshot_mutex;
    auto make_snapshot = [&] {
        auto snap = std::make_shared<std::vector<net::AgentNet>>();
        snap->reserve(agents_.size());
        for (const auto& agent : agents_) {
            snap->push_back(agent.snapshot());
        }
        return snap;
    };
    std::shared_ptr<std::vector<net::AgentNet>> snapshot = make_snapshot();
    std::uint64_t snapshot_version = 1;

    std::atomic<long long> global_steps{steps_done_};

    std::vector<std::thread> threads;
    threads.reserve(workers_.size());
    for (auto& worker : workers_) {
        threads.emplace_back([&, worker_ptr = &worker] {
            try {
                std::shared_ptr<std::vector<net::AgentNet>> local;
                std::uint64_t local_version = 0;
                for (;;) {
                    {
                        std::scoped_lock lock(snapshot_mutex);
                        if (local_version != snapshot_version) {
                            local = snapshot;
                            local_version = snapshot_version;
                        }
                    }
                    RolloutSegment segment =
                        worker_ptr->collect(*local, global_steps.load());
                    if (!queue.push(std::move(segment))) {
                        return;
                    }
                }
            } catch (const std::exception& e) {
                queue.shutdown(std::string("worker crashed: ") + e.what());
            }
        });
    }

    std::string failure;
    while (steps_done_ < options_.train.total_steps) {
        RolloutSegment segment;
        if (!queue.pop(segment)) {
            std::scoped_lock lock(queue.mutex);
            failure = queue.error;
            break;
        }
        const auto got = static_cast<long long>(segment.steps.size());
        update(std::move(segment));
        steps_done_ += got;
        global_steps.store(steps_done_);
        {
            std::scoped_lock lock(snapshot_mutex);
            snapshot = make_snapshot();
            ++snapshot_version;
        }
        maybe_eval_and_checkpoint();
        {
            std::scoped_lock lock(queue.mutex);
            if (!queue.error.empty()) {
                failure = queue.error;
                break;
            }
        }
    }
    queue.shutdown();
    for (auto& thread : threads) {
        thread.join();
    }
    if (!failure.empty()) {
        if (metrics_) {
            metrics_->flush();
        }
        throw std::runtime_error("Trainer: run aborted, " + failure);
    }
}

void Trainer::run() {
    namespace fs = std::filesystem;
    start_time_seconds_ = now_seconds();
    if (!options_.out_dir.empty()) {
        fs::create_directories(options_.out_dir);
        if (!options_.resolved_config_ini.empty()) {
            std::ofstream cfg(options_.out_dir / "config.ini");
            cfg << options_.resolved_config_ini;
        }
        const fs::path metrics_path = options_.out_dir / "metrics.csv";
        const bool fresh = !fs::exists(metrics_path) || steps_done_ == 0;
        metrics_ = std::make_unique<std::ofstream>(
            metrics_path, fresh ? std::ios::trunc : std::ios::app);
        if (fresh) {
            *metrics_ << "step,wall_time_s,ep_reward_mean,ep_reward_se,success_rate,"
                         "rl_loss,ground_loss,policy_entropy,grad_norm\n";
            metrics_->flush();
        }
    }
    if (options_.train.workers == 1) {
        run_single_worker();
    } else {
        run_multi_worker();
    }
    maybe_eval_and_checkpoint(/*force_final=*/true);
    if (metrics_) {
        metrics_->flush();
    }
}

void Trainer::save_checkpoint(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("save_checkpoint: cannot open " + path.string());
    }
    harness::write_checkpoint_header(out, options_.resolved_config_ini,
                                     static_cast<std::uint64_t>(steps_done_), eval_round_,
                                     checkpoint_round_,
                                     static_cast<std::uint32_t>(agents_.size()));
    harness::write_team(out, agents_);
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        adams_[i].save(out);
    }
    for (const auto& buffer : buffers_) {
        serial::write_u64(out, buffer.size());
        for (const auto& record : buffer.records()) {
            harness::write_trajectory_record(out, record);
        }
    }
    serial::write_string(out, grounding_rng_.serialize());
    serial::write_u64(out, workers_.size());
    for (const auto& worker : workers_) {
        worker.save_state(out);
    }
    if (!out) {
        throw IoError("save_checkpoint: write failed for " + path.string());
    }
}

void Trainer::restore(const std::filesystem::path& checkpoint_path) {
    std::ifstream in(checkpoint_path, std::ios::binary);
    if (!in) {
        throw IoError("restore: cannot open " + checkpoint_path.string());
    }
    harness::CheckpointHeader header = harness::read_checkpoint_header(in);
    if (header.n_agents != agents_.size()) {
        throw IoError("restore: checkpoint has " + std::to_string(header.n_agents) +
                      " agents, trainer has " + std::to_string(agents_.size()));
    }
    harness::read_team(in, agents_);
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        adams_[i].load(in);
    }
    for (auto& buffer : buffers_) {
        buffer.clear();
        std::uint64_t n_records = serial::read_u64(in, "buffers");
        for (std::uint64_t r = 0; r < n_records; ++r) {
            buffer.push(harness::read_trajectory_record(in));
        }
    }
    grounding_rng_ = Rng::deserialize(serial::read_string(in, "grounding_rng"));
    std::uint64_t n_workers = serial::read_u64(in, "workers");
    if (n_workers != workers_.size()) {
        throw IoError("restore: checkpoint has " + std::to_string(n_workers) +
                      " workers, trainer has " + std::to_string(workers_.size()));
    }
    for (auto& worker : workers_) {
        worker.load_state(in);
    }
    steps_done_ = static_cast<long long>(header.step);
    eval_round_ = header.eval_round;
    checkpoint_round_ = header.checkpoint_round;
}

} // namespace cacl::train
