#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cacl/layers.hpp"

namespace cacl::net {

enum class Method { kCacl, kAeComm, kNoComm };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct AgentConfig {
    int obs_dim = 0;
    int n_actions = 0;
    int n_agents = 0;
    Method method = Method::kCacl;
    int msg_dim = 4;
    int obs_enc_dim = 32;
    int msg_enc_dim = 16;
    int hidden_dim = 32;
    int head_hidden = 32;

    int received_dim() const { return msg_dim * (n_agents - 1); }
    bool has_message_head() const { return method != Method::kNoComm; }
    bool has_decoder() const { return method == Method::kAeComm; }
};

// One agent's networks: observation/message encoders, GRU core, and the
// policy/value/message heads. Agents never share parameter storage.
class AgentNet {
public:
    AgentNet(const AgentConfig& config, std::uint64_t init_seed);

    AgentNet(const AgentNet&) = delete;
    AgentNet& operator=(const AgentNet&) = delete;
    AgentNet(AgentNet&&) = default;
    AgentNet& operator=(AgentNet&&) = default;

    const AgentConfig& config() const { return config_; }

    SnMode mode() const { return mode_; }
    void set_mode(SnMode mode);

    ad::Tensor encode_obs(const ad::Tensor& obs) const;
    ad::Tensor encode_messages(const ad::Tensor& received) const;

    // m = sigmoid(message_head(obs encoding)); each component in (0,1).
    ad::Tensor produce_message(const ad::Tensor& obs);
    ad::Tensor message_from_encoding(const ad::Tensor& obs_encoding);

    struct PolicyOut {
        ad::Tensor hidden;
        ad::Tensor logits;
        ad::Tensor value;
    };
    // One recurrent step: received messages are the other agents' previous
    // messages, zeros at episode start.
    PolicyOut policy_step(const ad::Tensor& obs, const ad::Tensor& received, const ad::Tensor& h);

    struct ActResult {
        int action = 0;
        ad::Tensor log_prob;
        ad::Tensor entropy;
        ad::Tensor value;
        ad::Tensor hidden;
    };
    ActResult act(const ad::Tensor& h, const ad::Tensor& obs, const ad::Tensor& received,
                  Rng& rng);

    // AE decoder path; contract error unless the agent was built with one.
    ad::Tensor reconstruct(const ad::Tensor& message);

    std::vector<ad::Tensor> parameters() const;
    std::vector<std::string> parameter_names() const;

    // Non-learned state that still matters for reproducibility: the
    // spectral-norm singular-vector estimates of each head.
    std::vector<std::pair<std::string, std::vector<double>*>> state_buffers();

    // Deep copy in eval mode, for read-only rollout snapshots.
    AgentNet snapshot() const;

    ad::Tensor zero_hidden() const;

private:
    AgentConfig config_;
    SnMode mode_ = SnMode::kTrain;

    Linear obs_encoder_;
    Linear msg_encoder_;
    GruCell gru_;
    Head policy_head_;
    Head value_head_;
    std::optional<Head> message_head_;
    std::optional<Linear> decoder_;
};

// Builds the per-agent networks for a whole team, each with an independent
// init stream.
std::vector<AgentNet> make_team(const AgentConfig& config, std::uint64_t seed);

} // namespace cacl::net
