#include "cacl/agent.hpp"

namespace cacl::net {

std::string method_name(Method m) {
    switch (m) {
    case Method::kCacl:
        return "cacl";
    case Method::kAeComm:
        return "aecomm";
    case Method::kNoComm:
        return "nocomm";
    }
    return "unknown";
}

Method method_from_name(const std::string& name) {
    if (name == "cacl") {
        return Method::kCacl;
    }
    if (name == "aecomm" || name == "ae-comm" || name == "ae_comm") {
        return Method::kAeComm;
    }
    if (name == "nocomm" || name == "no-comm" || name == "no_comm") {
        return Method::kNoComm;
    }
    throw ContractError("unknown method '" + name + "' (expected cacl, aecomm or nocomm)");
}

AgentNet::AgentNet(const AgentConfig& config, std::uint64_t init_seed) : config_(config) {
    if (config.obs_dim <= 0 || config.n_actions <= 0 || config.n_agents <= 0) {
        throw ContractError("AgentNet: obs_dim, n_actions and n_agents must be positive");
    }
    Rng rng(init_seed);
    const auto obs_dim = static_cast<std::size_t>(config.obs_dim);
    const auto enc = static_cast<std::size_t>(config.obs_enc_dim);
    const auto menc = static_cast<std::size_t>(config.msg_enc_dim);
    const auto hid = static_cast<std::size_t>(config.hidden_dim);
    const auto hh = static_cast<std::size_t>(config.head_hidden);

    obs_encoder_ = Linear(obs_dim, enc, rng);
    msg_encoder_ = Linear(static_cast<std::size_t>(config.received_dim()), menc, rng);
    gru_ = GruCell(enc + menc, hid, rng);
    policy_head_ = Head(hid, hh, static_cast<std::size_t>(config.n_actions), rng);
    value_head_ = Head(hid, hh, 1, rng);
    if (config.has_message_head()) {
        message_head_.emplace(enc, hh, static_cast<std::size_t>(config.msg_dim), rng);
    }
    if (config.has_decoder()) {
        decoder_.emplace(static_cast<std::size_t>(config.msg_dim), enc, rng);
    }
}

void AgentNet::set_mode(SnMode mode) {
    mode_ = mode;
    if (mode == SnMode::kFrozen) {
        policy_head_.penultimate.freeze_sigma();
        value_head_.penultimate.freeze_sigma();
        if (message_head_) {
            message_head_->penultimate.freeze_sigma();
        }
    }
}

ad::Tensor AgentNet::encode_obs(const ad::Tensor& obs) const {
    if (obs.size() != static_cast<std::size_t>(config_.obs_dim)) {
        throw ContractError("AgentNet::encode_obs: observation has " +
                            std::to_string(obs.size()) + " components, expected " +
                            std::to_string(config_.obs_dim));
    }
    return ad::relu(obs_encoder_.forward(obs));
}

ad::Tensor AgentNet::encode_messages(const ad::Tensor& received) const {
    if (received.size() != static_cast<std::size_t>(config_.received_dim())) {
        throw ContractError("AgentNet::encode_messages: received vector has " +
                            std::to_string(received.size()) + " components, expected " +
                            std::to_string(config_.received_dim()));
    }
    return ad::relu(msg_encoder_.forward(received));
}

ad::Tensor AgentNet::produce_message(const ad::Tensor& obs) {
    return message_from_encoding(encode_obs(obs));
}

ad::Tensor AgentNet::message_from_encoding(const ad::Tensor& obs_encoding) {
    if (!message_head_) {
        throw ContractError("AgentNet::produce_message: method '" +
                            method_name(config_.method) + "' has no message head");
    }
    return ad::sigmoid(message_head_->forward(obs_encoding, mode_));
}

AgentNet::PolicyOut AgentNet::policy_step(const ad::Tensor& obs, const ad::Tensor& received,
                                          const ad::Tensor& h) {
    const ad::Tensor e_obs = encode_obs(obs);
    const ad::Tensor e_msg = encode_messages(received);
    const ad::Tensor x = ad::concat(std::array{e_obs, e_msg});
    PolicyOut out;
    out.hidden = gru_.step(x, h);
    out.logits = policy_head_.forward(out.hidden, mode_);
    out.value = ad::pick(value_head_.forward(out.hidden, mode_), 0);
    return out;
}

AgentNet::ActResult AgentNet::act(const ad::Tensor& h, const ad::Tensor& obs,
                                  const ad::Tensor& received, Rng& rng) {
    PolicyOut step = policy_step(obs, received, h);
    if (!ad::all_finite(step.logits.data())) {
        throw NumericError("AgentNet::act: non-finite policy logits");
    }
    const ad::Tensor probs = ad::softmax(step.logits);
    const ad::Tensor log_probs = ad::log_softmax(step.logits);
    ActResult result;
    result.action = rng.categorical(probs.data());
    result.log_prob = ad::pick(log_probs, static_cast<std::size_t>(result.action));
    result.entropy = ad::neg(ad::dot(probs, log_probs));
    result.value = step.value;
    result.hidden = step.hidden;
    return result;
}

ad::Tensor AgentNet::reconstruct(const ad::Tensor& message) {
    if (!decoder_) {
        throw ContractError("AgentNet::reconstruct: method '" + method_name(config_.method) +
                            "' has no decoder");
    }
    if (message.size() != static_cast<std::size_t>(config_.msg_dim)) {
        throw ContractError("AgentNet::reconstruct: message has " +
                            std::to_string(message.size()) + " components, expected " +
                            std::to_string(config_.msg_dim));
    }
    return decoder_->forward(message);
}

std::vector<ad::Tensor> AgentNet::parameters() const {
    std::vector<ad::Tensor> params;
    std::vector<std::string> names;
    obs_encoder_.collect("obs_encoder", params, names);
    msg_encoder_.collect("msg_encoder", params, names);
    gru_.collect("gru", params, names);
    policy_head_.collect("policy", params, names);
    value_head_.collect("value", params, names);
    if (message_head_) {
        message_head_->collect("message", params, names);
    }
    if (decoder_) {
        decoder_->collect("decoder", params, names);
    }
    return params;
}

std::vector<std::string> AgentNet::parameter_names() const {
    std::vector<ad::Tensor> params;
    std::vector<std::string> names;
    obs_encoder_.collect("obs_encoder", params, names);
    msg_encoder_.collect("msg_encoder", params, names);
    gru_.collect("gru", params, names);
    policy_head_.collect("policy", params, names);
    value_head_.collect("value", params, names);
    if (message_head_) {
        message_head_->collect("message", params, names);
    }
    if (decoder_) {
        decoder_->collect("decoder", params, names);
    }
    return names;
}

std::vector<std::pair<std::string, std::vector<double>*>> AgentNet::state_buffers() {
    std::vector<std::pair<std::string, std::vector<double>*>> buffers;
    buffers.emplace_back("policy.l2.sn_u", &policy_head_.penultimate.norm.left());
    buffers.emplace_back("policy.l2.sn_v", &policy_head_.penultimate.norm.right());
    buffers.emplace_back("value.l2.sn_u", &value_head_.penultimate.norm.left());
    buffers.emplace_back("value.l2.sn_v", &value_head_.penultimate.norm.right());
    if (message_head_) {
        buffers.emplace_back("message.l2.sn_u", &message_head_->penultimate.norm.left());
        buffers.emplace_back("message.l2.sn_v", &message_head_->penultimate.norm.right());
    }
    return buffers;
}

AgentNet AgentNet::snapshot() const {
    AgentNet copy(config_, 0);
    copy.obs_encoder_ = obs_encoder_.clone();
    copy.msg_encoder_ = msg_encoder_.clone();
    copy.gru_ = gru_.clone();
    copy.policy_head_ = policy_head_.clone();
    copy.value_head_ = value_head_.clone();
    if (message_head_) {
        copy.message_head_ = message_head_->clone();
    }
    if (decoder_) {
        copy.decoder_ = decoder_->clone();
    }
    copy.mode_ = SnMode::kEval;
    return copy;
}

ad::Tensor AgentNet::zero_hidden() const {
    return ad::Tensor::zeros({static_cast<std::size_t>(config_.hidden_dim)});
}

std::vector<AgentNet> make_team(const AgentConfig& config, std::uint64_t seed) {
    std::vector<AgentNet> team;
    team.reserve(static_cast<std::size_t>(config.n_agents));
    for (int i = 0; i < config.n_agents; ++i) {
        team.emplace_back(config, derive_seed(seed, /*stream=*/1, static_cast<std::uint64_t>(i)));
    }
    return team;
}

} // namespace cacl::net
