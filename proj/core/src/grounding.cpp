#include "cacl/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cacl/ops.hpp"

namespace cacl::grounding {

MessageBuffer::MessageBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
        throw ContractError("MessageBuffer: capacity must be positive");
    }
}

void MessageBuffer::push(TrajectoryRecord record) {
    records_.push_back(std::move(record));
    while (records_.size() > capacity_) {
        records_.pop_front();
    }
}

std::vector<const TrajectoryRecord*> MessageBuffer::sample(std::size_t k, Rng& rng) const {
    if (records_.empty()) {
        throw ContractError("MessageBuffer::sample: buffer is empty");
    }
    if (k > records_.size()) {
        throw ContractError("MessageBuffer::sample: requested " + std::to_string(k) +
                            " of " + std::to_string(records_.size()) + " records");
    }
    // Partial Fisher-Yates over an index vector.
    std::vector<std::size_t> idx(records_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<const TrajectoryRecord*> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(idx.size() - i));
        std::swap(idx[i], idx[j]);
        out.push_back(&records_[idx[i]]);
    }
    return out;
}

namespace {

// Core contrastive term over already-normalized unit messages. Forward and
// backward are fused into a single tape entry: the O(n^2) similarity matrix
// stays out of the tape and the analytic gradient w.r.t. each message is
// accumulated directly.
ad::Tensor contrastive_core(std::span<const ad::Tensor> messages,
                            std::span<const int> trajectory_ids, double tau) {
    const std::size_t n = messages.size();
    const std::size_t d = messages[0].size();
    // Flattened copy of the message matrix.
    std::vector<double> m(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        if (messages[i].size() != d) {
            throw ContractError("cacl_loss: inconsistent message dimensions");
        }
        std::copy(messages[i].data().begin(), messages[i].data().end(), m.begin() + i * d);
    }

    std::vector<std::size_t> positive_count(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && trajectory_ids[i] == trajectory_ids[j]) {
                ++positive_count[i];
            }
        }
    }

    // Similarity logits z[i*n+j] = (m_i . m_j) / tau, diagonal unused.
    std::vector<double> z(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                s += m[i * d + k] * m[j * d + k];
            }
            s /= tau;
            z[i * n + j] = s;
            z[j * n + i] = s;
        }
    }

    // Per-anchor log-sum-exp over A(i) = everything but i, max-subtracted.
    std::vector<double> lse(n, 0.0);
    double total = 0.0;
    std::size_t anchors = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (positive_count[i] == 0) {
            continue; // anchor skipped
        }
        double zmax = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                zmax = std::max(zmax, z[i * n + j]);
            }
        }
        double acc = 0.0;
        double pos_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            acc += std::exp(z[i * n + j] - zmax);
            if (trajectory_ids[j] == trajectory_ids[i]) {
                pos_sum += z[i * n + j];
            }
        }
        lse[i] = zmax + std::log(acc);
        total += lse[i] - pos_sum / static_cast<double>(positive_count[i]);
        ++anchors;
    }

    if (anchors == 0) {
        warn("cacl_no_anchors", "cacl_loss: every anchor has an empty positive set");
        return ad::Tensor::scalar(0.0);
    }
    const double inv_anchors = 1.0 / static_cast<double>(anchors);
    ad::Tensor loss = ad::Tensor::scalar(total * inv_anchors);

    ad::Tape* tape = ad::active_tape();
    bool tracked = false;
    for (const ad::Tensor& msg : messages) {
        tracked = tracked || msg.requires_grad();
    }
    if (tape && tracked) {
        loss.set_requires_grad(true);
        std::vector<ad::NodePtr> nodes;
        nodes.reserve(n);
        for (const ad::Tensor& msg : messages) {
            nodes.push_back(msg.node());
        }
        std::vector<int> ids(trajectory_ids.begin(), trajectory_ids.end());
        auto out = loss.node();
        tape->record(out, [nodes = std::move(nodes), ids = std::move(ids), m = std::move(m),
                           z = std::move(z), lse = std::move(lse),
                           positive_count = std::move(positive_count), out, tau, inv_anchors, n,
                           d] {
            const double g = out->grad[0];
            // dL/dz[i][j] for anchors i: softmax(z_i)_j - [same trajectory]/|P(i)|,
            // all divided by the anchor count.
            std::vector<double> gm(n * d, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (positive_count[i] == 0) {
                    continue;
                }
                const double inv_p = 1.0 / static_cast<double>(positive_count[i]);
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == i) {
                        continue;
                    }
                    double coeff = std::exp(z[i * n + j] - lse[i]);
                    if (ids[j] == ids[i]) {
                        coeff -= inv_p;
                    }
                    coeff *= inv_anchors * g / tau;
                    for (std::size_t k = 0; k < d; ++k) {
                        gm[i * d + k] += coeff * m[j * d + k];
                        gm[j * d + k] += coeff * m[i * d + k];
                    }
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (nodes[i]->requires_grad) {
                    ad::accumulate_grad(*nodes[i],
                                        std::span<const double>(gm.data() + i * d, d));
                }
            }
        });
    }
    return loss;
}

} // namespace

ad::Tensor cacl_loss_t(std::span<const ad::Tensor> messages,
                       std::span<const int> trajectory_ids, double tau) {
    if (messages.empty()) {
        throw ContractError("cacl_loss: empty batch");
    }
    if (messages.size() != trajectory_ids.size()) {
        throw ContractError("cacl_loss: message / trajectory-id count mismatch");
    }
    if (!(tau > 0.0)) {
        throw ContractError("cacl_loss: temperature must be positive");
    }
    std::vector<int> distinct(trajectory_ids.begin(), trajectory_ids.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) {
        warn("cacl_few_trajectories",
             "cacl_loss over fewer than 2 trajectories: attraction-only form");
    }
    std::vector<ad::Tensor> normalized;
    normalized.reserve(messages.size());
    for (const ad::Tensor& msg : messages) {
        normalized.push_back(ad::l2_normalize(msg));
    }
    return contrastive_core(normalized, trajectory_ids, tau);
}

double cacl_loss(std::span<const std::vector<std::array<double, kMsgDim>>> trajectories,
                 double tau) {
    std::vector<ad::Tensor> messages;
    std::vector<int> ids;
    for (std::size_t t = 0; t < trajectories.size(); ++t) {
        for (const auto& msg : trajectories[t]) {
            messages.push_back(ad::Tensor::vector(std::vector<double>(msg.begin(), msg.end())));
            ids.push_back(static_cast<int>(t));
        }
    }
    return cacl_loss_t(messages, ids, tau).value();
}

namespace {

// Uniform without-replacement pick of k slot indices out of total, returned
// in ascending order.
std::vector<std::size_t> subsample_indices(std::size_t total, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace

ad::Tensor cacl_gradient_scope(net::AgentNet& agent,
                               std::span<const TrajectoryRecord* const> batch,
                               const CaclConfig& config, Rng& subsample_rng) {
    if (batch.empty()) {
        throw ContractError("cacl_gradient_scope: empty batch");
    }
    std::vector<ad::Tensor> messages;
    std::vector<int> ids;
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const TrajectoryRecord& record = *batch[t];
        if (record.steps.empty()) {
            continue;
        }
        const std::size_t senders = 1 + record.steps.front().other_messages.size();
        const std::size_t total = record.steps.size() * senders;
        std::vector<std::size_t> keep;
        const auto cap = static_cast<std::size_t>(config.max_messages_per_trajectory);
        if (cap > 0 && total > cap) {
            keep = subsample_indices(total, cap, subsample_rng);
        } else {
            keep.resize(total);
            std::iota(keep.begin(), keep.end(), 0);
        }
        for (std::size_t slot : keep) {
            const std::size_t step = slot / senders;
            const std::size_t sender = slot % senders;
            const TrajectoryStep& entry = record.steps[step];
            if (sender == 0) {
                // Own message, recomputed under current parameters.
                if (entry.observation.empty()) {
                    throw ContractError(
                        "cacl_gradient_scope: trajectory record is missing observations");
                }
                messages.push_back(
                    agent.produce_message(ad::Tensor::vector(entry.observation)));
            } else {
                const auto& msg = entry.other_messages[sender - 1];
                messages.push_back(
                    ad::Tensor::vector(std::vector<double>(msg.begin(), msg.end())));
            }
            ids.push_back(static_cast<int>(t));
        }
    }
    if (messages.empty()) {
        throw ContractError("cacl_gradient_scope: batch holds no messages");
    }
    return cacl_loss_t(messages, ids, config.tau);
}

ad::Tensor ae_loss(net::AgentNet& agent, std::span<const std::vector<double>> observations) {
    if (!agent.config().has_decoder()) {
        throw ContractError("ae_loss: agent has no decoder (method " +
                            net::method_name(agent.config().method) + ")");
    }
    if (observations.empty()) {
        throw ContractError("ae_loss: empty observation batch");
    }
    ad::Tensor total = ad::Tensor::scalar(0.0);
    for (const auto& obs : observations) {
        ad::Tensor encoding = agent.encode_obs(ad::Tensor::vector(obs));
        ad::Tensor target = ad::stop_grad(encoding);
        ad::Tensor message = agent.message_from_encoding(encoding);
        ad::Tensor reconstructed = agent.reconstruct(message);
        total = ad::add(total, ad::mse(reconstructed, target));
    }
    return ad::scale(total, 1.0 / static_cast<double>(observations.size()));
}

std::vector<std::vector<double>> collect_observations(
    std::span<const TrajectoryRecord* const> batch, std::size_t max_obs, Rng& rng) {
    std::vector<const std::vector<double>*> all;
    for (const TrajectoryRecord* record : batch) {
        for (const TrajectoryStep& step : record->steps) {
            all.push_back(&step.observation);
        }
    }
    std::vector<std::vector<double>> out;
    if (all.empty()) {
        return out;
    }
    if (max_obs > 0 && all.size() > max_obs) {
        auto keep = subsample_indices(all.size(), max_obs, rng);
        out.reserve(keep.size());
        for (std::size_t i : keep) {
            out.push_back(*all[i]);
        }
    } else {
        out.reserve(all.size());
        for (const auto* obs : all) {
            out.push_back(*obs);
        }
    }
    return out;
}

} // namespace cacl::grounding
