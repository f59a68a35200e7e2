#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "cacl/agent.hpp"
#include "cacl/rng.hpp"
#include "cacl/tensor.hpp"

namespace cacl::grounding {

inline constexpr int kMsgDim = 4;

struct CaclConfig {
    double tau = 0.1;   // contrastive temperature
    double kappa = 0.5; // grounding-loss weight
    int batch_trajectories = 8;
    int max_messages_per_trajectory = 64;
    int buffer_capacity = 64;
};

// One timestep of an agent's episode log: its own observation (kept so the
// message can be recomputed under current parameters), the message it sent,
// and the messages the other agents sent the same step.
struct TrajectoryStep {
    std::vector<double> observation;
    std::array<double, kMsgDim> own_message{};
    std::vector<std::array<double, kMsgDim>> other_messages;
};

struct TrajectoryRecord {
    std::uint64_t trajectory_id = 0;
    std::vector<TrajectoryStep> steps;
};

// Bounded FIFO of an agent's completed episode logs.
class MessageBuffer {
public:
    explicit MessageBuffer(std::size_t capacity);

    void push(TrajectoryRecord record);
    std::size_t size() const { return records_.size(); }
    std::size_t capacity() const { return capacity_; }

    // k distinct records, uniformly without replacement.
    std::vector<const TrajectoryRecord*> sample(std::size_t k, Rng& rng) const;

    const std::deque<TrajectoryRecord>& records() const { return records_; }
    void clear() { records_.clear(); }

private:
    std::size_t capacity_;
    std::deque<TrajectoryRecord> records_;
};

// Contrastive alignment loss over a batch of trajectories' message sets.
// Messages are L2-normalized, then every message is an anchor whose
// positives are the other messages of its own trajectory:
//   sum_i (-1/|P(i)|) sum_{p in P(i)} [ (m_i . m_p)/tau - lse_{a != i}((m_i . m_a)/tau) ]
// reduced to the mean over anchors with a nonempty positive set.
double cacl_loss(std::span<const std::vector<std::array<double, kMsgDim>>> trajectories,
                 double tau);

// Tensor form over per-message tensors tagged with their trajectory index.
// Gradient flows into whichever message tensors are tracked.
ad::Tensor cacl_loss_t(std::span<const ad::Tensor> messages,
                       std::span<const int> trajectory_ids, double tau);

// Loss over a sampled batch for one agent: its own messages are recomputed
// from the stored observations under current parameters (gradient flows into
// its observation encoder and message head only); other agents' messages
// enter as constants. Long trajectories are uniformly subsampled to the
// configured message cap.
ad::Tensor cacl_gradient_scope(net::AgentNet& agent,
                               std::span<const TrajectoryRecord* const> batch,
                               const CaclConfig& config, Rng& subsample_rng);

// AE-COMM grounding: mean squared error between the decoded message and a
// stop-gradient copy of the observation encoding, averaged over the batch.
ad::Tensor ae_loss(net::AgentNet& agent, std::span<const std::vector<double>> observations);

// Observation batch for ae_loss drawn from sampled trajectory records,
// uniformly subsampled to max_obs.
std::vector<std::vector<double>> collect_observations(
    std::span<const TrajectoryRecord* const> batch, std::size_t max_obs, Rng& rng);

} // namespace cacl::grounding
