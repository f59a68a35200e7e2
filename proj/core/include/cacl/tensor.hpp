#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cacl/errors.hpp"

namespace cacl::ad {

struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad; // empty until backward touches this node
    bool requires_grad = false;

    std::size_t size() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) {
            grad.assign(data.size(), 0.0);
        }
    }
};

using NodePtr = std::shared_ptr<TensorNode>;

// Value handle over a shared node. Copying a Tensor shares storage; clone()
// makes an independent copy. All data is 64-bit real.
class Tensor {
public:
    Tensor() = default;

    static Tensor from(std::vector<std::size_t> shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor vector(std::vector<double> data, bool requires_grad = false);
    static Tensor vector(std::span<const double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t size() const { return node_->data.size(); }
    bool is_scalar() const { return defined() && node_->data.size() == 1; }

    std::span<const double> data() const { return node_->data; }
    std::span<double> mutable_data() { return node_->data; }
    double value() const;
    double operator[](std::size_t i) const { return node_->data[i]; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const;
    void zero_grad() { node_->grad.clear(); }

    Tensor clone() const;
    // Same values, no gradient tracking, not tied to any tape.
    Tensor detached() const;

    const NodePtr& node() const { return node_; }

private:
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}
    NodePtr node_;
};

// Reverse-mode tape. Operations append entries in execution order, which is
// topological by construction; backward() walks the entries once in reverse.
class Tape {
public:
    struct Entry {
        NodePtr output;
        std::function<void()> backward;
    };

    void record(NodePtr output, std::function<void()> backward) {
        entries_.push_back(Entry{std::move(output), std::move(backward)});
    }

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every tracked
    // node reachable from it. The loss must be a scalar recorded on this tape.
    void backward(const Tensor& loss);

    std::size_t size() const { return entries_.size(); }
    void clear() { entries_.clear(); }

private:
    std::vector<Entry> entries_;
};

// Thread-local active tape. Ops record onto it when any input is tracked;
// with no active tape, ops are plain value computations.
Tape* active_tape();
void set_active_tape(Tape* tape);

class TapeScope {
public:
    explicit TapeScope(Tape& tape) : previous_(active_tape()) { set_active_tape(&tape); }
    ~TapeScope() { set_active_tape(previous_); }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

// Accumulates g into the node's gradient if it is tracked.
void accumulate_grad(TensorNode& node, std::span<const double> g);

bool all_finite(std::span<const double> values);
void check_finite(const Tensor& t, const char* context);

std::string shape_string(std::span<const std::size_t> shape);

} // namespace cacl::ad
