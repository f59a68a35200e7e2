#include "cacl/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace cacl::ad {

namespace {
thread_local Tape* t_active_tape = nullptr;

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}
} // namespace

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data,
                    bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw ContractError("Tensor::from: data length " + std::to_string(data.size()) +
                            " does not match shape " + shape_string(shape));
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::vector(std::vector<double> data, bool requires_grad) {
    std::size_t n = data.size();
    return from({n}, std::move(data), requires_grad);
}

Tensor Tensor::vector(std::span<const double> data, bool requires_grad) {
    return vector(std::vector<double>(data.begin(), data.end()), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

double Tensor::value() const {
    if (!is_scalar()) {
        throw ContractError("Tensor::value: tensor of shape " + shape_string(shape()) +
                            " is not scalar");
    }
    return node_->data[0];
}

std::span<const double> Tensor::grad() const {
    static const std::vector<double> empty;
    if (node_->grad.empty()) {
        return empty;
    }
    return node_->grad;
}

Tensor Tensor::clone() const {
    auto node = std::make_shared<TensorNode>();
    node->shape = node_->shape;
    node->data = node_->data;
    node->requires_grad = node_->requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::detached() const {
    auto node = std::make_shared<TensorNode>();
    node->shape = node_->shape;
    node->data = node_->data;
    node->requires_grad = false;
    return Tensor(std::move(node));
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || !loss.is_scalar()) {
        throw ContractError("Tape::backward: loss must be a defined scalar tensor");
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->output->grad.empty()) {
            continue; // not on a path to the loss
        }
        it->backward();
    }
}

Tape* active_tape() { return t_active_tape; }
void set_active_tape(Tape* tape) { t_active_tape = tape; }

void accumulate_grad(TensorNode& node, std::span<const double> g) {
    if (!node.requires_grad) {
        return;
    }
    node.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
        node.grad[i] += g[i];
    }
}

bool all_finite(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

void check_finite(const Tensor& t, const char* context) {
    if (!all_finite(t.data())) {
        throw NumericError(std::string(context) + ": non-finite value encountered");
    }
}

std::string shape_string(std::span<const std::size_t> shape) {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) {
            out << ",";
        }
        out << shape[i];
    }
    out << "]";
    return out.str();
}

} // namespace cacl::ad
