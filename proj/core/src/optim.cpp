#include "cacl/optim.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace cacl::ad {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    first_moment_.reserve(params_.size());
    second_moment_.reserve(params_.size());
    for (const Tensor& p : params_) {
        first_moment_.emplace_back(p.size(), 0.0);
        second_moment_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step() {
    for (std::size_t k = 0; k < params_.size(); ++k) {
        if (params_[k].has_grad() && !all_finite(params_[k].grad())) {
            throw NumericError("Adam::step: non-finite gradient in parameter " +
                               std::to_string(k) + ", update aborted");
        }
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = params_[k];
        auto data = p.mutable_data();
        auto g = p.grad();
        auto& m = first_moment_[k];
        auto& v = second_moment_[k];
        for (std::size_t i = 0; i < data.size(); ++i) {
            double gi = i < g.size() ? g[i] : 0.0;
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            data[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (Tensor& p : params_) {
        p.zero_grad();
    }
}

void Adam::save(std::ostream& out) const {
    auto write_u64 = [&](std::uint64_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    auto write_vec = [&](const std::vector<double>& v) {
        write_u64(v.size());
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    write_u64(step_count_);
    write_u64(params_.size());
    for (std::size_t k = 0; k < params_.size(); ++k) {
        write_vec(first_moment_[k]);
        write_vec(second_moment_[k]);
    }
}

void Adam::load(std::istream& in) {
    auto read_u64 = [&]() {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        return v;
    };
    auto read_vec = [&](std::vector<double>& v, std::size_t expected) {
        std::uint64_t n = read_u64();
        if (n != expected) {
            throw IoError("Adam::load: moment array size mismatch");
        }
        v.resize(n);
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
    };
    step_count_ = read_u64();
    std::uint64_t n_params = read_u64();
    if (n_params != params_.size()) {
        throw IoError("Adam::load: parameter count mismatch");
    }
    for (std::size_t k = 0; k < params_.size(); ++k) {
        read_vec(first_moment_[k], params_[k].size());
        read_vec(second_moment_[k], params_[k].size());
    }
    if (!in) {
        throw IoError("Adam::load: truncated optimizer state");
    }
}

double clip_gradients(std::span<const Tensor> params, double max_norm) {
    if (max_norm <= 0.0) {
        throw ContractError("clip_gradients: max_norm must be positive");
    }
    double norm_sq = 0.0;
    for (const Tensor& p : params) {
        for (double g : p.grad()) {
            norm_sq += g * g;
        }
    }
    double norm = std::sqrt(norm_sq);
    if (norm > max_norm) {
        double factor = max_norm / norm;
        for (const Tensor& p : params) {
            auto& grad = p.node()->grad;
            for (double& g : grad) {
                g *= factor;
            }
        }
    }
    return norm;
}

} // namespace cacl::ad
