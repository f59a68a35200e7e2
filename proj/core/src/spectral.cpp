#include "cacl/spectral.hpp"

#include <cmath>

#include "cacl/ops.hpp"

namespace cacl::ad {

namespace {

double normalize_in_place(std::vector<double>& v) {
    double norm_sq = 0.0;
    for (double x : v) {
        norm_sq += x * x;
    }
    double norm = std::sqrt(norm_sq);
    if (norm > 0.0) {
        for (double& x : v) {
            x /= norm;
        }
    }
    return norm;
}

} // namespace

SpectralNorm::SpectralNorm(std::size_t rows, std::size_t cols, Rng& init_rng) {
    u_.resize(rows);
    v_.resize(cols);
    for (double& x : u_) {
        x = init_rng.normal();
    }
    for (double& x : v_) {
        x = init_rng.normal();
    }
    normalize_in_place(u_);
    normalize_in_place(v_);
}

double SpectralNorm::sigma(const Tensor& weight) const {
    const std::size_t rows = weight.shape()[0];
    const std::size_t cols = weight.shape()[1];
    const auto w = weight.data();
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        double wv = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            wv += w[i * cols + j] * v_[j];
        }
        s += u_[i] * wv;
    }
    return s;
}

Tensor SpectralNorm::apply(const Tensor& weight, int power_iters, bool update) {
    if (weight.shape().size() != 2) {
        throw ContractError("SpectralNorm::apply: weight must be 2-D, got " +
                            shape_string(weight.shape()));
    }
    const std::size_t rows = weight.shape()[0];
    const std::size_t cols = weight.shape()[1];
    if (u_.size() != rows || v_.size() != cols) {
        throw ContractError("SpectralNorm::apply: estimate size mismatch");
    }
    const auto w = weight.data();
    if (update) {
        for (int it = 0; it < power_iters; ++it) {
            // v <- normalize(W^T u); u <- normalize(W v)
            for (std::size_t j = 0; j < cols; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < rows; ++i) {
                    acc += w[i * cols + j] * u_[i];
                }
                v_[j] = acc;
            }
            normalize_in_place(v_);
            for (std::size_t i = 0; i < rows; ++i) {
                double acc = 0.0;
                const double* row = w.data() + i * cols;
                for (std::size_t j = 0; j < cols; ++j) {
                    acc += row[j] * v_[j];
                }
                u_[i] = acc;
            }
            normalize_in_place(u_);
        }
    }
    double s = sigma(weight);
    if (s == 0.0) {
        warn("spectral_normalize_zero",
             "spectral_normalize of a zero matrix, returning weight unchanged");
        return scale(weight, 1.0);
    }
    // sigma is a constant for the backward pass.
    return scale(weight, 1.0 / s);
}

Tensor spectral_normalize(const Tensor& weight, int power_iters, Rng& rng) {
    SpectralNorm sn(weight.shape()[0], weight.shape()[1], rng);
    return sn.apply(weight, power_iters, true);
}

} // namespace cacl::ad
