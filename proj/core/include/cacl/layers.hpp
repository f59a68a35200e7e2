#pragma once

#include <string>
#include <vector>

#include "cacl/ops.hpp"
#include "cacl/rng.hpp"
#include "cacl/spectral.hpp"
#include "cacl/tensor.hpp"

namespace cacl::net {

// Spectral-norm handling mode for forward passes.
//  kTrain:  refine the power-iteration estimate once per forward.
//  kEval:   keep the singular-vector estimates frozen.
//  kFrozen: additionally pin sigma itself, so the layer is a fixed function
//           of its parameters (used by finite-difference checks).
enum class SnMode { kTrain, kEval, kFrozen };

struct Linear {
    ad::Tensor weight; // [out, in]
    ad::Tensor bias;   // [out]

    Linear() = default;
    Linear(std::size_t in_dim, std::size_t out_dim, Rng& rng);

    ad::Tensor forward(const ad::Tensor& x) const { return ad::affine(weight, x, bias); }

    std::size_t in_dim() const { return weight.shape()[1]; }
    std::size_t out_dim() const { return weight.shape()[0]; }

    Linear clone() const;
    void collect(const std::string& prefix, std::vector<ad::Tensor>& params,
                 std::vector<std::string>& names) const;
};

// Affine layer whose weight is divided by its estimated largest singular
// value before use. Gradients treat the estimate as a constant.
struct SpectralLinear {
    ad::Tensor weight;
    ad::Tensor bias;
    ad::SpectralNorm norm;

    SpectralLinear() = default;
    SpectralLinear(std::size_t in_dim, std::size_t out_dim, Rng& rng);

    ad::Tensor forward(const ad::Tensor& x, SnMode mode);

    SpectralLinear clone() const;
    void collect(const std::string& prefix, std::vector<ad::Tensor>& params,
                 std::vector<std::string>& names) const;

    double frozen_sigma = 0.0; // valid while mode == kFrozen
    void freeze_sigma() { frozen_sigma = norm.sigma(weight); }
};

// Standard gated recurrent unit:
//   z = sigmoid(Wz [x,h] + bz), r = sigmoid(Wr [x,h] + br),
//   c = tanh(Wc [x, r*h] + bc), h' = (1-z)*h + z*c.
struct GruCell {
    Linear update_gate;
    Linear reset_gate;
    Linear candidate;

    GruCell() = default;
    GruCell(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

    ad::Tensor step(const ad::Tensor& x, const ad::Tensor& h) const;

    std::size_t hidden_dim() const { return update_gate.out_dim(); }
    std::size_t input_dim() const { return update_gate.in_dim() - hidden_dim(); }

    GruCell clone() const;
    void collect(const std::string& prefix, std::vector<ad::Tensor>& params,
                 std::vector<std::string>& names) const;
};

// 3-layer fully-connected head with spectral normalization on the
// penultimate layer. Hidden activations are ReLU, the output is linear.
struct Head {
    Linear input;
    SpectralLinear penultimate;
    Linear output;

    Head() = default;
    Head(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim, Rng& rng);

    ad::Tensor forward(const ad::Tensor& x, SnMode mode);

    Head clone() const;
    void collect(const std::string& prefix, std::vector<ad::Tensor>& params,
                 std::vector<std::string>& names) const;
};

} // namespace cacl::net
