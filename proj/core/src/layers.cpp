#include "cacl/layers.hpp"

#include <cmath>

namespace cacl::net {

namespace {

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
ad::Tensor init_matrix(std::size_t out_dim, std::size_t in_dim, Rng& rng) {
    double bound = in_dim > 0 ? 1.0 / std::sqrt(static_cast<double>(in_dim)) : 1.0;
    std::vector<double> data(out_dim * in_dim);
    for (double& v : data) {
        v = rng.uniform(-bound, bound);
    }
    return ad::Tensor::from({out_dim, in_dim}, std::move(data), /*requires_grad=*/true);
}

ad::Tensor init_bias(std::size_t out_dim, std::size_t in_dim, Rng& rng) {
    double bound = in_dim > 0 ? 1.0 / std::sqrt(static_cast<double>(in_dim)) : 1.0;
    std::vector<double> data(out_dim);
    for (double& v : data) {
        v = rng.uniform(-bound, bound);
    }
    return ad::Tensor::from({out_dim}, std::move(data), /*requires_grad=*/true);
}

} // namespace

Linear::Linear(std::size_t in_dim, std::size_t out_dim, Rng& rng)
    : weight(init_matrix(out_dim, in_dim, rng)), bias(init_bias(out_dim, in_dim, rng)) {}

Linear Linear::clone() const {
    Linear copy;
    copy.weight = weight.clone();
    copy.bias = bias.clone();
    return copy;
}

void Linear::collect(const std::string& prefix, std::vector<ad::Tensor>& params,
                     std::vector<std::string>& names) const {
    params.push_back(weight);
    names.push_back(prefix + ".weight");
    params.push_back(bias);
    names.push_back(prefix + ".bias");
}

SpectralLinear::SpectralLinear(std::size_t in_dim, std::size_t out_dim, Rng& rng)
    : weight(init_matrix(out_dim, in_dim, rng)), bias(init_bias(out_dim, in_dim, rng)),
      norm(out_dim, in_dim, rng) {}

ad::Tensor SpectralLinear::forward(const ad::Tensor& x, SnMode mode) {
    ad::Tensor w_sn;
    switch (mode) {
    case SnMode::kTrain:
        w_sn = norm.apply(weight, 1, /*update=*/true);
        break;
    case SnMode::kEval:
        w_sn = norm.apply(weight, 0, /*update=*/false);
        break;
    case SnMode::kFrozen:
        if (frozen_sigma == 0.0) {
            w_sn = ad::scale(weight, 1.0);
        } else {
            w_sn = ad::scale(weight, 1.0 / frozen_sigma);
        }
        break;
    }
    return ad::affine(w_sn, x, bias);
}

SpectralLinear SpectralLinear::clone() const {
    SpectralLinear copy;
    copy.weight = weight.clone();
    copy.bias = bias.clone();
    copy.norm = norm;
    copy.frozen_sigma = frozen_sigma;
    return copy;
}

void SpectralLinear::collect(const std::string& prefix, std::vector<ad::Tensor>& params,
                             std::vector<std::string>& names) const {
    params.push_back(weight);
    names.push_back(prefix + ".weight");
    params.push_back(bias);
    names.push_back(prefix + ".bias");
}

GruCell::GruCell(std::size_t input_dim, std::size_t hidden_dim, Rng& rng)
    : update_gate(input_dim + hidden_dim, hidden_dim, rng),
      reset_gate(input_dim + hidden_dim, hidden_dim, rng),
      candidate(input_dim + hidden_dim, hidden_dim, rng) {}

ad::Tensor GruCell::step(const ad::Tensor& x, const ad::Tensor& h) const {
    if (x.size() != input_dim() || h.size() != hidden_dim()) {
        throw ContractError("GruCell::step: input " + ad::shape_string(x.shape()) +
                            " / hidden " + ad::shape_string(h.shape()) +
                            " incompatible with cell dims");
    }
    const ad::Tensor xh = ad::concat(std::array{x, h});
    const ad::Tensor z = ad::sigmoid(update_gate.forward(xh));
    const ad::Tensor r = ad::sigmoid(reset_gate.forward(xh));
    const ad::Tensor xrh = ad::concat(std::array{x, ad::mul(r, h)});
    const ad::Tensor c = ad::tanh(candidate.forward(xrh));
    const ad::Tensor ones = ad::Tensor::from(z.shape(), std::vector<double>(z.size(), 1.0));
    return ad::add(ad::mul(ad::sub(ones, z), h), ad::mul(z, c));
}

GruCell GruCell::clone() const {
    GruCell copy;
    copy.update_gate = update_gate.clone();
    copy.reset_gate = reset_gate.clone();
    copy.candidate = candidate.clone();
    return copy;
}

void GruCell::collect(const std::string& prefix, std::vector<ad::Tensor>& params,
                      std::vector<std::string>& names) const {
    update_gate.collect(prefix + ".update", params, names);
    reset_gate.collect(prefix + ".reset", params, names);
    candidate.collect(prefix + ".candidate", params, names);
}

Head::Head(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim, Rng& rng)
    : input(in_dim, hidden_dim, rng), penultimate(hidden_dim, hidden_dim, rng),
      output(hidden_dim, out_dim, rng) {}

ad::Tensor Head::forward(const ad::Tensor& x, SnMode mode) {
    ad::Tensor h = ad::relu(input.forward(x));
    h = ad::relu(penultimate.forward(h, mode));
    return output.forward(h);
}

Head Head::clone() const {
    Head copy;
    copy.input = input.clone();
    copy.penultimate = penultimate.clone();
    copy.output = output.clone();
    return copy;
}

void Head::collect(const std::string& prefix, std::vector<ad::Tensor>& params,
                   std::vector<std::string>& names) const {
    input.collect(prefix + ".l1", params, names);
    penultimate.collect(prefix + ".l2", params, names);
    output.collect(prefix + ".l3", params, names);
}

} // namespace cacl::net
