#pragma once

#include <span>

#include "cacl/tensor.hpp"

// Differentiable primitives. Each op computes its value eagerly and, when a
// tape is active and any input is tracked, records a backward closure.
// Vectors are 1-D tensors; scalars have shape [1].
namespace cacl::ad {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);

// W [m,n] times x [n], optionally plus bias [m].
Tensor matvec(const Tensor& w, const Tensor& x);
Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);

Tensor concat(std::span<const Tensor> parts);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Softmax over the last (only) axis of a vector.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);
// Max-subtracted for overflow safety.
Tensor log_sum_exp(const Tensor& x);

// x / ||x||2. The zero vector is returned unchanged and flags the
// "l2_normalize_zero" warning.
Tensor l2_normalize(const Tensor& x);

Tensor mse(const Tensor& a, const Tensor& b);

// Selects one component as a scalar.
Tensor pick(const Tensor& x, std::size_t index);

// Same values, cut off from gradient flow.
Tensor stop_grad(const Tensor& x);

} // namespace cacl::ad
