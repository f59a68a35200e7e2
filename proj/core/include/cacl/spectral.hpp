#pragma once

#include <vector>

#include "cacl/rng.hpp"
#include "cacl/tensor.hpp"

namespace cacl::ad {

// Power-iteration estimate of a 2-D weight's largest singular value, with
// persistent left/right singular-vector estimates. apply() divides the weight
// by the current estimate; the division is recorded on the tape with the
// estimate treated as a constant.
class SpectralNorm {
public:
    SpectralNorm() = default;
    SpectralNorm(std::size_t rows, std::size_t cols, Rng& init_rng);

    // Runs `power_iters` refinement steps when `update` is true, then returns
    // weight / sigma. A zero weight is returned unchanged and flags the
    // "spectral_normalize_zero" warning.
    Tensor apply(const Tensor& weight, int power_iters, bool update);

    // Current estimate for the given weight (no refinement).
    double sigma(const Tensor& weight) const;

    std::vector<double>& left() { return u_; }
    std::vector<double>& right() { return v_; }
    const std::vector<double>& left() const { return u_; }
    const std::vector<double>& right() const { return v_; }

private:
    std::vector<double> u_; // rows
    std::vector<double> v_; // cols
};

// One-shot convenience: fresh estimates, `power_iters` refinements, returns
// the normalized weight.
Tensor spectral_normalize(const Tensor& weight, int power_iters, Rng& rng);

} // namespace cacl::ad
