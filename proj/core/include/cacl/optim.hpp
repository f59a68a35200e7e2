#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cacl/tensor.hpp"

namespace cacl::ad {

struct AdamConfig {
    double lr = 3e-4;
    double eps = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
};

// Adam with bias correction over a fixed parameter list. Gradients are read
// from each parameter's accumulated grad; parameters without a gradient this
// step are treated as zero-gradient.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig config);

    // Throws NumericError on any non-finite gradient; parameters are left
    // untouched in that case.
    void step();
    void zero_grad();

    std::uint64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return config_; }

    void save(std::ostream& out) const;
    void load(std::istream& in);

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
    std::uint64_t step_count_ = 0;
    AdamConfig config_;
};

// Global-norm gradient clipping over a parameter group: if the joint L2 norm
// exceeds max_norm, every gradient is scaled by max_norm / norm. Returns the
// pre-clip norm.
double clip_gradients(std::span<const Tensor> params, double max_norm);

} // namespace cacl::ad
