#include "cacl/ops.hpp"

#include <algorithm>
#include <cmath>

namespace cacl::ad {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ContractError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                            " vs " + shape_string(b.shape()));
    }
}

void require_vector(const Tensor& x, const char* op) {
    if (x.shape().size() != 1) {
        throw ContractError(std::string(op) + ": expected a vector, got shape " +
                            shape_string(x.shape()));
    }
}

// Active tape if any input is tracked, else nullptr.
template <typename... Ts>
Tape* recording(const Ts&... inputs) {
    Tape* tape = active_tape();
    if (!tape) {
        return nullptr;
    }
    bool tracked = (inputs.requires_grad() || ...);
    return tracked ? tape : nullptr;
}

void track(Tape* tape, Tensor& out, std::function<void()> backward) {
    out.set_requires_grad(true);
    tape->record(out.node(), std::move(backward));
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a[i] + b[i];
    }
    Tensor y = Tensor::from(a.shape(), std::move(out));
    if (Tape* tape = recording(a, b)) {
        auto an = a.node(), bn = b.node(), yn = y.node();
        track(tape, y, [an, bn, yn] {
            accumulate_grad(*an, yn->grad);
            accumulate_grad(*bn, yn->grad);
        });
    }
    return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    Tensor y = Tensor::from(a.shape(), std::move(out));
    if (Tape* tape = recording(a, b)) {
        auto an = a.node(), bn = b.node(), yn = y.node();
        track(tape, y, [an, bn, yn] {
            accumulate_grad(*an, yn->grad);
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < yn->grad.size(); ++i) {
                    bn->grad[i] -= yn->grad[i];
                }
            }
        });
    }
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a[i] * b[i];
    }
    Tensor y = Tensor::from(a.shape(), std::move(out));
    if (Tape* tape = recording(a, b)) {
        auto an = a.node(), bn = b.node(), yn = y.node();
        track(tape, y, [an, bn, yn] {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < yn->grad.size(); ++i) {
                    an->grad[i] += yn->grad[i] * bn->data[i];
                }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < yn->grad.size(); ++i) {
                    bn->grad[i] += yn->grad[i] * an->data[i];
                }
            }
        });
    }
    return y;
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor scale(const Tensor& x, double factor) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = factor * x[i];
    }
    Tensor y = Tensor::from(x.shape(), std::move(out));
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn, factor] {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::size_t i = 0; i < yn->grad.size(); ++i) {
                    xn->grad[i] += factor * yn->grad[i];
                }
            }
        });
    }
    return y;
}

namespace {

Tensor matvec_impl(const Tensor& w, const Tensor& x, const Tensor* bias, const char* op) {
    if (w.shape().size() != 2) {
        throw ContractError(std::string(op) + ": weight must be 2-D, got " +
                            shape_string(w.shape()));
    }
    require_vector(x, op);
    const std::size_t m = w.shape()[0];
    const std::size_t n = w.shape()[1];
    if (x.size() != n) {
        throw ContractError(std::string(op) + ": weight " + shape_string(w.shape()) +
                            " incompatible with input " + shape_string(x.shape()));
    }
    if (bias && bias->size() != m) {
        throw ContractError(std::string(op) + ": bias " + shape_string(bias->shape()) +
                            " incompatible with weight " + shape_string(w.shape()));
    }
    std::vector<double> out(m, 0.0);
    const auto wd = w.data();
    const auto xd = x.data();
    for (std::size_t i = 0; i < m; ++i) {
        double acc = bias ? (*bias)[i] : 0.0;
        const double* row = wd.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            acc += row[j] * xd[j];
        }
        out[i] = acc;
    }
    Tensor y = Tensor::from({m}, std::move(out));
    Tape* tape = bias ? recording(w, x, *bias) : recording(w, x);
    if (tape) {
        auto wn = w.node(), xn = x.node(), yn = y.node();
        NodePtr bn = bias ? bias->node() : nullptr;
        track(tape, y, [wn, xn, bn, yn, m, n] {
            const auto& gy = yn->grad;
            if (wn->requires_grad) {
                wn->ensure_grad();
                for (std::size_t i = 0; i < m; ++i) {
                    double g = gy[i];
                    double* grow = wn->grad.data() + i * n;
                    for (std::size_t j = 0; j < n; ++j) {
                        grow[j] += g * xn->data[j];
                    }
                }
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::size_t i = 0; i < m; ++i) {
                    double g = gy[i];
                    const double* row = wn->data.data() + i * n;
                    for (std::size_t j = 0; j < n; ++j) {
                        xn->grad[j] += g * row[j];
                    }
                }
            }
            if (bn && bn->requires_grad) {
                accumulate_grad(*bn, gy);
            }
        });
    }
    return y;
}

} // namespace

Tensor matvec(const Tensor& w, const Tensor& x) { return matvec_impl(w, x, nullptr, "matvec"); }

Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b) {
    return matvec_impl(w, x, &b, "affine");
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = 1.0 / (1.0 + std::exp(-x[i]));
    }
    Tensor y = Tensor::from(x.shape(), std::move(out));
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn] {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::size_t i = 0; i < yn->grad.size(); ++i) {
                    double s = yn->data[i];
                    xn->grad[i] += yn->grad[i] * s * (1.0 - s);
                }
            }
        });
    }
    return y;
}

Tensor tanh(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::tanh(x[i]);
    }
    Tensor y = Tensor::from(x.shape(), std::move(out));
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn] {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::size_t i = 0; i < yn->grad.size(); ++i) {
                    double t = yn->data[i];
                    xn->grad[i] += yn->grad[i] * (1.0 - t * t);
                }
            }
        });
    }
    return y;
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[i] > 0.0 ? x[i] : 0.0;
    }
    Tensor y = Tensor::from(x.shape(), std::move(out));
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn] {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::size_t i = 0; i < yn->grad.size(); ++i) {
                    if (xn->data[i] > 0.0) {
                        xn->grad[i] += yn->grad[i];
                    }
                }
            }
        });
    }
    return y;
}

Tensor log(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::log(x[i]);
    }
    Tensor y = Tensor::from(x.shape(), std::move(out));
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn] {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::size_t i = 0; i < yn->grad.size(); ++i) {
                    xn->grad[i] += yn->grad[i] / xn->data[i];
                }
            }
        });
    }
    return y;
}

Tensor exp(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(x[i]);
    }
    Tensor y = Tensor::from(x.shape(), std::move(out));
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn] {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::size_t i = 0; i < yn->grad.size(); ++i) {
                    xn->grad[i] += yn->grad[i] * yn->data[i];
                }
            }
        });
    }
    return y;
}

Tensor concat(std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw ContractError("concat: no inputs");
    }
    std::size_t total = 0;
    bool tracked = false;
    for (const Tensor& p : parts) {
        require_vector(p, "concat");
        total += p.size();
        tracked = tracked || p.requires_grad();
    }
    std::vector<double> out;
    out.reserve(total);
    for (const Tensor& p : parts) {
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    Tensor y = Tensor::from({total}, std::move(out));
    Tape* tape = active_tape();
    if (tape && tracked) {
        std::vector<NodePtr> ins;
        ins.reserve(parts.size());
        for (const Tensor& p : parts) {
            ins.push_back(p.node());
        }
        auto yn = y.node();
        track(tape, y, [ins = std::move(ins), yn] {
            std::size_t offset = 0;
            for (const NodePtr& in : ins) {
                if (in->requires_grad) {
                    in->ensure_grad();
                    for (std::size_t i = 0; i < in->data.size(); ++i) {
                        in->grad[i] += yn->grad[offset + i];
                    }
                }
                offset += in->data.size();
            }
        });
    }
    return y;
}

Tensor dot(const Tensor& a, const Tensor& b) {
    require_vector(a, "dot");
    require_same_shape(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    Tensor y = Tensor::scalar(acc);
    if (Tape* tape = recording(a, b)) {
        auto an = a.node(), bn = b.node(), yn = y.node();
        track(tape, y, [an, bn, yn] {
            double g = yn->grad[0];
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < an->data.size(); ++i) {
                    an->grad[i] += g * bn->data[i];
                }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < bn->data.size(); ++i) {
                    bn->grad[i] += g * an->data[i];
                }
            }
        });
    }
    return y;
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) {
        acc += v;
    }
    Tensor y = Tensor::scalar(acc);
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn] {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::size_t i = 0; i < xn->data.size(); ++i) {
                    xn->grad[i] += yn->grad[0];
                }
            }
        });
    }
    return y;
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) {
        throw ContractError("mean: empty tensor");
    }
    double acc = 0.0;
    for (double v : x.data()) {
        acc += v;
    }
    const double inv_n = 1.0 / static_cast<double>(x.size());
    Tensor y = Tensor::scalar(acc * inv_n);
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn, inv_n] {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::size_t i = 0; i < xn->data.size(); ++i) {
                    xn->grad[i] += yn->grad[0] * inv_n;
                }
            }
        });
    }
    return y;
}

Tensor softmax(const Tensor& x) {
    require_vector(x, "softmax");
    if (x.size() == 0) {
        throw ContractError("softmax: empty input");
    }
    double m = *std::max_element(x.data().begin(), x.data().end());
    std::vector<double> out(x.size());
    double total = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(x[i] - m);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    Tensor y = Tensor::from(x.shape(), std::move(out));
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn] {
            if (!xn->requires_grad) {
                return;
            }
            double inner = 0.0;
            for (std::size_t i = 0; i < yn->data.size(); ++i) {
                inner += yn->grad[i] * yn->data[i];
            }
            xn->ensure_grad();
            for (std::size_t i = 0; i < yn->data.size(); ++i) {
                xn->grad[i] += yn->data[i] * (yn->grad[i] - inner);
            }
        });
    }
    return y;
}

Tensor log_softmax(const Tensor& x) {
    require_vector(x, "log_softmax");
    if (x.size() == 0) {
        throw ContractError("log_softmax: empty input");
    }
    double m = *std::max_element(x.data().begin(), x.data().end());
    double total = 0.0;
    for (double v : x.data()) {
        total += std::exp(v - m);
    }
    double lse = m + std::log(total);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[i] - lse;
    }
    Tensor y = Tensor::from(x.shape(), std::move(out));
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn] {
            if (!xn->requires_grad) {
                return;
            }
            double gsum = 0.0;
            for (double g : yn->grad) {
                gsum += g;
            }
            xn->ensure_grad();
            for (std::size_t i = 0; i < yn->data.size(); ++i) {
                xn->grad[i] += yn->grad[i] - std::exp(yn->data[i]) * gsum;
            }
        });
    }
    return y;
}

Tensor log_sum_exp(const Tensor& x) {
    require_vector(x, "log_sum_exp");
    if (x.size() == 0) {
        throw ContractError("log_sum_exp: empty input");
    }
    double m = *std::max_element(x.data().begin(), x.data().end());
    double total = 0.0;
    for (double v : x.data()) {
        total += std::exp(v - m);
    }
    Tensor y = Tensor::scalar(m + std::log(total));
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn] {
            if (!xn->requires_grad) {
                return;
            }
            double g = yn->grad[0];
            double lse = yn->data[0];
            xn->ensure_grad();
            for (std::size_t i = 0; i < xn->data.size(); ++i) {
                xn->grad[i] += g * std::exp(xn->data[i] - lse);
            }
        });
    }
    return y;
}

Tensor l2_normalize(const Tensor& x) {
    require_vector(x, "l2_normalize");
    double norm_sq = 0.0;
    for (double v : x.data()) {
        norm_sq += v * v;
    }
    if (norm_sq == 0.0) {
        warn("l2_normalize_zero", "l2_normalize of the zero vector, returning input unchanged");
        std::vector<double> out(x.data().begin(), x.data().end());
        Tensor y = Tensor::from(x.shape(), std::move(out));
        if (Tape* tape = recording(x)) {
            auto xn = x.node(), yn = y.node();
            track(tape, y, [xn, yn] { accumulate_grad(*xn, yn->grad); });
        }
        return y;
    }
    const double norm = std::sqrt(norm_sq);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[i] / norm;
    }
    Tensor y = Tensor::from(x.shape(), std::move(out));
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn, norm] {
            if (!xn->requires_grad) {
                return;
            }
            double inner = 0.0;
            for (std::size_t i = 0; i < yn->data.size(); ++i) {
                inner += yn->grad[i] * yn->data[i];
            }
            xn->ensure_grad();
            for (std::size_t i = 0; i < yn->data.size(); ++i) {
                xn->grad[i] += (yn->grad[i] - yn->data[i] * inner) / norm;
            }
        });
    }
    return y;
}

Tensor mse(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mse");
    if (a.size() == 0) {
        throw ContractError("mse: empty input");
    }
    const double inv_n = 1.0 / static_cast<double>(a.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    Tensor y = Tensor::scalar(acc * inv_n);
    if (Tape* tape = recording(a, b)) {
        auto an = a.node(), bn = b.node(), yn = y.node();
        track(tape, y, [an, bn, yn, inv_n] {
            double g = yn->grad[0];
            for (std::size_t i = 0; i < an->data.size(); ++i) {
                double d = 2.0 * inv_n * (an->data[i] - bn->data[i]) * g;
                if (an->requires_grad) {
                    an->ensure_grad();
                    an->grad[i] += d;
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    bn->grad[i] -= d;
                }
            }
        });
    }
    return y;
}

Tensor pick(const Tensor& x, std::size_t index) {
    if (index >= x.size()) {
        throw ContractError("pick: index " + std::to_string(index) + " out of range for " +
                            shape_string(x.shape()));
    }
    Tensor y = Tensor::scalar(x[index]);
    if (Tape* tape = recording(x)) {
        auto xn = x.node(), yn = y.node();
        track(tape, y, [xn, yn, index] {
            if (xn->requires_grad) {
                xn->ensure_grad();
                xn->grad[index] += yn->grad[0];
            }
        });
    }
    return y;
}

Tensor stop_grad(const Tensor& x) { return x.detached(); }

} // namespace cacl::ad
