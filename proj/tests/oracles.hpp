#pragma once

// Independent oracles used to check the library: brute-force or textbook
// implementations kept deliberately separate from the code paths they
// verify.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cacl/clustering.hpp"
#include "cacl/rng.hpp"
#include "cacl/tensor.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// Central finite differences against tape gradients.
// ---------------------------------------------------------------------------

// Runs f once under a tape to get analytic gradients of every param, then
// perturbs each parameter component by +-h and compares. Returns the maximum
// relative error, with rel = |a - n| / max(1, |a|, |n|).
inline double finite_diff_max_rel_error(std::span<cacl::ad::Tensor> params,
                                        const std::function<cacl::ad::Tensor()>& f,
                                        double h = 1e-5) {
    cacl::ad::Tape tape;
    std::vector<std::vector<double>> analytic;
    {
        cacl::ad::TapeScope scope(tape);
        cacl::ad::Tensor loss = f();
        tape.backward(loss);
    }
    for (const auto& p : params) {
        auto g = p.grad();
        analytic.emplace_back(g.begin(), g.end());
        if (analytic.back().empty()) {
            analytic.back().assign(p.size(), 0.0);
        }
        p.node()->grad.clear();
    }

    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto data = params[k].mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double saved = data[i];
            data[i] = saved + h;
            double up = f().value();
            data[i] = saved - h;
            double down = f().value();
            data[i] = saved;
            double numeric = (up - down) / (2.0 * h);
            double a = analytic[k][i];
            double rel = std::abs(a - numeric) /
                         std::max({1.0, std::abs(a), std::abs(numeric)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Naive transcription of the contrastive alignment loss (no log-sum-exp
// stabilization), mean over anchors with nonempty positive sets.
// ---------------------------------------------------------------------------

inline double cacl_brute_force(
    const std::vector<std::vector<std::array<double, 4>>>& trajectories, double tau) {
    struct Msg {
        std::array<double, 4> m;
        int traj;
    };
    std::vector<Msg> all;
    for (std::size_t t = 0; t < trajectories.size(); ++t) {
        for (auto msg : trajectories[t]) {
            double norm = std::sqrt(msg[0] * msg[0] + msg[1] * msg[1] + msg[2] * msg[2] +
                                    msg[3] * msg[3]);
            if (norm > 0.0) {
                for (double& v : msg) {
                    v /= norm;
                }
            }
            all.push_back({msg, static_cast<int>(t)});
        }
    }
    const std::size_t n = all.size();
    auto sim = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) {
            s += all[i].m[k] * all[j].m[k];
        }
        return s / tau;
    };
    double total = 0.0;
    std::size_t anchors = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t n_pos = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && all[j].traj == all[i].traj) {
                ++n_pos;
            }
        }
        if (n_pos == 0) {
            continue;
        }
        double denom = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            if (a != i) {
                denom += std::exp(sim(i, a));
            }
        }
        double anchor_term = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            if (p != i && all[p].traj == all[i].traj) {
                anchor_term += sim(i, p) - std::log(denom);
            }
        }
        total += -anchor_term / static_cast<double>(n_pos);
        ++anchors;
    }
    return anchors > 0 ? total / static_cast<double>(anchors) : 0.0;
}

// ---------------------------------------------------------------------------
// Textbook DBSCAN, written independently: region queries on demand and a
// scanning seed list instead of precomputed neighbor sets and a deque.
// ---------------------------------------------------------------------------

inline std::vector<int> dbscan_reference(std::span<const cacl::analysis::Point> points,
                                         double eps, int min_pts) {
    const std::size_t n = points.size();
    auto region_query = [&](std::size_t q) {
        std::vector<std::size_t> found;
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < points[q].size(); ++k) {
                double diff = points[q][k] - points[j][k];
                acc += diff * diff;
            }
            if (std::sqrt(acc) <= eps) {
                found.push_back(j);
            }
        }
        return found;
    };
    constexpr int kUndefined = -3;
    std::vector<int> labels(n, kUndefined);
    int cluster = -1;
    for (std::size_t p = 0; p < n; ++p) {
        if (labels[p] != kUndefined) {
            continue;
        }
        auto neighbors = region_query(p);
        if (neighbors.size() < static_cast<std::size_t>(min_pts)) {
            labels[p] = cacl::analysis::kNoiseLabel;
            continue;
        }
        ++cluster;
        labels[p] = cluster;
        std::vector<std::size_t> seeds = neighbors;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            std::size_t q = seeds[s];
            if (labels[q] == cacl::analysis::kNoiseLabel) {
                labels[q] = cluster;
            }
            if (labels[q] != kUndefined) {
                continue;
            }
            labels[q] = cluster;
            auto q_neighbors = region_query(q);
            if (q_neighbors.size() >= static_cast<std::size_t>(min_pts)) {
                seeds.insert(seeds.end(), q_neighbors.begin(), q_neighbors.end());
            }
        }
    }
    return labels;
}

// True when the two labelings describe the same partition with noise mapped
// to noise (cluster ids may be permuted).
inline bool labels_equivalent(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) {
        return false;
    }
    std::vector<std::pair<int, int>> mapping;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] == cacl::analysis::kNoiseLabel) != (b[i] == cacl::analysis::kNoiseLabel)) {
            return false;
        }
        if (a[i] == cacl::analysis::kNoiseLabel) {
            continue;
        }
        bool seen = false;
        for (const auto& [from, to] : mapping) {
            if (from == a[i]) {
                if (to != b[i]) {
                    return false;
                }
                seen = true;
            } else if (to == b[i]) {
                return false; // two clusters mapping onto one
            }
        }
        if (!seen) {
            mapping.emplace_back(a[i], b[i]);
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Direct-formula silhouette.
// ---------------------------------------------------------------------------

inline std::optional<double> silhouette_reference(std::span<const cacl::analysis::Point> points,
                                                  std::span<const int> labels) {
    auto dist = [&](std::size_t i, std::size_t j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < points[i].size(); ++k) {
            double d = points[i][k] - points[j][k];
            acc += d * d;
        }
        return std::sqrt(acc);
    };
    std::vector<int> clusters;
    for (int l : labels) {
        if (l >= 0 && std::find(clusters.begin(), clusters.end(), l) == clusters.end()) {
            clusters.push_back(l);
        }
    }
    if (clusters.size() < 2) {
        return std::nullopt;
    }
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (labels[i] < 0) {
            continue;
        }
        std::size_t same = 0;
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j != i && labels[j] == labels[i]) {
                ++same;
            }
        }
        if (same == 0) {
            ++counted; // singleton
            continue;
        }
        double a = 0.0;
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j != i && labels[j] == labels[i]) {
                a += dist(i, j);
            }
        }
        a /= static_cast<double>(same);
        double b = std::numeric_limits<double>::infinity();
        for (int c : clusters) {
            if (c == labels[i]) {
                continue;
            }
            double acc = 0.0;
            std::size_t count = 0;
            for (std::size_t j = 0; j < points.size(); ++j) {
                if (labels[j] == c) {
                    acc += dist(i, j);
                    ++count;
                }
            }
            if (count > 0) {
                b = std::min(b, acc / static_cast<double>(count));
            }
        }
        total += (b - a) / std::max(a, b);
        ++counted;
    }
    return total / static_cast<double>(counted);
}

// ---------------------------------------------------------------------------
// Largest singular value by brute-force eigendecomposition of W^T W with
// cyclic Jacobi rotations.
// ---------------------------------------------------------------------------

inline double sigma_max_jacobi(std::span<const double> w, std::size_t rows, std::size_t cols) {
    std::vector<double> a(cols * cols, 0.0);
    for (std::size_t i = 0; i < cols; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < rows; ++r) {
                acc += w[r * cols + i] * w[r * cols + j];
            }
            a[i * cols + j] = acc;
        }
    }
    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < cols; ++i) {
            for (std::size_t j = i + 1; j < cols; ++j) {
                off += a[i * cols + j] * a[i * cols + j];
            }
        }
        if (off < 1e-24) {
            break;
        }
        for (std::size_t p = 0; p < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                double apq = a[p * cols + q];
                if (std::abs(apq) < 1e-300) {
                    continue;
                }
                double app = a[p * cols + p];
                double aqq = a[q * cols + q];
                double theta = 0.5 * std::atan2(2.0 * apq, aqq - app);
                double c = std::cos(theta);
                double s = std::sin(theta);
                for (std::size_t k = 0; k < cols; ++k) {
                    double akp = a[k * cols + p];
                    double akq = a[k * cols + q];
                    a[k * cols + p] = c * akp - s * akq;
                    a[k * cols + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < cols; ++k) {
                    double apk = a[p * cols + k];
                    double aqk = a[q * cols + k];
                    a[p * cols + k] = c * apk - s * aqk;
                    a[q * cols + k] = s * apk + c * aqk;
                }
            }
        }
    }
    double max_eig = 0.0;
    for (std::size_t i = 0; i < cols; ++i) {
        max_eig = std::max(max_eig, a[i * cols + i]);
    }
    return std::sqrt(max_eig);
}

} // namespace oracles
