#include "cacl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "cacl/errors.hpp"

namespace cacl::analysis {

namespace {

constexpr int kUnvisited = -2;

double distance(const Point& a, const Point& b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        double d = a[k] - b[k];
        acc += d * d;
    }
    return std::sqrt(acc);
}

} // namespace

std::vector<int> dbscan(std::span<const Point> points, double eps, int min_pts) {
    if (eps <= 0.0) {
        throw ContractError("dbscan: eps must be positive");
    }
    if (min_pts < 1) {
        throw ContractError("dbscan: min_pts must be at least 1");
    }
    const std::size_t n = points.size();
    if (n == 0) {
        return {};
    }
    const std::size_t dim = points[0].size();
    for (const Point& p : points) {
        if (p.size() != dim) {
            throw ContractError("dbscan: inconsistent point dimensions");
        }
    }

    // Exhaustive neighbor lists, self-inclusive.
    std::vector<std::vector<std::size_t>> neighbors(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (distance(points[i], points[j]) <= eps) {
                neighbors[i].push_back(j);
            }
        }
    }

    std::vector<int> labels(n, kUnvisited);
    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != kUnvisited) {
            continue;
        }
        if (neighbors[i].size() < static_cast<std::size_t>(min_pts)) {
            labels[i] = kNoiseLabel; // may become a border point later
            continue;
        }
        labels[i] = cluster;
        std::deque<std::size_t> seeds(neighbors[i].begin(), neighbors[i].end());
        while (!seeds.empty()) {
            std::size_t q = seeds.front();
            seeds.pop_front();
            if (labels[q] == kNoiseLabel) {
                labels[q] = cluster; // border point claimed by this cluster
            }
            if (labels[q] != kUnvisited) {
                continue;
            }
            labels[q] = cluster;
            if (neighbors[q].size() >= static_cast<std::size_t>(min_pts)) {
                seeds.insert(seeds.end(), neighbors[q].begin(), neighbors[q].end());
            }
        }
        ++cluster;
    }
    return labels;
}

std::optional<double> silhouette(std::span<const Point> points, std::span<const int> labels) {
    if (points.size() != labels.size()) {
        throw ContractError("silhouette: points/labels length mismatch");
    }
    int max_label = -1;
    for (int l : labels) {
        max_label = std::max(max_label, l);
    }
    const int n_clusters = max_label + 1;
    if (n_clusters < 2) {
        return std::nullopt;
    }
    std::vector<std::size_t> cluster_size(static_cast<std::size_t>(n_clusters), 0);
    for (int l : labels) {
        if (l >= 0) {
            ++cluster_size[static_cast<std::size_t>(l)];
        }
    }
    int populated = 0;
    for (std::size_t s : cluster_size) {
        populated += s > 0 ? 1 : 0;
    }
    if (populated < 2) {
        return std::nullopt;
    }

    double total = 0.0;
    std::size_t counted = 0;
    std::vector<double> cluster_dist(static_cast<std::size_t>(n_clusters));
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (labels[i] < 0) {
            continue; // noise excluded
        }
        const auto own = static_cast<std::size_t>(labels[i]);
        if (cluster_size[own] <= 1) {
            ++counted; // singleton contributes 0
            continue;
        }
        std::fill(cluster_dist.begin(), cluster_dist.end(), 0.0);
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (labels[j] < 0 || j == i) {
                continue;
            }
            cluster_dist[static_cast<std::size_t>(labels[j])] += distance(points[i], points[j]);
        }
        double a = cluster_dist[own] / static_cast<double>(cluster_size[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cluster_dist.size(); ++c) {
            if (c == own || cluster_size[c] == 0) {
                continue;
            }
            b = std::min(b, cluster_dist[c] / static_cast<double>(cluster_size[c]));
        }
        double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
        ++counted;
    }
    if (counted == 0) {
        return std::nullopt;
    }
    return total / static_cast<double>(counted);
}

ClusterReport cluster_report(std::span<const Point> points, double eps, int min_pts) {
    ClusterReport report;
    report.labels = dbscan(points, eps, min_pts);
    int max_label = -1;
    for (int l : report.labels) {
        if (l == kNoiseLabel) {
            ++report.num_noise;
        }
        max_label = std::max(max_label, l);
    }
    report.num_clusters = max_label + 1;
    report.silhouette_coefficient = silhouette(points, report.labels);
    return report;
}

} // namespace cacl::analysis
