#pragma once

#include <optional>
#include <span>
#include <vector>

namespace cacl::analysis {

inline constexpr int kNoiseLabel = -1;

using Point = std::vector<double>;

// Density-based clustering with Euclidean distance. A point is core when at
// least min_pts points (itself included) lie within eps. Clusters are grown
// breadth-first in point-index order, so border points ambiguous between two
// clusters go to the first-discovering cluster; the result is deterministic
// for a given input order.
std::vector<int> dbscan(std::span<const Point> points, double eps, int min_pts);

// Mean silhouette over non-noise points: s = (b - a) / max(a, b) with a the
// mean intra-cluster distance (excluding self) and b the smallest mean
// distance to another cluster. Points in singleton clusters contribute 0.
// Undefined (nullopt) with fewer than two clusters.
std::optional<double> silhouette(std::span<const Point> points, std::span<const int> labels);

struct ClusterReport {
    std::vector<int> labels;
    int num_clusters = 0;
    int num_noise = 0;
    std::optional<double> silhouette_coefficient;
};

ClusterReport cluster_report(std::span<const Point> points, double eps, int min_pts);

} // namespace cacl::analysis
