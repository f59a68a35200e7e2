#pragma once

#include <cstdint>

#include "cacl/clustering.hpp"
#include "cacl/trainer.hpp"

namespace cacl::analysis {

struct AnalyzeOptions {
    int episodes = 7;
    double eps = 0.15;
    int min_pts = 4;
    std::uint64_t seed = 1;
    double env_progress = 1.0;
};

struct AnalyzeResult {
    std::vector<train::MessageRow> points; // provenance-tagged messages
    ClusterReport report;
    AnalyzeOptions options;
};

// Runs evaluation episodes, pools every message sent by any agent, and
// clusters the pooled point set.
AnalyzeResult analyze_run(std::vector<net::AgentNet>& agents,
                          const env::EnvConfig& env_config, const AnalyzeOptions& options);

} // namespace cacl::analysis
