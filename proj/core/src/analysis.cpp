#include "cacl/analysis.hpp"

namespace cacl::analysis {

AnalyzeResult analyze_run(std::vector<net::AgentNet>& agents,
                          const env::EnvConfig& env_config, const AnalyzeOptions& options) {
    if (agents.front().config().method == net::Method::kNoComm) {
        throw ContractError("analyze_run: no-communication agents send no messages");
    }
    train::EvalResult eval = train::evaluate(agents, env_config, options.episodes, options.seed,
                                             options.env_progress);
    AnalyzeResult result;
    result.options = options;
    result.points = std::move(eval.messages);
    std::vector<Point> points;
    points.reserve(result.points.size());
    for (const auto& row : result.points) {
        points.emplace_back(row.message.begin(), row.message.end());
    }
    result.report = cluster_report(points, options.eps, options.min_pts);
    return result;
}

} // namespace cacl::analysis
