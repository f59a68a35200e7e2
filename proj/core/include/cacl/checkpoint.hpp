#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cacl/agent.hpp"
#include "cacl/grounding.hpp"

namespace cacl::harness {

inline constexpr char kCheckpointMagic[8] = {'C', 'A', 'C', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
    std::uint32_t version = 0;
    std::string config_ini; // resolved run config embedded at save time
    std::uint64_t step = 0;
    std::uint64_t eval_round = 0;
    std::uint64_t checkpoint_round = 0;
    std::uint32_t n_agents = 0;
};

void write_checkpoint_header(std::ostream& out, const std::string& config_ini,
                             std::uint64_t step, std::uint64_t eval_round,
                             std::uint64_t checkpoint_round, std::uint32_t n_agents);
// Validates magic and version; rejects mismatched versions.
CheckpointHeader read_checkpoint_header(std::istream& in);

// Named parameter arrays plus spectral-norm estimates, per agent. Loading
// validates every name and shape against the live team.
void write_team(std::ostream& out, std::vector<net::AgentNet>& agents);
void read_team(std::istream& in, std::vector<net::AgentNet>& agents);

void write_trajectory_record(std::ostream& out, const grounding::TrajectoryRecord& record);
grounding::TrajectoryRecord read_trajectory_record(std::istream& in);

// Header plus team for tools that only need the trained agents (eval,
// analysis). The team is rebuilt from the embedded config by the caller.
CheckpointHeader load_checkpoint_header(const std::filesystem::path& path);
CheckpointHeader load_checkpoint_agents(const std::filesystem::path& path,
                                        std::vector<net::AgentNet>& agents);

} // namespace cacl::harness
