#include "cacl/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "cacl/serial.hpp"

namespace cacl::harness {

void write_checkpoint_header(std::ostream& out, const std::string& config_ini,
                             std::uint64_t step, std::uint64_t eval_round,
                             std::uint64_t checkpoint_round, std::uint32_t n_agents) {
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    serial::write_u32(out, kCheckpointVersion);
    serial::write_string(out, config_ini);
    serial::write_u64(out, step);
    serial::write_u64(out, eval_round);
    serial::write_u64(out, checkpoint_round);
    serial::write_u32(out, n_agents);
}

CheckpointHeader read_checkpoint_header(std::istream& in) {
    char magic[sizeof(kCheckpointMagic)] = {};
    in.read(magic, sizeof(magic));
    serial::check(in, "header");
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw IoError("checkpoint: bad magic, not a checkpoint file");
    }
    CheckpointHeader header;
    header.version = serial::read_u32(in, "header");
    if (header.version != kCheckpointVersion) {
        throw IoError("checkpoint: format version " + std::to_string(header.version) +
                      " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    header.config_ini = serial::read_string(in, "config");
    header.step = serial::read_u64(in, "header");
    header.eval_round = serial::read_u64(in, "header");
    header.checkpoint_round = serial::read_u64(in, "header");
    header.n_agents = serial::read_u32(in, "header");
    return header;
}

void write_team(std::ostream& out, std::vector<net::AgentNet>& agents) {
    for (auto& agent : agents) {
        auto params = agent.parameters();
        auto names = agent.parameter_names();
        serial::write_u32(out, static_cast<std::uint32_t>(params.size()));
        for (std::size_t k = 0; k < params.size(); ++k) {
            serial::write_string(out, names[k]);
            const auto& shape = params[k].shape();
            serial::write_u32(out, static_cast<std::uint32_t>(shape.size()));
            for (std::size_t d : shape) {
                serial::write_u64(out, d);
            }
            serial::write_u64(out, params[k].size());
            out.write(reinterpret_cast<const char*>(params[k].data().data()),
                      static_cast<std::streamsize>(params[k].size() * sizeof(double)));
        }
        auto buffers = agent.state_buffers();
        serial::write_u32(out, static_cast<std::uint32_t>(buffers.size()));
        for (auto& [name, vec] : buffers) {
            serial::write_string(out, name);
            serial::write_f64_vec(out, *vec);
        }
    }
}

void read_team(std::istream& in, std::vector<net::AgentNet>& agents) {
    const char* section = "agent_parameters";
    for (auto& agent : agents) {
        auto params = agent.parameters();
        auto names = agent.parameter_names();
        std::uint32_t n_params = serial::read_u32(in, section);
        if (n_params != params.size()) {
            throw IoError("checkpoint: agent has " + std::to_string(n_params) +
                          " parameter arrays, expected " + std::to_string(params.size()));
        }
        for (std::size_t k = 0; k < params.size(); ++k) {
            std::string name = serial::read_string(in, section);
            if (name != names[k]) {
                throw IoError("checkpoint: parameter '" + name + "' where '" + names[k] +
                              "' was expected (incompatible architecture)");
            }
            std::uint32_t ndim = serial::read_u32(in, section);
            std::vector<std::size_t> shape(ndim);
            for (auto& d : shape) {
                d = static_cast<std::size_t>(serial::read_u64(in, section));
            }
            if (shape != params[k].shape()) {
                throw IoError("checkpoint: parameter '" + name + "' has shape " +
                              ad::shape_string(shape) + ", expected " +
                              ad::shape_string(params[k].shape()));
            }
            std::uint64_t count = serial::read_u64(in, section);
            if (count != params[k].size()) {
                throw IoError("checkpoint: parameter '" + name + "' size mismatch");
            }
            in.read(reinterpret_cast<char*>(params[k].mutable_data().data()),
                    static_cast<std::streamsize>(count * sizeof(double)));
            serial::check(in, section);
        }
        auto buffers = agent.state_buffers();
        std::uint32_t n_buffers = serial::read_u32(in, section);
        if (n_buffers != buffers.size()) {
            throw IoError("checkpoint: state-buffer count mismatch");
        }
        for (auto& [name, vec] : buffers) {
            std::string stored = serial::read_string(in, section);
            if (stored != name) {
                throw IoError("checkpoint: state buffer '" + stored + "' where '" + name +
                              "' was expected");
            }
            std::vector<double> data = serial::read_f64_vec(in, section);
            if (data.size() != vec->size()) {
                throw IoError("checkpoint: state buffer '" + name + "' size mismatch");
            }
            *vec = std::move(data);
        }
    }
}

void write_trajectory_record(std::ostream& out, const grounding::TrajectoryRecord& record) {
    serial::write_u64(out, record.trajectory_id);
    serial::write_u64(out, record.steps.size());
    for (const auto& step : record.steps) {
        serial::write_f64_vec(out, step.observation);
        for (double v : step.own_message) {
            serial::write_f64(out, v);
        }
        serial::write_u32(out, static_cast<std::uint32_t>(step.other_messages.size()));
        for (const auto& msg : step.other_messages) {
            for (double v : msg) {
                serial::write_f64(out, v);
            }
        }
    }
}

grounding::TrajectoryRecord read_trajectory_record(std::istream& in) {
    const char* section = "trajectory_record";
    grounding::TrajectoryRecord record;
    record.trajectory_id = serial::read_u64(in, section);
    std::uint64_t n_steps = serial::read_u64(in, section);
    record.steps.resize(n_steps);
    for (auto& step : record.steps) {
        step.observation = serial::read_f64_vec(in, section);
        for (double& v : step.own_message) {
            v = serial::read_f64(in, section);
        }
        std::uint32_t n_others = serial::read_u32(in, section);
        step.other_messages.resize(n_others);
        for (auto& msg : step.other_messages) {
            for (double& v : msg) {
                v = serial::read_f64(in, section);
            }
        }
    }
    return record;
}

CheckpointHeader load_checkpoint_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("checkpoint: cannot open " + path.string());
    }
    return read_checkpoint_header(in);
}

CheckpointHeader load_checkpoint_agents(const std::filesystem::path& path,
                                        std::vector<net::AgentNet>& agents) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("checkpoint: cannot open " + path.string());
    }
    CheckpointHeader header = read_checkpoint_header(in);
    if (header.n_agents != agents.size()) {
        throw IoError("checkpoint: has " + std::to_string(header.n_agents) +
                      " agents, expected " + std::to_string(agents.size()));
    }
    read_team(in, agents);
    return header;
}

} // namespace cacl::harness
