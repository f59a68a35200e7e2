#include <doctest.h>

#include <cmath>

#include "cacl/grounding.hpp"
#include "cacl/ops.hpp"
#include "cacl/optim.hpp"
#include "oracles.hpp"

using namespace cacl;
using grounding::TrajectoryRecord;
using grounding::TrajectoryStep;
using Batch = std::vector<std::vector<std::array<double, 4>>>;

namespace {

net::AgentConfig small_config(net::Method method) {
    net::AgentConfig cfg;
    cfg.obs_dim = 5;
    cfg.n_actions = 4;
    cfg.n_agents = 2;
    cfg.method = method;
    return cfg;
}

Batch random_batch(Rng& rng, std::size_t n_traj, std::size_t max_msgs) {
    Batch batch(n_traj);
    for (auto& traj : batch) {
        std::size_t n = 2 + rng.uniform_int(max_msgs - 1);
        traj.resize(n);
        for (auto& msg : traj) {
            for (double& v : msg) {
                v = rng.uniform(0.01, 0.99);
            }
        }
    }
    return batch;
}

// Trajectory records whose own messages were produced by `agent` itself, so
// recomputation is consistent.
std::vector<TrajectoryRecord> make_records(net::AgentNet& agent, Rng& rng, std::size_t n_traj,
                                           std::size_t n_steps) {
    std::vector<TrajectoryRecord> records(n_traj);
    for (std::size_t t = 0; t < n_traj; ++t) {
        records[t].trajectory_id = t;
        for (std::size_t s = 0; s < n_steps; ++s) {
            TrajectoryStep step;
            step.observation.resize(5);
            for (double& v : step.observation) {
                v = rng.uniform(-1.0, 1.0);
            }
            auto msg = agent.produce_message(ad::Tensor::vector(step.observation));
            std::copy(msg.data().begin(), msg.data().end(), step.own_message.begin());
            step.other_messages.resize(1);
            for (double& v : step.other_messages[0]) {
                v = rng.uniform(0.01, 0.99);
            }
            records[t].steps.push_back(std::move(step));
        }
    }
    return records;
}

} // namespace

TEST_SUITE("grounding") {

TEST_CASE("cacl: one trajectory of two identical messages has zero loss") {
    Batch batch{{{0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}}};
    reset_warnings();
    for (double tau : {0.1, 0.5, 1.0, 3.0}) {
        CHECK(grounding::cacl_loss(batch, tau) == doctest::Approx(0.0).epsilon(1e-15));
    }
    CHECK(warning_count("cacl_few_trajectories") > 0);
}

TEST_CASE("cacl: hand-evaluated two-trajectory example") {
    Batch batch{{{1, 0, 0, 0}, {1, 0, 0, 0}}, {{0, 1, 0, 0}, {0, 1, 0, 0}}};
    // Every anchor: one positive at similarity 1, two negatives at 0, so the
    // per-anchor term is -1 + ln(e + 2); the raw-sum form is four times that.
    const double per_anchor = -1.0 + std::log(std::exp(1.0) + 2.0);
    double loss = grounding::cacl_loss(batch, 1.0);
    CHECK(loss == doctest::Approx(per_anchor).epsilon(1e-12));
    CHECK(loss == doctest::Approx(0.5514).epsilon(1e-4));
    CHECK(4.0 * loss == doctest::Approx(2.2057).epsilon(1e-4));
    CHECK(loss == doctest::Approx(oracles::cacl_brute_force(batch, 1.0)).epsilon(1e-12));
}

TEST_CASE("cacl: empty batch is an error, tau must be positive") {
    CHECK_THROWS_AS(grounding::cacl_loss(Batch{}, 0.1), ContractError);
    Batch batch{{{0.5, 0.5, 0.5, 0.5}, {0.4, 0.4, 0.4, 0.4}}};
    CHECK_THROWS_AS(grounding::cacl_loss(batch, 0.0), ContractError);
    CHECK_THROWS_AS(grounding::cacl_loss(batch, -1.0), ContractError);
}

TEST_CASE("cacl: invariant to message order within trajectories and to relabeling") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        Batch batch = random_batch(rng, 3, 6);
        double base = grounding::cacl_loss(batch, 0.1);

        Batch shuffled = batch;
        for (auto& traj : shuffled) {
            for (std::size_t i = traj.size(); i > 1; --i) {
                std::swap(traj[i - 1], traj[rng.uniform_int(i)]);
            }
        }
        CHECK(grounding::cacl_loss(shuffled, 0.1) == doctest::Approx(base).epsilon(1e-12));

        Batch relabeled(batch.rbegin(), batch.rend());
        CHECK(grounding::cacl_loss(relabeled, 0.1) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("cacl: stabilized evaluation equals the naive form on random batches") {
    Rng rng(22);
    for (int trial = 0; trial < 50; ++trial) {
        Batch batch = random_batch(rng, 2 + rng.uniform_int(4), 8);
        double tau = rng.uniform(0.05, 2.0);
        double ours = grounding::cacl_loss(batch, tau);
        double naive = oracles::cacl_brute_force(batch, tau);
        CHECK(std::abs(ours - naive) <= 1e-9);
    }
}

TEST_CASE("cacl: all-identical messages across the whole batch match brute force") {
    Batch batch(3);
    for (auto& traj : batch) {
        traj.assign(4, {0.3, 0.7, 0.1, 0.9});
    }
    double ours = grounding::cacl_loss(batch, 0.1);
    double naive = oracles::cacl_brute_force(batch, 0.1);
    CHECK(std::abs(ours - naive) <= 1e-9);
}

TEST_CASE("cacl_gradient_scope: finite differences over encoder and message head") {
    Rng rng(23);
    net::AgentNet agent(small_config(net::Method::kCacl), 51);
    auto records = make_records(agent, rng, 3, 4);
    std::vector<const TrajectoryRecord*> batch{&records[0], &records[1], &records[2]};
    grounding::CaclConfig cfg;
    // The gradient contract treats the spectral-norm scale as a constant, so
    // the finite-difference oracle must too.
    agent.set_mode(net::SnMode::kFrozen);
    auto params = agent.parameters();
    auto names = agent.parameter_names();
    std::vector<ad::Tensor> scoped;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (names[i].rfind("message.", 0) == 0 || names[i].rfind("obs_encoder.", 0) == 0) {
            scoped.push_back(params[i]);
        }
    }
    auto f = [&] {
        Rng sub(7); // fixed subsample stream per evaluation
        return grounding::cacl_gradient_scope(agent, batch, cfg, sub);
    };
    CHECK(oracles::finite_diff_max_rel_error(scoped, f) < 1e-4);
}

TEST_CASE("cacl_gradient_scope: value equals the raw-message loss when params are frozen") {
    Rng rng(24);
    net::AgentNet agent(small_config(net::Method::kCacl), 52);
    agent.set_mode(net::SnMode::kEval);
    auto records = make_records(agent, rng, 2, 3);
    std::vector<const TrajectoryRecord*> batch{&records[0], &records[1]};
    grounding::CaclConfig cfg;
    Rng sub(1);
    double recomputed = grounding::cacl_gradient_scope(agent, batch, cfg, sub).value();

    Batch raw(2);
    for (std::size_t t = 0; t < 2; ++t) {
        for (const auto& step : records[t].steps) {
            raw[t].push_back(step.own_message);
            raw[t].push_back(step.other_messages[0]);
        }
    }
    CHECK(recomputed == doctest::Approx(grounding::cacl_loss(raw, cfg.tau)).epsilon(1e-12));
}

TEST_CASE("cacl_gradient_scope: others' messages shift the value, not the gradient support") {
    Rng rng(25);
    net::AgentNet agent(small_config(net::Method::kCacl), 53);
    agent.set_mode(net::SnMode::kEval);
    auto records = make_records(agent, rng, 2, 3);
    grounding::CaclConfig cfg;

    auto grads_and_value = [&](const std::vector<TrajectoryRecord>& recs) {
        std::vector<const TrajectoryRecord*> batch{&recs[0], &recs[1]};
        ad::Tape tape;
        ad::TapeScope scope(tape);
        Rng sub(2);
        auto loss = grounding::cacl_gradient_scope(agent, batch, cfg, sub);
        tape.backward(loss);
        std::vector<bool> support;
        auto params = agent.parameters();
        for (auto& p : params) {
            bool any = false;
            for (double g : p.grad()) {
                any = any || g != 0.0;
            }
            support.push_back(any);
            p.zero_grad();
        }
        return std::pair{loss.value(), support};
    };

    auto [value_a, support_a] = grads_and_value(records);
    auto perturbed = records;
    for (auto& step : perturbed[0].steps) {
        step.other_messages[0][0] = std::min(0.99, step.other_messages[0][0] + 0.3);
    }
    auto [value_b, support_b] = grads_and_value(perturbed);
    CHECK(value_a != value_b);
    CHECK(support_a == support_b);
}

TEST_CASE("cacl_gradient_scope: missing observations are an error") {
    net::AgentNet agent(small_config(net::Method::kCacl), 54);
    TrajectoryRecord record;
    record.steps.resize(2);
    for (auto& step : record.steps) {
        step.other_messages.resize(1, {0.5, 0.5, 0.5, 0.5});
    }
    std::vector<const TrajectoryRecord*> batch{&record, &record};
    grounding::CaclConfig cfg;
    Rng sub(3);
    CHECK_THROWS_AS(grounding::cacl_gradient_scope(agent, batch, cfg, sub), ContractError);
}

TEST_CASE("ae_loss: exact reconstruction gives zero") {
    net::AgentNet agent(small_config(net::Method::kAeComm), 55);
    agent.set_mode(net::SnMode::kEval);
    std::vector<std::vector<double>> obs{{0.2, -0.4, 0.6, 0.1, -0.9}};
    auto encoding = agent.encode_obs(ad::Tensor::vector(obs[0]));
    auto message = agent.message_from_encoding(encoding);
    // Zero decoder weight, bias = target encoding minus nothing: the decoder
    // then outputs the encoding for any message.
    auto params = agent.parameters();
    auto names = agent.parameter_names();
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (names[i] == "decoder.weight") {
            auto data = params[i].mutable_data();
            std::fill(data.begin(), data.end(), 0.0);
        }
        if (names[i] == "decoder.bias") {
            auto data = params[i].mutable_data();
            std::copy(encoding.data().begin(), encoding.data().end(), data.begin());
        }
    }
    CHECK(grounding::ae_loss(agent, obs).value() == doctest::Approx(0.0).epsilon(1e-15));
    (void)message;
}

TEST_CASE("ae_loss: zero decoder reduces to the mean squared encoding") {
    net::AgentNet agent(small_config(net::Method::kAeComm), 56);
    agent.set_mode(net::SnMode::kEval);
    auto params = agent.parameters();
    auto names = agent.parameter_names();
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (names[i].rfind("decoder.", 0) == 0) {
            auto data = params[i].mutable_data();
            std::fill(data.begin(), data.end(), 0.0);
        }
    }
    std::vector<std::vector<double>> obs{{0.2, -0.4, 0.6, 0.1, -0.9},
                                         {1.0, 0.3, -0.3, 0.5, 0.0}};
    double expected = 0.0;
    for (const auto& o : obs) {
        auto enc = agent.encode_obs(ad::Tensor::vector(o));
        double acc = 0.0;
        for (double v : enc.data()) {
            acc += v * v;
        }
        expected += acc / static_cast<double>(enc.size());
    }
    expected /= static_cast<double>(obs.size());
    CHECK(grounding::ae_loss(agent, obs).value() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ae_loss: rejects agents without a decoder and empty batches") {
    net::AgentNet cacl_agent(small_config(net::Method::kCacl), 57);
    std::vector<std::vector<double>> obs{{0.1, 0.2, 0.3, 0.4, 0.5}};
    CHECK_THROWS_AS(grounding::ae_loss(cacl_agent, obs), ContractError);
    net::AgentNet ae(small_config(net::Method::kAeComm), 58);
    CHECK_THROWS_AS(grounding::ae_loss(ae, std::vector<std::vector<double>>{}), ContractError);
}

TEST_CASE("ae_loss: overfits a fixed batch and reaches the message head") {
    Rng rng(26);
    net::AgentNet agent(small_config(net::Method::kAeComm), 59);
    agent.set_mode(net::SnMode::kEval);
    std::vector<std::vector<double>> obs;
    for (int i = 0; i < 4; ++i) {
        std::vector<double> o(5);
        for (double& v : o) {
            v = rng.uniform(-1.0, 1.0);
        }
        obs.push_back(std::move(o));
    }
    auto params = agent.parameters();
    auto names = agent.parameter_names();
    ad::AdamConfig adam_cfg;
    adam_cfg.lr = 3e-3;
    ad::Adam adam(params, adam_cfg);
    double initial = 0.0;
    bool message_head_touched = false;
    for (int step = 0; step < 100; ++step) {
        ad::Tape tape;
        ad::TapeScope scope(tape);
        auto loss = grounding::ae_loss(agent, obs);
        if (step == 0) {
            initial = loss.value();
        }
        tape.backward(loss);
        if (step == 0) {
            for (std::size_t i = 0; i < params.size(); ++i) {
                if (names[i].rfind("message.", 0) == 0) {
                    for (double g : params[i].grad()) {
                        message_head_touched = message_head_touched || g != 0.0;
                    }
                }
            }
        }
        adam.step();
        adam.zero_grad();
    }
    double final_loss = grounding::ae_loss(agent, obs).value();
    CHECK(message_head_touched);
    CHECK(final_loss < initial);
    CHECK(final_loss < 0.9 * initial);
}

TEST_CASE("buffer: FIFO eviction at capacity") {
    grounding::MessageBuffer buffer(2);
    for (std::uint64_t id : {1, 2, 3}) {
        TrajectoryRecord r;
        r.trajectory_id = id;
        buffer.push(std::move(r));
    }
    REQUIRE(buffer.size() == 2);
    CHECK(buffer.records()[0].trajectory_id == 2);
    CHECK(buffer.records()[1].trajectory_id == 3);
}

TEST_CASE("buffer: sampling everything returns each record once") {
    grounding::MessageBuffer buffer(8);
    for (std::uint64_t id = 0; id < 5; ++id) {
        TrajectoryRecord r;
        r.trajectory_id = id;
        buffer.push(std::move(r));
    }
    Rng rng(31);
    auto sample = buffer.sample(5, rng);
    std::set<std::uint64_t> ids;
    for (const auto* r : sample) {
        ids.insert(r->trajectory_id);
    }
    CHECK(ids.size() == 5);
}

TEST_CASE("buffer: sampling errors") {
    grounding::MessageBuffer buffer(4);
    Rng rng(32);
    CHECK_THROWS_AS(buffer.sample(1, rng), ContractError);
    TrajectoryRecord r;
    buffer.push(std::move(r));
    CHECK_THROWS_AS(buffer.sample(2, rng), ContractError);
}

TEST_CASE("buffer: single-draw sampling is uniform (chi-square style bound)") {
    grounding::MessageBuffer buffer(8);
    for (std::uint64_t id = 0; id < 8; ++id) {
        TrajectoryRecord r;
        r.trajectory_id = id;
        buffer.push(std::move(r));
    }
    Rng rng(33);
    const int draws = 10000;
    std::array<int, 8> counts{};
    for (int i = 0; i < draws; ++i) {
        ++counts[buffer.sample(1, rng)[0]->trajectory_id];
    }
    const double mean = draws / 8.0;
    const double sigma = std::sqrt(draws * (1.0 / 8.0) * (7.0 / 8.0));
    for (int c : counts) {
        CHECK(std::abs(c - mean) <= 3.0 * sigma);
    }
}

} // TEST_SUITE
