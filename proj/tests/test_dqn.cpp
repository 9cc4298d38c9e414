#include "doctest.h"

#include <array>
#include <cmath>

#include "lattice_oracle.hpp"
#include "twinforge/dqn.hpp"
#include "twinforge/errors.hpp"

using namespace twinforge;
using namespace twinforge::dqn;

namespace {

Transition tagged(double reward) {
    return {Vector::Constant(2, reward), 0, reward, Vector::Zero(2), false};
}

// One affine layer with zero weights: Q(s, a) is the bias of output a.
Network bias_only(std::vector<double> biases, int inputs = 2) {
    neural::Layer l{neural::Matrix::Zero(static_cast<Eigen::Index>(biases.size()), inputs),
                    Eigen::Map<Vector>(biases.data(), static_cast<Eigen::Index>(biases.size()))};
    return Network({l});
}

TrainConfig tiny_training(std::uint64_t seed) {
    TrainConfig t;
    t.episodes = 6;
    t.hidden = {16, 16};
    t.batch = 8;
    t.buffer_capacity = 100;
    t.target_sync_every = 7;
    t.eval_every = 2;
    t.eval_episodes = 1;
    t.moving_average_window = 3;
    t.seed = seed;
    return t;
}

env::EnvConfig tiny_env() {
    env::EnvConfig e;
    e.n_users = 5;
    e.m_uavs = 2;
    e.plan = {2, 1, 0.5};
    e.horizon = 10;
    return e;
}

}  // namespace

TEST_CASE("ReplayBuffer") {
    ReplayBuffer buf(3);
    CHECK(buf.empty());
    buf.push(tagged(1));
    CHECK(buf.size() == 1);
    for (int i = 2; i <= 4; ++i) buf.push(tagged(i));
    CHECK(buf.size() == 3);
    CHECK(buf.capacity() == 3);
    CHECK(buf.at(0).reward == 2);
    CHECK(buf.at(1).reward == 3);
    CHECK(buf.at(2).reward == 4);
    buf.push(tagged(5));
    CHECK(buf.at(0).reward == 3);
    CHECK(buf.at(2).reward == 5);
    CHECK_THROWS(buf.at(3));
    CHECK_THROWS_AS(ReplayBuffer(0), DomainError);

    RandomStream rng(1);
    ReplayBuffer one(4);
    one.push(tagged(9));
    CHECK_THROWS_AS(one.sample(3, rng), StateError);
    const auto single = one.sample(1, rng);
    REQUIRE(single.size() == 1);
    CHECK(single[0]->reward == 9);

    RandomStream a(5), b(5);
    const auto sa = buf.sample(3, a);
    const auto sb = buf.sample(3, b);
    for (std::size_t i = 0; i < 3; ++i) CHECK(sa[i] == sb[i]);

    std::array<int, 3> hits{};
    for (int round = 0; round < 10000; ++round) {
        for (const Transition* t : buf.sample(3, rng)) ++hits[static_cast<std::size_t>(t->reward) - 3];
    }
    for (int h : hits) CHECK(h / 30000.0 == doctest::Approx(1.0 / 3).epsilon(0.03));
}

TEST_CASE("epsilon schedule") {
    TrainConfig cfg;
    cfg.episodes = 100;
    CHECK(epsilon_at(cfg, 0) == 1.0);
    CHECK(epsilon_at(cfg, 25) == doctest::Approx(0.525));
    CHECK(epsilon_at(cfg, 50) == doctest::Approx(0.05));
    CHECK(epsilon_at(cfg, 99) == doctest::Approx(0.05));
    double prev = 2.0;
    for (int e = 0; e < 100; ++e) {
        const double eps = epsilon_at(cfg, e);
        CHECK(eps <= prev);
        CHECK(eps >= cfg.eps_end);
        CHECK(eps <= cfg.eps_start);
        prev = eps;
    }
}

TEST_CASE("TrainConfig validation") {
    CHECK_NOTHROW(TrainConfig{}.validate());
    TrainConfig t;
    t.gamma = 1.0;
    CHECK_THROWS_AS(t.validate(), DomainError);
    t = {};
    t.eps_end = 0.5;
    t.eps_start = 0.4;
    CHECK_THROWS_AS(t.validate(), DomainError);
    t = {};
    t.batch = 20000;
    CHECK_THROWS_AS(t.validate(), DomainError);
    t = {};
    t.momentum = 1.0;
    CHECK_THROWS_AS(t.validate(), DomainError);
}

TEST_CASE("action selection") {
    RandomStream rng(3);
    const Network q = bias_only({0.1, 0.7, 0.7, -2.0});
    CHECK(greedy_action(q, Vector::Zero(2)).index == 1);
    for (int i = 0; i < 50; ++i) CHECK(select_action(q, Vector::Zero(2), 0.0, rng).index == 1);

    std::array<int, 4> counts{};
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(select_action(q, Vector::Zero(2), 1.0, rng).index)];
    for (int c : counts) CHECK(std::abs(c / static_cast<double>(draws) - 0.25) <= 0.01);
}

TEST_CASE("td_target") {
    CHECK(td_target(1.0, 0.9, 2.0, false) == doctest::Approx(2.8));
    CHECK(td_target(1.5, 0.9, 100.0, true) == 1.5);
    CHECK(td_target(1.0, 1.0, 2.0, false) == 3.0);
}

TEST_CASE("td_update") {
    SUBCASE("scalar TD error and the chosen output only") {
        Network q = bias_only({0.0, 2.5, 0.0, 0.0});
        const Network target = bias_only({2.0, 1.0, -1.0, 0.5});
        const Transition t{Vector::Zero(2), 1, 1.0, Vector::Zero(2), false};
        const std::array<const Transition*, 1> batch{&t};
        const TdStats s = td_update(q, target, batch, 0.9, 0.5);
        CHECK(s.mean_abs_error == doctest::Approx(0.3));
        CHECK(q.layers()[0].bias(1) == doctest::Approx(2.5 + 0.5 * 0.3));
        CHECK(q.layers()[0].bias(0) == 0.0);
        CHECK(q.layers()[0].bias(2) == 0.0);
    }
    SUBCASE("terminal transition does not bootstrap") {
        Network q = bias_only({0.0, 0.0});
        const Network target = bias_only({50.0, 80.0});
        const Transition t{Vector::Zero(2), 0, 1.25, Vector::Zero(2), true};
        const std::array<const Transition*, 1> batch{&t};
        CHECK(td_update(q, target, batch, 0.9, 0.0).mean_abs_error == 1.25);
    }
    SUBCASE("lr 0 leaves q unchanged, target is never written") {
        const env::EnvConfig e = tiny_env();
        Network q = neural::init_network(std::vector<int>{e.feature_count(), 8, e.action_count()}, 3);
        Network target = q;
        const std::string q_before = neural::snapshot_bytes(q);
        const std::string t_before = neural::snapshot_bytes(target);
        Transition t{Vector::Constant(e.feature_count(), 0.3), 5, 2.0, Vector::Constant(e.feature_count(), 0.4), false};
        const std::array<const Transition*, 2> batch{&t, &t};
        td_update(q, target, batch, 0.9, 0.0);
        CHECK(neural::snapshot_bytes(q) == q_before);
        td_update(q, target, batch, 0.9, 0.1);
        CHECK(neural::snapshot_bytes(q) != q_before);
        CHECK(neural::snapshot_bytes(target) == t_before);
    }
    SUBCASE("non-finite reward is refused") {
        Network q = bias_only({0.0, 0.0});
        const Network target = q;
        const std::string before = neural::snapshot_bytes(q);
        const Transition t{Vector::Zero(2), 0, std::nan(""), Vector::Zero(2), false};
        const std::array<const Transition*, 1> batch{&t};
        CHECK_THROWS_AS(td_update(q, target, batch, 0.9, 0.1), NumericError);
        CHECK(neural::snapshot_bytes(q) == before);
    }
    SUBCASE("update lowers the batch loss on a fixed target") {
        Network q = neural::init_network(std::vector<int>{2, 16, 4}, 4);
        const Network target = bias_only({0.0, 0.0, 0.0, 0.0});
        Transition a{Vector::Constant(2, 0.2), 2, 1.0, Vector::Zero(2), true};
        Transition b{Vector::Constant(2, 0.8), 3, -1.0, Vector::Zero(2), true};
        const std::array<const Transition*, 2> batch{&a, &b};
        const double first = td_update(q, target, batch, 0.9, 0.05).mean_sq_error;
        double last = first;
        for (int i = 0; i < 200; ++i) last = td_update(q, target, batch, 0.9, 0.05).mean_sq_error;
        CHECK(last < 0.01 * first);
    }
}

TEST_CASE("sync_target") {
    const Network q = neural::init_network(std::vector<int>{3, 5, 2}, 1);
    Network target = neural::init_network(std::vector<int>{3, 5, 2}, 2);
    sync_target(q, target);
    for (int i = 0; i < 5; ++i) {
        const Vector s = Vector::Constant(3, 0.2 * i);
        CHECK(neural::forward(q, s) == neural::forward(target, s));
    }
    const std::string once = neural::snapshot_bytes(target);
    sync_target(q, target);
    CHECK(neural::snapshot_bytes(target) == once);
    Network other = neural::init_network(std::vector<int>{3, 4, 2}, 2);
    CHECK_THROWS_AS(sync_target(q, other), DomainError);
}

TEST_CASE("train") {
    SUBCASE("q-network shape follows the environment") {
        CHECK(q_network_dims(env::EnvConfig{}, TrainConfig{}) == std::vector<int>{208, 256, 256, 256});
    }
    SUBCASE("zero episodes returns the initial policy") {
        TrainConfig t = tiny_training(3);
        t.episodes = 0;
        const TrainResult r = train(tiny_env(), t);
        CHECK(r.log.rows.empty());
        const auto dims = q_network_dims(tiny_env(), t);
        CHECK(neural::snapshot_bytes(r.policy) ==
              neural::snapshot_bytes(neural::init_network(dims, derive_seed(3, "q-init"))));
    }
    SUBCASE("same seed, identical run") {
        const TrainResult a = train(tiny_env(), tiny_training(9), "x");
        const TrainResult b = train(tiny_env(), tiny_training(9), "x");
        CHECK(neural::snapshot_bytes(a.policy) == neural::snapshot_bytes(b.policy));
        REQUIRE(a.log.rows.size() == 6);
        for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
            CHECK(a.log.rows[i].train_return == b.log.rows[i].train_return);
            CHECK(a.log.rows[i].eval_sum_rate == b.log.rows[i].eval_sum_rate);
            CHECK(a.log.rows[i].moving_average == b.log.rows[i].moving_average);
        }
        CHECK(a.final_eval == b.final_eval);
        const TrainResult c = train(tiny_env(), tiny_training(10), "x");
        CHECK(neural::snapshot_bytes(a.policy) != neural::snapshot_bytes(c.policy));
    }
    SUBCASE("log bookkeeping") {
        const TrainResult r = train(tiny_env(), tiny_training(2), "scheme");
        CHECK(r.log.scheme_id == "scheme");
        CHECK(r.log.seed == 2);
        CHECK(r.log.numeric_failures == 0);
        for (std::size_t i = 0; i < r.log.rows.size(); ++i) {
            CHECK(r.log.rows[i].episode == static_cast<int>(i));
            const std::size_t lo = i >= 2 ? i - 2 : 0;
            double sum = 0.0;
            for (std::size_t j = lo; j <= i; ++j) sum += r.log.rows[j].eval_sum_rate;
            CHECK(r.log.rows[i].moving_average == doctest::Approx(sum / static_cast<double>(i - lo + 1)));
        }
        // evaluations at episodes 0, 2, 4 and the last one; values carried in between
        CHECK(r.log.rows[1].eval_sum_rate == r.log.rows[0].eval_sum_rate);
        CHECK(r.log.rows[3].eval_sum_rate == r.log.rows[2].eval_sum_rate);
    }
    SUBCASE("discount-free variant changes the learning") {
        TrainConfig t = tiny_training(4);
        const TrainResult a = train(tiny_env(), t);
        t.eq7_literal = true;
        const TrainResult b = train(tiny_env(), t);
        CHECK(neural::snapshot_bytes(a.policy) != neural::snapshot_bytes(b.policy));
    }
}

TEST_CASE("single UAV learns a near-optimal route") {
    CHECK(lattice_oracle::reachable_count(lattice_oracle::single_uav_config()) == 25);
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto g = lattice_oracle::grade_seed(seed);
        CHECK(g.achieved <= g.optimal + 1e-9);
        if (g.ratio() >= 0.9) ++good;
    }
    CHECK(good >= 4);
}
