#pragma once

// Exhaustive finite-horizon dynamic program over the positions a single UAV
// can reach from the hangar. Independent of the learner; used to grade it.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "twinforge/dqn.hpp"
#include "twinforge/mdp_env.hpp"

namespace lattice_oracle {

using twinforge::channel::Position;
using twinforge::env::EnvConfig;
using twinforge::env::WorldState;

// Best undiscounted return from the hangar over cfg.horizon steps, with every
// UAV physical. Requires m_uavs == 1.
inline double optimal_return(const EnvConfig& cfg, const WorldState& layout) {
    using Key = std::pair<long, long>;
    auto key = [](const Position& p) { return Key{std::lround(p.x * 1e6), std::lround(p.y * 1e6)}; };
    auto reward_at = [&](const Position& p) {
        WorldState w = layout;
        w.uavs = {p};
        return twinforge::env::physical_sum_rate(w, cfg.channel);
    };
    auto next = [&](const Position& p, int a) {
        return twinforge::channel::move(p, a * std::numbers::pi / 2.0, cfg.movement);
    };

    // Enumerate the reachable set.
    std::map<Key, Position> nodes{{key(cfg.hangar()), cfg.hangar()}};
    std::vector<Position> frontier{cfg.hangar()};
    while (!frontier.empty()) {
        const Position p = frontier.back();
        frontier.pop_back();
        for (int a = 0; a < 4; ++a) {
            const Position q = next(p, a);
            if (nodes.emplace(key(q), q).second) frontier.push_back(q);
        }
    }

    std::map<Key, double> value;
    for (const auto& [k, p] : nodes) value[k] = 0.0;
    for (int t = 0; t < cfg.horizon; ++t) {
        std::map<Key, double> updated;
        for (const auto& [k, p] : nodes) {
            double best = -1e300;
            for (int a = 0; a < 4; ++a) {
                const Position q = next(p, a);
                best = std::max(best, reward_at(q) + value.at(key(q)));
            }
            updated[k] = best;
        }
        value = std::move(updated);
    }
    return value.at(key(cfg.hangar()));
}

inline std::size_t reachable_count(const EnvConfig& cfg) {
    std::map<std::pair<long, long>, int> seen;
    std::vector<Position> frontier{cfg.hangar()};
    seen[{0, 0}] = 1;
    while (!frontier.empty()) {
        const Position p = frontier.back();
        frontier.pop_back();
        for (int a = 0; a < 4; ++a) {
            const Position q = twinforge::channel::move(p, a * std::numbers::pi / 2.0, cfg.movement);
            if (seen.emplace(std::pair{std::lround(q.x * 1e6), std::lround(q.y * 1e6)}, 1).second) {
                frontier.push_back(q);
            }
        }
    }
    return seen.size();
}

// Single user on a 32 m square: the hangar reaches a 5×5 lattice.
inline EnvConfig single_uav_config() {
    EnvConfig cfg;
    cfg.n_users = 1;
    cfg.m_uavs = 1;
    cfg.plan = {1, 1, 0.0};
    cfg.horizon = 20;
    cfg.movement.width_m = 32.0;
    cfg.movement.height_m = 32.0;
    return cfg;
}

inline twinforge::dqn::TrainConfig single_uav_training(std::uint64_t seed) {
    twinforge::dqn::TrainConfig t;
    t.episodes = 500;
    t.hidden = {128, 128};
    t.batch = 64;
    t.buffer_capacity = 5000;
    t.gamma = 0.9;
    t.lr_q = 1e-3;
    t.momentum = 0.0;
    t.train_every = 1;
    t.seed = seed;
    return t;
}

struct Grade {
    double achieved = 0.0;
    double optimal = 0.0;
    double ratio() const { return achieved / optimal; }
};

inline Grade grade_seed(std::uint64_t seed) {
    const EnvConfig cfg = single_uav_config();
    const auto result = twinforge::dqn::train(cfg, single_uav_training(seed));
    const twinforge::env::GreedyPolicy greedy = [&](const twinforge::neural::Vector& s) {
        return twinforge::dqn::greedy_action(result.policy, s);
    };
    Grade g;
    g.achieved = twinforge::env::evaluate_physical(cfg, result.layout, greedy, 1) * cfg.horizon;
    g.optimal = optimal_return(cfg, result.layout);
    return g;
}

}  // namespace lattice_oracle
