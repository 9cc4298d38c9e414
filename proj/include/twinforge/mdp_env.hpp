#pragma once

#include <functional>
#include <vector>

#include "twinforge/channel.hpp"
#include "twinforge/fleet.hpp"
#include "twinforge/neural.hpp"
#include "twinforge/random.hpp"

namespace twinforge::env {

using channel::Position;

enum class RewardNoiseMode {
    per_link,   // each simulated UAV link carries its own deviation
    aggregate,  // one deviation on the whole sum (variance (M-K)·δ)
};

struct EnvConfig {
    int n_users = 100;
    int m_uavs = 4;
    int horizon = 100;
    channel::ChannelParams channel;
    channel::MovementConfig movement;
    fleet::DeploymentPlan plan{4, 4, 0.0};
    RewardNoiseMode noise_mode = RewardNoiseMode::per_link;
    // Compatibility: aggregate mode uses variance K·δ instead of (M-K)·δ.
    bool eq8_literal = false;
    double uav_altitude_m = 5.0;

    void validate() const;
    int action_count() const;   // 4^M
    int feature_count() const;  // 2N + 2M
    Position hangar() const { return {0.0, 0.0, uav_altitude_m}; }
};

struct WorldState {
    std::vector<Position> users;
    std::vector<Position> uavs;
    int slot = 0;
};

struct JointAction {
    int index = 0;
    friend bool operator==(const JointAction&, const JointAction&) = default;
};

// Users uniform in bounds at ground level, every UAV at the hangar.
WorldState reset(const EnvConfig& cfg, RandomStream& rng);

// Same user layout, UAVs back at the hangar, slot 0.
WorldState restart(const EnvConfig& cfg, const WorldState& layout);

// User (x, y) pairs then UAV (x, y) pairs, each scaled to [0, 1] by bounds.
neural::Vector encode_state(const WorldState& w, const channel::MovementConfig& bounds);

// Base-4 digits, least significant digit drives UAV 0; digit d → d·90°.
std::vector<double> decode_action(JointAction a, int m_uavs);

// Σ_users max_UAV spectral efficiency (bits/s/Hz). Physical UAVs report the
// exact rate, simulated ones a noisy twin rate.
double sum_rate(const WorldState& w, const fleet::DeploymentPlan& plan,
                const channel::ChannelParams& params, RewardNoiseMode mode, RandomStream& rng,
                bool eq8_literal = false);

// Noise-free sum rate: every UAV treated as physical.
double physical_sum_rate(const WorldState& w, const channel::ChannelParams& params);

struct StepResult {
    WorldState state;
    double reward = 0.0;
    bool done = false;
};

// Throws StateError once the horizon is reached.
StepResult step(const WorldState& w, JointAction a, const EnvConfig& cfg, RandomStream& rng);

using GreedyPolicy = std::function<JointAction(const neural::Vector&)>;

// Mean over episodes of the time-averaged sum rate with the whole fleet
// forced physical (no twin deviation).
double evaluate_physical(const EnvConfig& cfg, const WorldState& layout,
                         const GreedyPolicy& policy, int episodes);
double evaluate_physical(const EnvConfig& cfg, const GreedyPolicy& policy, int episodes,
                         RandomStream& rng);

}  // namespace twinforge::env
