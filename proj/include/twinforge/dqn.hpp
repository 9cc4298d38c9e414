#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "twinforge/mdp_env.hpp"
#include "twinforge/neural.hpp"
#include "twinforge/random.hpp"

namespace twinforge::dqn {

using env::JointAction;
using neural::Network;
using neural::Vector;

struct Transition {
    Vector state;
    int action = 0;
    double reward = 0.0;
    Vector next_state;
    bool done = false;
};

// Fixed-capacity FIFO ring.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return storage_.size(); }
    bool empty() const { return size_ == 0; }

    // i-th surviving transition, oldest first.
    const Transition& at(std::size_t i) const;

    // Uniform with replacement. Throws StateError when size() < batch.
    std::vector<const Transition*> sample(std::size_t batch, RandomStream& rng) const;

private:
    std::vector<Transition> storage_;
    std::size_t head_ = 0;  // next write slot
    std::size_t size_ = 0;
};

// How raw sum-rate rewards are presented to the learner.
enum class RewardScaling {
    raw,
    // (r - r_hangar) / n_users, r_hangar being the noise-free sum rate of the
    // start state. Keeps Q targets O(1) without changing the greedy policy
    // beyond the horizon cut.
    per_user_over_start,
};

struct TrainConfig {
    int episodes = 2000;
    double gamma = 0.9;
    double lr_q = 1e-3;
    double momentum = 0.0;
    int batch = 64;
    int buffer_capacity = 10000;
    double eps_start = 1.0;
    double eps_end = 0.05;
    double eps_decay_fraction = 0.5;
    int target_sync_every = 100;  // environment steps
    int train_every = 1;          // environment steps per TD update
    int eval_every = 20;          // episodes
    int eval_episodes = 5;
    int moving_average_window = 200;
    std::vector<int> hidden{256, 256};
    RewardScaling reward_scaling = RewardScaling::per_user_over_start;
    double reward_scale = 1.0;  // multiplier applied after the scaling mode
    // Compatibility: TD target r + max Q⁻ with no discount.
    bool eq7_literal = false;
    std::uint64_t seed = 1;

    void validate() const;
};

// Linear decay over the first eps_decay_fraction of episodes, then flat.
double epsilon_at(const TrainConfig& cfg, int episode);

// Lowest index among equal maxima.
JointAction greedy_action(const Network& q, const Vector& state);

JointAction select_action(const Network& q, const Vector& state, double eps, RandomStream& rng);

double td_target(double reward, double discount, double max_next_q, bool done);

struct TdStats {
    double mean_abs_error = 0.0;
    double mean_sq_error = 0.0;
};

// Buffers reused across TD updates, plus the momentum velocity.
struct TdWorkspace {
    neural::Matrix states;
    neural::Matrix next_states;
    neural::Matrix output_grad;
    neural::ForwardTrace trace;
    neural::ForwardTrace target_trace;
    neural::GradientSet grads;
    neural::GradientSet velocity;
    std::vector<neural::Matrix> scratch;
};

// One semi-gradient step on 0.5·mean(TD²); the target net is read only.
// Throws NumericError (no parameter change) if any TD value is non-finite.
TdStats td_update(Network& q, const Network& q_target, std::span<const Transition* const> batch,
                  double discount, double lr_q);
TdStats td_update(Network& q, const Network& q_target, std::span<const Transition* const> batch,
                  double discount, double lr_q, double momentum, TdWorkspace& ws);

// Hard copy. Throws DomainError on topology mismatch.
void sync_target(const Network& q, Network& q_target);

struct LogRow {
    int episode = 0;
    double train_return = 0.0;
    double eval_sum_rate = 0.0;  // latest physical evaluation
    double moving_average = 0.0;
    double epsilon = 0.0;
};

struct ConvergenceLog {
    std::uint64_t seed = 0;
    std::string scheme_id;
    std::vector<LogRow> rows;
    int numeric_failures = 0;
};

struct TrainResult {
    Network policy;
    ConvergenceLog log;
    env::WorldState layout;
    // Physical evaluation of the returned policy.
    double final_eval = 0.0;
};

std::vector<int> q_network_dims(const env::EnvConfig& env_cfg, const TrainConfig& cfg);

TrainResult train(const env::EnvConfig& env_cfg, const TrainConfig& cfg,
                  const std::string& scheme_id = "");

}  // namespace twinforge::dqn
