#include "twinforge/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iostream>

#include "twinforge/errors.hpp"

namespace twinforge::dqn {

ReplayBuffer::ReplayBuffer(std::size_t capacity) {
    if (capacity == 0) throw DomainError("replay buffer capacity must be >= 1");
    storage_.resize(capacity);
}

void ReplayBuffer::push(Transition t) {
    storage_[head_] = std::move(t);
    head_ = (head_ + 1) % storage_.size();
    size_ = std::min(size_ + 1, storage_.size());
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= size_) throw DomainError("replay buffer index out of range");
    const std::size_t oldest = (head_ + storage_.size() - size_) % storage_.size();
    return storage_[(oldest + i) % storage_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, RandomStream& rng) const {
    if (batch == 0 || size_ < batch) {
        throw StateError("cannot sample " + std::to_string(batch) + " transitions from a buffer of " +
                         std::to_string(size_));
    }
    std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(&at(pick(rng)));
    return out;
}

void TrainConfig::validate() const {
    if (episodes < 0) throw DomainError("episodes must be >= 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("gamma must be in [0, 1)");
    if (!(lr_q >= 0.0)) throw DomainError("lr_q must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must be in [0, 1)");
    if (batch < 1) throw DomainError("batch must be >= 1");
    if (buffer_capacity < batch) throw DomainError("batch must not exceed buffer_capacity");
    if (!(0.0 <= eps_end && eps_end <= eps_start && eps_start <= 1.0)) {
        throw DomainError("need 0 <= eps_end <= eps_start <= 1");
    }
    if (!(eps_decay_fraction >= 0.0 && eps_decay_fraction <= 1.0)) {
        throw DomainError("eps_decay_fraction must be in [0, 1]");
    }
    if (target_sync_every < 1) throw DomainError("target_sync_every must be >= 1");
    if (train_every < 1) throw DomainError("train_every must be >= 1");
    if (eval_every < 1) throw DomainError("eval_every must be >= 1");
    if (eval_episodes < 1) throw DomainError("eval_episodes must be >= 1");
    if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) {
        throw DomainError("reward_scale must be finite and > 0");
    }
    if (moving_average_window < 1) throw DomainError("moving_average_window must be >= 1");
    for (int h : hidden) {
        if (h < 1) throw DomainError("hidden layer widths must be >= 1");
    }
}

double epsilon_at(const TrainConfig& cfg, int episode) {
    const double decay_episodes = cfg.eps_decay_fraction * static_cast<double>(cfg.episodes);
    if (decay_episodes <= 0.0) return cfg.eps_end;
    const double frac = std::clamp(static_cast<double>(episode) / decay_episodes, 0.0, 1.0);
    return std::clamp(cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start), cfg.eps_end,
                      cfg.eps_start);
}

JointAction greedy_action(const Network& q, const Vector& state) {
    const Vector values = neural::forward(q, state);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i) {
        if (values(i) > values(best)) best = i;
    }
    return {static_cast<int>(best)};
}

JointAction select_action(const Network& q, const Vector& state, double eps, RandomStream& rng) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("epsilon must be in [0, 1]");
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < eps) {
        std::uniform_int_distribution<int> any(0, q.output_dim() - 1);
        return {any(rng)};
    }
    return greedy_action(q, state);
}

double td_target(double reward, double discount, double max_next_q, bool done) {
    return done ? reward : reward + discount * max_next_q;
}

TdStats td_update(Network& q, const Network& q_target, std::span<const Transition* const> batch,
                  double discount, double lr_q) {
    TdWorkspace ws;
    return td_update(q, q_target, batch, discount, lr_q, 0.0, ws);
}

TdStats td_update(Network& q, const Network& q_target, std::span<const Transition* const> batch,
                  double discount, double lr_q, double momentum, TdWorkspace& ws) {
    if (batch.empty()) throw DomainError("td_update: empty batch");
    const auto n = static_cast<Eigen::Index>(batch.size());
    const Eigen::Index in = q.input_dim();
    ws.states.resize(in, n);
    ws.next_states.resize(in, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& t = *batch[static_cast<std::size_t>(i)];
        if (t.state.size() != in || t.next_state.size() != in) {
            throw DomainError("td_update: transition length does not match the Q-network input");
        }
        if (t.action < 0 || t.action >= q.output_dim()) {
            throw DomainError("td_update: action index outside the Q-network head");
        }
        ws.states.col(i) = t.state;
        ws.next_states.col(i) = t.next_state;
    }
    neural::forward_trace(q, ws.states, ws.trace);
    neural::forward_trace(q_target, ws.next_states, ws.target_trace);
    const neural::Matrix& current = ws.trace.activations.back();
    const neural::Matrix& next_values = ws.target_trace.activations.back();

    ws.output_grad.setZero(q.output_dim(), n);
    TdStats stats;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& t = *batch[static_cast<std::size_t>(i)];
        const double target = td_target(t.reward, discount, next_values.col(i).maxCoeff(), t.done);
        const double error = target - current(t.action, i);
        if (!std::isfinite(error)) {
            throw NumericError("td_update: non-finite TD error, update skipped");
        }
        // d/dQ of 0.5·mean((Q - y)²)
        ws.output_grad(t.action, i) = -error / static_cast<double>(n);
        stats.mean_abs_error += std::abs(error);
        stats.mean_sq_error += error * error;
    }
    stats.mean_abs_error /= static_cast<double>(n);
    stats.mean_sq_error /= static_cast<double>(n);
    if (lr_q == 0.0) return stats;
    neural::backward(q, ws.trace, ws.output_grad, ws.grads, ws.scratch);
    if (momentum > 0.0) {
        neural::momentum_step(q, ws.grads, lr_q, momentum, ws.velocity,
                              neural::StepDirection::descend);
    } else {
        neural::param_step(q, ws.grads, lr_q, neural::StepDirection::descend);
    }
    return stats;
}

void sync_target(const Network& q, Network& q_target) {
    if (!q.same_topology(q_target)) {
        throw DomainError("sync_target: topology mismatch");
    }
    q_target = q;
}

std::vector<int> q_network_dims(const env::EnvConfig& env_cfg, const TrainConfig& cfg) {
    std::vector<int> dims{env_cfg.feature_count()};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(env_cfg.action_count());
    return dims;
}

TrainResult train(const env::EnvConfig& env_cfg, const TrainConfig& cfg,
                  const std::string& scheme_id) {
    env_cfg.validate();
    cfg.validate();

    RandomStream layout_rng = make_stream(cfg.seed, "layout");
    RandomStream explore_rng = make_stream(cfg.seed, "explore");
    RandomStream replay_rng = make_stream(cfg.seed, "replay");
    RandomStream twin_rng = make_stream(cfg.seed, "twin-noise");

    TrainResult result;
    result.layout = env::reset(env_cfg, layout_rng);
    result.log.seed = cfg.seed;
    result.log.scheme_id = scheme_id;

    const auto dims = q_network_dims(env_cfg, cfg);
    Network q = neural::init_network(dims, derive_seed(cfg.seed, "q-init"));
    Network q_target = q;
    ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
    TdWorkspace workspace;

    const double start_rate = env::physical_sum_rate(env::restart(env_cfg, result.layout),
                                                     env_cfg.channel);
    auto learner_reward = [&](double r) {
        if (cfg.reward_scaling == RewardScaling::raw) return cfg.reward_scale * r;
        return cfg.reward_scale * (r - start_rate) / static_cast<double>(env_cfg.n_users);
    };
    const double discount = cfg.eq7_literal ? 1.0 : cfg.gamma;
    const auto greedy = [&q](const Vector& s) { return greedy_action(q, s); };

    long long steps = 0;
    double latest_eval = 0.0;
    std::deque<double> window;
    for (int episode = 0; episode < cfg.episodes; ++episode) {
        const double eps = epsilon_at(cfg, episode);
        env::WorldState w = env::restart(env_cfg, result.layout);
        Vector s = env::encode_state(w, env_cfg.movement);
        double episode_return = 0.0;
        bool done = false;
        while (!done) {
            const JointAction a = select_action(q, s, eps, explore_rng);
            env::StepResult next = env::step(w, a, env_cfg, twin_rng);
            Vector s_next = env::encode_state(next.state, env_cfg.movement);
            episode_return += next.reward;
            done = next.done;
            buffer.push({std::move(s), a.index, learner_reward(next.reward), s_next, done});
            ++steps;
            if (buffer.size() >= static_cast<std::size_t>(cfg.batch) && steps % cfg.train_every == 0) {
                const auto sample = buffer.sample(static_cast<std::size_t>(cfg.batch), replay_rng);
                try {
                    td_update(q, q_target, sample, discount, cfg.lr_q, cfg.momentum, workspace);
                } catch (const NumericError& e) {
                    ++result.log.numeric_failures;
                    std::cerr << "[train seed " << cfg.seed << "] " << e.what() << "\n";
                }
            }
            if (steps % cfg.target_sync_every == 0) sync_target(q, q_target);
            w = std::move(next.state);
            s = std::move(s_next);
        }
        if (episode % cfg.eval_every == 0 || episode + 1 == cfg.episodes) {
            latest_eval = env::evaluate_physical(env_cfg, result.layout, greedy, cfg.eval_episodes);
        }
        window.push_back(latest_eval);
        if (static_cast<int>(window.size()) > cfg.moving_average_window) window.pop_front();
        double window_sum = 0.0;
        for (double v : window) window_sum += v;
        result.log.rows.push_back({episode, episode_return, latest_eval,
                                   window_sum / static_cast<double>(window.size()), eps});
    }
    result.final_eval = cfg.episodes > 0
                            ? latest_eval
                            : env::evaluate_physical(env_cfg, result.layout, greedy, cfg.eval_episodes);
    result.policy = std::move(q);
    return result;
}

}  // namespace twinforge::dqn
