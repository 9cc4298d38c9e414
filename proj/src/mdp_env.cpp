#include "twinforge/mdp_env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "twinforge/errors.hpp"

namespace twinforge::env {

namespace {

int pow4(int m) {
    int n = 1;
    for (int i = 0; i < m; ++i) n *= 4;
    return n;
}

}  // namespace

void EnvConfig::validate() const {
    if (n_users < 1) throw DomainError("n_users must be >= 1");
    // 4^M joint actions must fit the Q-head; 8 UAVs is already 65536 outputs.
    if (m_uavs < 1 || m_uavs > 8) throw DomainError("m_uavs must be in [1, 8]");
    if (horizon < 1) throw DomainError("horizon must be >= 1");
    if (!(uav_altitude_m > 0.0)) throw DomainError("uav_altitude_m must be > 0");
    channel.validate();
    movement.validate();
    plan.validate();
    if (plan.total_uavs != m_uavs) {
        throw DomainError("deployment plan covers " + std::to_string(plan.total_uavs) +
                          " UAVs but the environment has " + std::to_string(m_uavs));
    }
}

int EnvConfig::action_count() const { return pow4(m_uavs); }

int EnvConfig::feature_count() const { return 2 * n_users + 2 * m_uavs; }

WorldState reset(const EnvConfig& cfg, RandomStream& rng) {
    cfg.validate();
    WorldState w;
    std::uniform_real_distribution<double> ux(0.0, cfg.movement.width_m);
    std::uniform_real_distribution<double> uy(0.0, cfg.movement.height_m);
    w.users.reserve(static_cast<std::size_t>(cfg.n_users));
    for (int i = 0; i < cfg.n_users; ++i) {
        const double x = ux(rng);
        const double y = uy(rng);
        w.users.push_back({x, y, 0.0});
    }
    w.uavs.assign(static_cast<std::size_t>(cfg.m_uavs), cfg.hangar());
    return w;
}

WorldState restart(const EnvConfig& cfg, const WorldState& layout) {
    WorldState w;
    w.users = layout.users;
    w.uavs.assign(static_cast<std::size_t>(cfg.m_uavs), cfg.hangar());
    return w;
}

neural::Vector encode_state(const WorldState& w, const channel::MovementConfig& bounds) {
    neural::Vector v(static_cast<Eigen::Index>(2 * (w.users.size() + w.uavs.size())));
    Eigen::Index k = 0;
    for (const auto* group : {&w.users, &w.uavs}) {
        for (const auto& p : *group) {
            v(k++) = p.x / bounds.width_m;
            v(k++) = p.y / bounds.height_m;
        }
    }
    return v;
}

std::vector<double> decode_action(JointAction a, int m_uavs) {
    if (m_uavs < 1) throw DomainError("decode_action: need at least one UAV");
    if (a.index < 0 || a.index >= pow4(m_uavs)) {
        throw DomainError("joint action index " + std::to_string(a.index) + " outside [0, 4^" +
                          std::to_string(m_uavs) + ")");
    }
    std::vector<double> headings(static_cast<std::size_t>(m_uavs));
    int rest = a.index;
    for (auto& h : headings) {
        h = static_cast<double>(rest % 4) * (std::numbers::pi / 2.0);
        rest /= 4;
    }
    return headings;
}

double physical_sum_rate(const WorldState& w, const channel::ChannelParams& params) {
    double total = 0.0;
    for (const auto& u : w.users) {
        double best = 0.0;
        for (const auto& v : w.uavs) {
            best = std::max(best, channel::spectral_efficiency(params, channel::distance(u, v)));
        }
        total += best;
    }
    return total;
}

double sum_rate(const WorldState& w, const fleet::DeploymentPlan& plan,
                const channel::ChannelParams& params, RewardNoiseMode mode, RandomStream& rng,
                bool eq8_literal) {
    if (plan.total_uavs != static_cast<int>(w.uavs.size())) {
        throw DomainError("sum_rate: plan size does not match UAV count");
    }
    if (plan.twin_noise == 0.0) return physical_sum_rate(w, params);
    if (mode == RewardNoiseMode::aggregate) {
        const int noisy = eq8_literal ? plan.physical : plan.virtual_count();
        const double clean = physical_sum_rate(w, params);
        const double variance = static_cast<double>(noisy) * plan.twin_noise;
        if (variance == 0.0) return clean;
        std::normal_distribution<double> noise(0.0, std::sqrt(variance));
        return clean + noise(rng);
    }
    if (plan.all_physical()) return physical_sum_rate(w, params);
    const auto n_physical = static_cast<std::size_t>(plan.physical);
    const double sd = std::sqrt(plan.twin_noise);
    std::normal_distribution<double> unit(0.0, 1.0);
    double total = 0.0;
    for (const auto& u : w.users) {
        double best = 0.0;
        for (std::size_t j = 0; j < w.uavs.size(); ++j) {
            double r = channel::spectral_efficiency(params, channel::distance(u, w.uavs[j]));
            if (j >= n_physical) r = std::max(0.0, r + sd * unit(rng));
            best = std::max(best, r);
        }
        total += best;
    }
    return total;
}

StepResult step(const WorldState& w, JointAction a, const EnvConfig& cfg, RandomStream& rng) {
    if (w.slot >= cfg.horizon) {
        throw StateError("step called on a finished episode (slot " + std::to_string(w.slot) +
                         " of " + std::to_string(cfg.horizon) + ")");
    }
    const auto headings = decode_action(a, cfg.m_uavs);
    StepResult out;
    out.state.users = w.users;
    out.state.uavs.reserve(w.uavs.size());
    for (std::size_t j = 0; j < w.uavs.size(); ++j) {
        out.state.uavs.push_back(channel::move(w.uavs[j], headings[j], cfg.movement));
    }
    out.state.slot = w.slot + 1;
    out.reward = sum_rate(out.state, cfg.plan, cfg.channel, cfg.noise_mode, rng, cfg.eq8_literal);
    out.done = out.state.slot == cfg.horizon;
    return out;
}

double evaluate_physical(const EnvConfig& cfg, const WorldState& layout,
                         const GreedyPolicy& policy, int episodes) {
    if (episodes < 1) throw DomainError("evaluate_physical: episodes must be >= 1");
    EnvConfig physical = cfg;
    physical.plan.physical = physical.plan.total_uavs;
    physical.plan.twin_noise = 0.0;
    RandomStream unused(0);  // the all-physical environment draws nothing
    double sum = 0.0;
    for (int e = 0; e < episodes; ++e) {
        WorldState w = restart(physical, layout);
        double episode_total = 0.0;
        for (int t = 0; t < physical.horizon; ++t) {
            const JointAction a = policy(encode_state(w, physical.movement));
            StepResult next = step(w, a, physical, unused);
            episode_total += next.reward;
            w = std::move(next.state);
        }
        sum += episode_total / static_cast<double>(physical.horizon);
    }
    return sum / static_cast<double>(episodes);
}

double evaluate_physical(const EnvConfig& cfg, const GreedyPolicy& policy, int episodes,
                         RandomStream& rng) {
    const WorldState layout = reset(cfg, rng);
    return evaluate_physical(cfg, layout, policy, episodes);
}

}  // namespace twinforge::env
