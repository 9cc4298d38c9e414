#include "twinforge/experiment.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "twinforge/errors.hpp"

namespace twinforge::harness {

namespace {

std::string num(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

bool noise_matters_when_all_physical(const env::EnvConfig& e) {
    return e.noise_mode == env::RewardNoiseMode::aggregate && e.eq8_literal;
}

fleet::DeploymentPlan normalized(const env::EnvConfig& e, fleet::DeploymentPlan plan) {
    if (plan.twin_noise == 0.0) plan.physical = plan.total_uavs;
    if (plan.all_physical() && !noise_matters_when_all_physical(e)) plan.twin_noise = 0.0;
    return plan;
}

nlohmann::json log_to_json(const dqn::ConvergenceLog& log) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : log.rows) {
        rows.push_back({r.episode, r.train_return, r.eval_sum_rate, r.moving_average, r.epsilon});
    }
    return {{"seed", log.seed}, {"scheme_id", log.scheme_id}, {"numeric_failures", log.numeric_failures},
            {"rows", rows}};
}

dqn::ConvergenceLog log_from_json(const nlohmann::json& j) {
    dqn::ConvergenceLog log;
    log.seed = j.at("seed").get<std::uint64_t>();
    log.scheme_id = j.at("scheme_id").get<std::string>();
    log.numeric_failures = j.at("numeric_failures").get<int>();
    for (const auto& r : j.at("rows")) {
        log.rows.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>(),
                            r.at(3).get<double>(), r.at(4).get<double>()});
    }
    return log;
}

std::string hex64(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    return out;
}

}  // namespace

std::string RunSpec::key() const {
    std::ostringstream k;
    const auto& e = env;
    const auto& c = e.channel;
    const auto& m = e.movement;
    const fleet::DeploymentPlan p = normalized(e, e.plan);
    k << "v1|env:" << e.n_users << ',' << e.m_uavs << ',' << e.horizon << ',' << num(e.uav_altitude_m)
      << "|plan:" << p.total_uavs << ',' << p.physical << ',' << num(p.twin_noise)
      << "|noise:" << (e.noise_mode == env::RewardNoiseMode::per_link ? "per_link" : "aggregate") << ','
      << e.eq8_literal << "|channel:" << num(c.bandwidth_hz) << ',' << num(c.pathloss_const) << ','
      << num(c.ref_distance_m) << ',' << num(c.pathloss_exponent) << ',' << num(c.tx_power_w) << ','
      << num(c.noise_power_w) << "|move:" << num(m.speed_mps) << ',' << num(m.slot_s) << ','
      << num(m.width_m) << ',' << num(m.height_m);
    const auto& t = train;
    k << "|train:" << t.episodes << ',' << num(t.gamma) << ',' << num(t.lr_q) << ',' << num(t.momentum)
      << ',' << t.batch << ',' << t.buffer_capacity << ',' << num(t.eps_start) << ',' << num(t.eps_end)
      << ',' << num(t.eps_decay_fraction) << ',' << t.target_sync_every << ',' << t.train_every << ','
      << t.eval_every << ',' << t.eval_episodes << ',' << t.moving_average_window << ",h";
    for (int h : t.hidden) k << h << ':';
    k << ',' << (t.reward_scaling == dqn::RewardScaling::raw ? "raw" : "per_user") << ','
      << num(t.reward_scale) << ',' << t.eq7_literal << "|seed:" << t.seed;
    return k.str();
}

RunSpec make_run(const ExperimentConfig& cfg, const fleet::DeploymentPlan& plan, std::uint64_t seed) {
    RunSpec spec{cfg.env, cfg.train};
    spec.env.plan = normalized(cfg.env, plan);
    spec.train.seed = seed;
    return spec;
}

RunOutcome execute_run(const RunSpec& spec) {
    RunOutcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
        const dqn::TrainResult result = dqn::train(spec.env, spec.train);
        out.log = result.log;
        out.policy = neural::snapshot_bytes(result.policy);
        out.mean_sum_rate = result.log.rows.empty() ? result.final_eval : result.log.rows.back().moving_average;
        if (result.log.numeric_failures > 0) {
            out.error = std::to_string(result.log.numeric_failures) + " TD updates hit non-finite values";
        } else if (!std::isfinite(out.mean_sum_rate)) {
            out.error = "non-finite evaluated sum rate";
        } else {
            out.ok = true;
        }
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    if (!out.ok) out.mean_sum_rate = std::numeric_limits<double>::quiet_NaN();
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

RunCache::RunCache(std::string directory) : dir_(std::move(directory)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::shared_ptr<const RunOutcome> RunCache::find(const RunSpec& spec) {
    const std::string key = spec.key();
    {
        std::lock_guard lock(mu_);
        if (auto it = runs_.find(key); it != runs_.end()) return it->second;
    }
    if (dir_.empty()) return nullptr;
    const std::filesystem::path base = std::filesystem::path(dir_) / hex64(fnv1a(key));
    std::ifstream meta(base.string() + ".json");
    if (!meta) return nullptr;
    nlohmann::json j;
    try {
        meta >> j;
        if (j.at("key").get<std::string>() != key) return nullptr;
        auto outcome = std::make_shared<RunOutcome>();
        outcome->ok = j.at("ok").get<bool>();
        outcome->error = j.at("error").get<std::string>();
        outcome->mean_sum_rate = outcome->ok ? j.at("mean_sum_rate").get<double>()
                                             : std::numeric_limits<double>::quiet_NaN();
        outcome->wall_seconds = j.at("wall_seconds").get<double>();
        outcome->log = log_from_json(j.at("log"));
        std::ifstream pol(base.string() + ".twnn", std::ios::binary);
        outcome->policy.assign(std::istreambuf_iterator<char>(pol), std::istreambuf_iterator<char>());
        std::lock_guard lock(mu_);
        return runs_.emplace(key, std::move(outcome)).first->second;
    } catch (const std::exception&) {
        return nullptr;  // unreadable entries are retrained
    }
}

void RunCache::store(const RunSpec& spec, RunOutcome outcome) {
    const std::string key = spec.key();
    if (!dir_.empty()) {
        const std::filesystem::path base = std::filesystem::path(dir_) / hex64(fnv1a(key));
        nlohmann::json j{{"key", key},
                         {"ok", outcome.ok},
                         {"error", outcome.error},
                         {"mean_sum_rate", outcome.ok ? outcome.mean_sum_rate : 0.0},
                         {"wall_seconds", outcome.wall_seconds},
                         {"log", log_to_json(outcome.log)}};
        const std::string tmp = base.string() + ".tmp";
        {
            std::ofstream pol(base.string() + ".twnn", std::ios::binary);
            pol << outcome.policy;
            std::ofstream meta(tmp);
            meta << j.dump();
            if (!meta) throw std::runtime_error("cannot write run cache entry " + tmp);
        }
        std::filesystem::rename(tmp, base.string() + ".json");
    }
    std::lock_guard lock(mu_);
    runs_[key] = std::make_shared<const RunOutcome>(std::move(outcome));
}

std::size_t RunCache::size() const {
    std::lock_guard lock(mu_);
    return runs_.size();
}

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

std::vector<std::shared_ptr<const RunOutcome>> run_all(const std::vector<RunSpec>& specs, RunCache& cache,
                                                       int workers) {
    std::vector<const RunSpec*> pending;
    std::set<std::string> queued;
    for (const auto& s : specs) {
        if (cache.find(s) == nullptr && queued.insert(s.key()).second) pending.push_back(&s);
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < pending.size(); i = next++) {
            cache.store(*pending[i], execute_run(*pending[i]));
        }
    };
    const int n = std::min<int>(resolve_workers(workers), static_cast<int>(pending.size()));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    }
    std::vector<std::shared_ptr<const RunOutcome>> out;
    out.reserve(specs.size());
    for (const auto& s : specs) out.push_back(cache.find(s));
    return out;
}

tuner::PerformanceSurface obtain_surface(const ExperimentConfig& cfg, RunCache& cache) {
    if (!cfg.surface.csv_path.empty()) {
        std::ifstream in(cfg.surface.csv_path);
        if (!in) throw ConfigError("cannot open surface file " + cfg.surface.csv_path);
        return tuner::read_surface_csv(in);
    }
    dqn::TrainConfig base = cfg.train;
    base.seed = cfg.seeds.front();
    std::vector<RunSpec> specs;
    for (double d : cfg.surface.deltas) {
        for (int k : cfg.surface.ks) {
            for (int s = 0; s < cfg.surface.seeds_per_cell; ++s) {
                specs.push_back(make_run(cfg, {cfg.env.m_uavs, k, d}, base.seed + static_cast<std::uint64_t>(s)));
            }
        }
    }
    run_all(specs, cache, cfg.workers);
    const tuner::RunEvaluator lookup = [&](const env::EnvConfig& e, const dqn::TrainConfig& t) {
        const auto outcome = cache.find(make_run(cfg, e.plan, t.seed));
        if (!outcome || !outcome->ok) throw NumericError(outcome ? outcome->error : "missing run");
        return outcome->mean_sum_rate;
    };
    return tuner::build_surface(cfg.env, base, cfg.surface.deltas, cfg.surface.ks, cfg.surface.seeds_per_cell,
                                lookup);
}

fleet::DeploymentPlan plan_for(const ExperimentConfig& cfg, SchemeKind scheme, const fleet::TwinEconomics& econ,
                               const tuner::PerformanceSurface* surface) {
    const int m = cfg.env.m_uavs;
    switch (scheme) {
        case SchemeKind::physical_only: return {m, m, 0.0};
        case SchemeKind::fixed_dt: return cfg.env.plan;
        case SchemeKind::tuned_dt: {
            if (surface == nullptr) throw StateError("tuned_dt needs a performance surface");
            const neural::Network g = tuner::train_tuner(econ, *surface, m, cfg.tuner);
            fleet::DeploymentPlan plan = tuner::select_plan(g, econ, m, cfg.tuner.scales);
            // Shared hidden layers let delta drift past the measured grid; keep it where rates are known.
            plan.twin_noise = surface->clamp(plan.twin_noise, plan.physical).first;
            return plan;
        }
    }
    throw DomainError("unknown scheme");
}

std::string scheme_id(SchemeKind scheme, const fleet::DeploymentPlan& plan) {
    std::string id(scheme_name(scheme));
    if (scheme == SchemeKind::physical_only) return id;
    char buf[64];
    std::snprintf(buf, sizeof buf, "_k%d_d%.4g", plan.physical, plan.twin_noise);
    return id + buf;
}

UtilityRow make_row(SchemeKind scheme, SweepParam p, double value, std::uint64_t seed,
                    const fleet::DeploymentPlan& plan, const fleet::TwinEconomics& econ, const RunOutcome& outcome) {
    UtilityRow row;
    row.scheme = scheme;
    row.sweep_param = p;
    row.sweep_value = value;
    row.seed = seed;
    row.plan = plan;
    row.ok = outcome.ok;
    row.mean_sum_rate = outcome.mean_sum_rate;
    row.construction_cost = fleet::construction_cost(econ, plan);
    row.deployment_cost = fleet::deployment_cost(econ, plan);
    row.utility = outcome.ok ? fleet::utility(econ, plan, outcome.mean_sum_rate)
                             : std::numeric_limits<double>::quiet_NaN();
    return row;
}

UtilityRow run_scheme(const ExperimentConfig& cfg, SchemeKind scheme, std::uint64_t seed, RunCache& cache,
                      const tuner::PerformanceSurface* surface, ConvergenceTrace* trace) {
    const fleet::DeploymentPlan plan = plan_for(cfg, scheme, cfg.econ, surface);
    const RunSpec spec = make_run(cfg, plan, seed);
    const auto outcome = run_all({spec}, cache, 1).front();
    if (trace != nullptr) {
        trace->scheme_id = scheme_id(scheme, plan);
        trace->log = outcome->log;
        trace->log.scheme_id = trace->scheme_id;
    }
    return make_row(scheme, SweepParam::none, 0.0, seed, plan, cfg.econ, *outcome);
}

bool UtilityReport::all_ok() const {
    for (const auto& r : rows) {
        if (!r.ok) return false;
    }
    return true;
}

UtilityReport sweep(const ExperimentConfig& cfg, RunCache& cache) {
    cfg.validate();
    UtilityReport report;
    report.base_econ = cfg.econ;
    const bool tuned = std::find(cfg.schemes.begin(), cfg.schemes.end(), SchemeKind::tuned_dt) != cfg.schemes.end();
    if (tuned) report.surface = obtain_surface(cfg, cache);

    const std::vector<double> points =
        cfg.sweep_param == SweepParam::none ? std::vector<double>{0.0} : cfg.sweep_values;

    struct Cell {
        SchemeKind scheme;
        double value;
        std::uint64_t seed;
        fleet::DeploymentPlan plan;
        fleet::TwinEconomics econ;
    };
    std::vector<Cell> cells;
    std::vector<RunSpec> specs;
    for (double v : points) {
        const fleet::TwinEconomics econ = apply_sweep(cfg.econ, cfg.sweep_param, v);
        econ.validate();
        for (SchemeKind scheme : cfg.schemes) {
            const fleet::DeploymentPlan plan =
                plan_for(cfg, scheme, econ, report.surface ? &*report.surface : nullptr);
            for (std::uint64_t seed : cfg.seeds) {
                cells.push_back({scheme, v, seed, plan, econ});
                specs.push_back(make_run(cfg, plan, seed));
            }
        }
    }
    const auto outcomes = run_all(specs, cache, cfg.workers);

    std::set<std::string> traced;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const Cell& c = cells[i];
        report.rows.push_back(make_row(c.scheme, cfg.sweep_param, c.value, c.seed, c.plan, c.econ, *outcomes[i]));
        const std::string id = scheme_id(c.scheme, c.plan);
        if (traced.insert(id + "|" + std::to_string(c.seed)).second) {
            ConvergenceTrace t{id, outcomes[i]->log};
            t.log.scheme_id = id;
            t.log.seed = c.seed;
            report.traces.push_back(std::move(t));
            report.wall_times.emplace_back(id + "/" + std::to_string(c.seed), outcomes[i]->wall_seconds);
        }
    }
    return report;
}

}  // namespace twinforge::harness
