#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "twinforge/dqn.hpp"
#include "twinforge/fleet.hpp"
#include "twinforge/mdp_env.hpp"
#include "twinforge/twin_tuner.hpp"

namespace twinforge::harness {

enum class SchemeKind {
    physical_only,  // every UAV deployed, no twin
    fixed_dt,       // the configured (K, δ) split
    tuned_dt,       // (K, δ) chosen by the tuner network
};

std::string_view scheme_name(SchemeKind kind);
SchemeKind parse_scheme(std::string_view name);

enum class SweepParam { none, alpha, beta, cost_weight };

std::string_view sweep_name(SweepParam p);
SweepParam parse_sweep(std::string_view name);

// Economics at one sweep point. cost_weight scales α and ζ together.
fleet::TwinEconomics apply_sweep(const fleet::TwinEconomics& base, SweepParam p, double value);

struct SurfaceSpec {
    std::vector<double> deltas{0.0, 0.4, 0.8, 1.2, 1.6};
    std::vector<int> ks{0, 1, 2, 3, 4};
    int seeds_per_cell = 3;
    std::string csv_path;  // reuse a stored surface instead of training one
};

struct ExperimentConfig {
    env::EnvConfig env;  // env.plan is the fixed_dt deployment
    dqn::TrainConfig train;
    fleet::TwinEconomics econ{100.0, -1.0, 25.0, 1.0};
    double noise_density_dbm_hz = -174.0;
    std::vector<SchemeKind> schemes{SchemeKind::physical_only, SchemeKind::fixed_dt,
                                    SchemeKind::tuned_dt};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    SweepParam sweep_param = SweepParam::none;
    std::vector<double> sweep_values;
    SurfaceSpec surface;
    tuner::TunerConfig tuner;
    int workers = 0;  // 0: one per hardware thread
    std::string cache_dir;

    ExperimentConfig();

    // Throws ConfigError naming the offending key.
    void validate() const;
};

// Strict parse of the sectioned `key = value` format. Unknown sections or
// keys, duplicates and malformed values are rejected with the line number.
// Keys before the first section header are accepted when the name is unique
// across sections.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Every key with its resolved value, in the same format.
std::string render_config(const ExperimentConfig& cfg);

}  // namespace twinforge::harness
