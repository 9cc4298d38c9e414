#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "twinforge/config.hpp"

namespace twinforge::harness {

// One DQN training under a concrete deployment.
struct RunSpec {
    env::EnvConfig env;
    dqn::TrainConfig train;

    // Canonical identity. Deployments that train identically share a key:
    // δ is irrelevant when every UAV is physical, K when δ = 0.
    std::string key() const;
};

RunSpec make_run(const ExperimentConfig& cfg, const fleet::DeploymentPlan& plan, std::uint64_t seed);

struct RunOutcome {
    bool ok = false;
    std::string error;
    double mean_sum_rate = 0.0;  // final moving average of the physical evaluation
    dqn::ConvergenceLog log;
    std::string policy;  // network snapshot bytes
    double wall_seconds = 0.0;
};

RunOutcome execute_run(const RunSpec& spec);

// Memoizes outcomes by RunSpec::key, optionally mirrored to a directory so
// later invocations skip finished trainings. Safe to share across workers.
class RunCache {
public:
    explicit RunCache(std::string directory = "");

    std::shared_ptr<const RunOutcome> find(const RunSpec& spec);
    void store(const RunSpec& spec, RunOutcome outcome);
    std::size_t size() const;

private:
    std::string dir_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<const RunOutcome>> runs_;
};

// Runs every spec (deduplicated, in parallel) and returns outcomes in input
// order. Output does not depend on scheduling.
std::vector<std::shared_ptr<const RunOutcome>> run_all(const std::vector<RunSpec>& specs, RunCache& cache,
                                                       int workers);

int resolve_workers(int requested);

// Surface seeds are the first seeds_per_cell consecutive seeds starting at
// the first experiment seed.
tuner::PerformanceSurface obtain_surface(const ExperimentConfig& cfg, RunCache& cache);

// Deployment chosen by a scheme at one economics point.
fleet::DeploymentPlan plan_for(const ExperimentConfig& cfg, SchemeKind scheme,
                               const fleet::TwinEconomics& econ,
                               const tuner::PerformanceSurface* surface);

struct UtilityRow {
    SchemeKind scheme = SchemeKind::physical_only;
    SweepParam sweep_param = SweepParam::none;
    double sweep_value = 0.0;
    std::uint64_t seed = 0;
    fleet::DeploymentPlan plan;
    double mean_sum_rate = 0.0;
    double construction_cost = 0.0;
    double deployment_cost = 0.0;
    double utility = 0.0;
    bool ok = true;
};

struct ConvergenceTrace {
    std::string scheme_id;
    dqn::ConvergenceLog log;
};

struct UtilityReport {
    std::vector<UtilityRow> rows;
    std::vector<ConvergenceTrace> traces;  // one per distinct training, in row order
    fleet::TwinEconomics base_econ;
    std::optional<tuner::PerformanceSurface> surface;
    std::vector<std::pair<std::string, double>> wall_times;  // scheme_id/seed → seconds

    bool all_ok() const;
};

std::string scheme_id(SchemeKind scheme, const fleet::DeploymentPlan& plan);

UtilityRow make_row(SchemeKind scheme, SweepParam p, double value, std::uint64_t seed,
                    const fleet::DeploymentPlan& plan, const fleet::TwinEconomics& econ,
                    const RunOutcome& outcome);

// One scheme at the base economics for one seed.
UtilityRow run_scheme(const ExperimentConfig& cfg, SchemeKind scheme, std::uint64_t seed, RunCache& cache,
                      const tuner::PerformanceSurface* surface = nullptr,
                      ConvergenceTrace* trace = nullptr);

// Cartesian product sweep values × schemes × seeds. Without a sweep param
// the base economics form a single point.
UtilityReport sweep(const ExperimentConfig& cfg, RunCache& cache);

}  // namespace twinforge::harness
