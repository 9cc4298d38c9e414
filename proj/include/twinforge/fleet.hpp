#pragma once

#include <vector>

namespace twinforge::fleet {

// Cost side of the utility: construction cost alpha*exp(beta*delta) for the
// twin, zeta per physical UAV, eta per unit of time-averaged sum rate.
struct TwinEconomics {
    double alpha = 10.0;
    double beta = -1.0;
    double zeta = 10.0;
    double eta = 1.0;

    void validate() const;
};

struct DeploymentPlan {
    int total_uavs = 4;
    int physical = 4;
    double twin_noise = 0.0;  // variance of the per-link rate deviation

    int virtual_count() const { return total_uavs - physical; }
    bool all_physical() const { return physical == total_uavs; }

    void validate() const;
    friend bool operator==(const DeploymentPlan&, const DeploymentPlan&) = default;
};

enum class UavKind { physical, simulated };

// Zero when every UAV is physical: no twin simulation is built.
double construction_cost(const TwinEconomics& econ, const DeploymentPlan& plan);

double deployment_cost(const TwinEconomics& econ, const DeploymentPlan& plan);

double utility(const TwinEconomics& econ, const DeploymentPlan& plan, double mean_sum_rate);

// First `physical` indices are physical, the rest simulated.
std::vector<UavKind> split_fleet(const DeploymentPlan& plan);

}  // namespace twinforge::fleet
