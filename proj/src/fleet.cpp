#include "twinforge/fleet.hpp"

#include <cmath>
#include <string>

#include "twinforge/errors.hpp"

namespace twinforge::fleet {

void TwinEconomics::validate() const {
    if (!std::isfinite(alpha) || alpha < 0.0) throw DomainError("alpha must be >= 0");
    if (!std::isfinite(beta) || beta > 0.0) throw DomainError("beta must be <= 0");
    if (!std::isfinite(zeta) || zeta < 0.0) throw DomainError("zeta must be >= 0");
    if (!std::isfinite(eta) || eta <= 0.0) throw DomainError("eta must be > 0");
}

void DeploymentPlan::validate() const {
    if (total_uavs < 1) throw DomainError("total UAV count must be >= 1");
    if (physical < 0 || physical > total_uavs) {
        throw DomainError("physical UAV count " + std::to_string(physical) + " outside [0, " +
                          std::to_string(total_uavs) + "]");
    }
    if (!std::isfinite(twin_noise) || twin_noise < 0.0) {
        throw DomainError("twin noise variance must be >= 0");
    }
}

double construction_cost(const TwinEconomics& econ, const DeploymentPlan& plan) {
    if (plan.all_physical()) {
        return 0.0;
    }
    return econ.alpha * std::exp(econ.beta * plan.twin_noise);
}

double deployment_cost(const TwinEconomics& econ, const DeploymentPlan& plan) {
    return econ.zeta * static_cast<double>(plan.physical);
}

double utility(const TwinEconomics& econ, const DeploymentPlan& plan, double mean_sum_rate) {
    return econ.eta * mean_sum_rate - construction_cost(econ, plan) - deployment_cost(econ, plan);
}

std::vector<UavKind> split_fleet(const DeploymentPlan& plan) {
    plan.validate();
    std::vector<UavKind> kinds(static_cast<std::size_t>(plan.total_uavs), UavKind::simulated);
    for (int i = 0; i < plan.physical; ++i) {
        kinds[static_cast<std::size_t>(i)] = UavKind::physical;
    }
    return kinds;
}

}  // namespace twinforge::fleet
