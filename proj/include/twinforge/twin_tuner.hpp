#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "twinforge/dqn.hpp"
#include "twinforge/fleet.hpp"
#include "twinforge/mdp_env.hpp"
#include "twinforge/neural.hpp"

namespace twinforge::tuner {

struct SurfaceCell {
    double mean_rate = 0.0;
    double std_err = 0.0;
    int seeds = 0;  // 0 marks a cell whose trainings failed
    bool valid() const { return seeds > 0 && std::isfinite(mean_rate); }
};

// Empirical map (twin noise δ, physical count K) → evaluated sum rate of
// trained policies. Immutable once built.
class PerformanceSurface {
public:
    // `cells` is δ-major: cells[i_delta * ks.size() + i_k].
    PerformanceSurface(std::vector<double> deltas, std::vector<int> ks,
                       std::vector<SurfaceCell> cells);

    const std::vector<double>& deltas() const { return deltas_; }
    const std::vector<int>& ks() const { return ks_; }
    const SurfaceCell& cell(std::size_t i_delta, std::size_t i_k) const;

    bool contains(double delta, double k) const;
    // Projection onto the grid's bounding box.
    std::pair<double, double> clamp(double delta, double k) const;

    // Bilinear interpolation of cell means. Throws DomainError outside the
    // hull or when a touched cell is invalid.
    double interpolate(double delta, double k) const;

    double min_rate() const;
    double max_rate() const;

private:
    std::vector<double> deltas_;
    std::vector<int> ks_;
    std::vector<SurfaceCell> cells_;
};

// Trains one (environment, trainer) configuration and reports its
// performance; used to fill surface cells.
using RunEvaluator = std::function<double(const env::EnvConfig&, const dqn::TrainConfig&)>;

// Final 200-episode moving average of the physically evaluated sum rate.
double train_and_score(const env::EnvConfig& env_cfg, const dqn::TrainConfig& train_cfg);

// Seeds used for cell s: train_cfg.seed + s, shared by every cell.
PerformanceSurface build_surface(const env::EnvConfig& env_cfg, const dqn::TrainConfig& train_cfg,
                                 const std::vector<double>& deltas, const std::vector<int>& ks,
                                 int seeds_per_cell, const RunEvaluator& evaluate = train_and_score);

struct RateGradient {
    double d_delta = 0.0;
    double d_k = 0.0;
};

// Finite differences on the bilinear interpolant: central inside, one-sided
// at the hull boundary.
RateGradient surface_gradient(const PerformanceSurface& surf, double delta, double k_continuous);

// CSV columns: delta,k,mean_rate,std_err,seeds
void write_surface_csv(const PerformanceSurface& surf, std::ostream& out);
PerformanceSurface read_surface_csv(std::istream& in);

// Reference magnitudes that bring (α, β, ζ, η) to O(1) before the tuner
// network sees them.
struct InputScales {
    double alpha = 100.0;
    double beta = 1.0;
    double zeta = 25.0;
    double eta = 1.0;
};

struct TunerOutput {
    double delta = 0.0;
    double k_continuous = 0.0;
    int k_quantized = 0;
};

struct TunerConfig {
    std::vector<int> hidden{32, 32};
    double lr = 1e-2;
    int steps = 500;
    std::uint64_t seed = 7;
    InputScales scales;
};

neural::Vector tuner_input(const fleet::TwinEconomics& econ, const InputScales& scales);

// δ = ln(1 + e^x), K = M·logistic(y), K rounded half-up.
TunerOutput map_outputs(double raw_delta, double raw_k, int m_uavs);

TunerOutput tuner_forward(const neural::Network& g, const fleet::TwinEconomics& econ, int m_uavs,
                          const InputScales& scales = {});

neural::Network init_tuner(const TunerConfig& cfg);

// ∂/∂(δ, K) of η·R(δ, K) − α·e^{βδ} − ζ·K.
RateGradient objective_gradient(const fleet::TwinEconomics& econ, const PerformanceSurface& surf,
                                double delta, double k_continuous);

struct UpdateReport {
    TunerOutput before;
    RateGradient gradient;  // of the objective w.r.t. (δ, K)
    bool projected = false;
};

// One ascent step of θ_G along ∇θ(δ, K)ᵀ·∇(δ, K)H. Queries outside the
// surface hull are projected onto it, and gradient components that push
// further outward at a hull face are dropped.
UpdateReport tuner_update(neural::Network& g, const fleet::TwinEconomics& econ,
                          const PerformanceSurface& surf, double lr, int m_uavs,
                          const InputScales& scales = {});

// Runs cfg.steps updates from a fresh network.
neural::Network train_tuner(const fleet::TwinEconomics& econ, const PerformanceSurface& surf,
                            int m_uavs, const TunerConfig& cfg);

fleet::DeploymentPlan select_plan(const neural::Network& g, const fleet::TwinEconomics& econ,
                                  int m_uavs, const InputScales& scales = {});

}  // namespace twinforge::tuner
