#include "twinforge/channel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "twinforge/errors.hpp"

namespace twinforge::channel {

namespace {

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw DomainError(std::string(name) + " must be finite and > 0, got " +
                          std::to_string(v));
    }
}

// cos/sin of multiples of pi/2 are not exactly 0/±1 in floating point.
double snap_unit(double v) { return std::abs(v) < 1e-12 ? 0.0 : v; }

}  // namespace

double noise_power_from_density(double density_dbm_per_hz, double bandwidth_hz) {
    const double dbm = density_dbm_per_hz + 10.0 * std::log10(bandwidth_hz);
    return std::pow(10.0, (dbm - 30.0) / 10.0);
}

void ChannelParams::validate() const {
    require_positive(bandwidth_hz, "bandwidth_hz");
    require_positive(pathloss_const, "pathloss_const");
    require_positive(ref_distance_m, "ref_distance_m");
    require_positive(pathloss_exponent, "pathloss_exponent");
    require_positive(tx_power_w, "tx_power_w");
    require_positive(noise_power_w, "noise_power_w");
    if (pathloss_exponent < 1.0) {
        throw DomainError("pathloss_exponent must be >= 1");
    }
}

void MovementConfig::validate() const {
    require_positive(speed_mps, "speed_mps");
    require_positive(slot_s, "slot_s");
    require_positive(width_m, "width_m");
    require_positive(height_m, "height_m");
}

double distance(const Position& a, const Position& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double snr(const ChannelParams& params, double dist_m) {
    if (!(dist_m > 0.0)) {
        throw DomainError("snr: distance must be > 0 (path-loss singularity)");
    }
    const double gain =
        params.pathloss_const * std::pow(params.ref_distance_m / dist_m, params.pathloss_exponent);
    return gain * params.tx_power_w / params.noise_power_w;
}

double rate_real(const ChannelParams& params, double dist_m) {
    return params.bandwidth_hz * std::log2(1.0 + snr(params, dist_m));
}

double spectral_efficiency(const ChannelParams& params, double dist_m) {
    return std::log2(1.0 + snr(params, dist_m));
}

double add_twin_noise(double rate, double variance, RandomStream& rng) {
    if (variance < 0.0 || !std::isfinite(variance)) {
        throw DomainError("twin noise variance must be finite and >= 0");
    }
    if (variance == 0.0) {
        return rate;
    }
    std::normal_distribution<double> noise(0.0, std::sqrt(variance));
    return std::max(0.0, rate + noise(rng));
}

double rate_virtual(const ChannelParams& params, double dist_m, double variance,
                    RandomStream& rng) {
    if (variance < 0.0) {
        throw DomainError("rate_virtual: variance must be >= 0");
    }
    return add_twin_noise(rate_real(params, dist_m), variance, rng);
}

Position move(const Position& pos, double heading_rad, const MovementConfig& cfg) {
    const double step = cfg.speed_mps * cfg.slot_s;
    Position out = pos;
    out.x = std::clamp(pos.x + step * snap_unit(std::cos(heading_rad)), 0.0, cfg.width_m);
    out.y = std::clamp(pos.y + step * snap_unit(std::sin(heading_rad)), 0.0, cfg.height_m);
    return out;
}

}  // namespace twinforge::channel
