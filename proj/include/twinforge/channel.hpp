#pragma once

#include "twinforge/random.hpp"

namespace twinforge::channel {

struct Position {
    double x = 0.0;  // meters
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Position&, const Position&) = default;
};

// Noise power in watts for a thermal density (dBm/Hz) integrated over a band.
double noise_power_from_density(double density_dbm_per_hz, double bandwidth_hz);

// Constants of the log-distance link budget. Defaults: 1 MHz band, -40 dB
// at 1 m, exponent 3, 100 mW transmit power, -174 dBm/Hz thermal floor.
struct ChannelParams {
    double bandwidth_hz = 1.0e6;
    double pathloss_const = 1.0e-4;
    double ref_distance_m = 1.0;
    double pathloss_exponent = 3.0;
    double tx_power_w = 0.1;
    double noise_power_w = noise_power_from_density(-174.0, 1.0e6);

    // Throws DomainError when any field is non-positive or the exponent < 1.
    void validate() const;
};

struct MovementConfig {
    double speed_mps = 8.0;
    double slot_s = 1.0;
    double width_m = 100.0;
    double height_m = 100.0;

    void validate() const;
};

double distance(const Position& a, const Position& b);

// Received SNR g0 (L0/d)^θ p / σ². Throws DomainError for d <= 0.
double snr(const ChannelParams& params, double dist_m);

// Shannon rate B log2(1 + snr) in bits/s.
double rate_real(const ChannelParams& params, double dist_m);

// log2(1 + snr) in bits/s/Hz.
double spectral_efficiency(const ChannelParams& params, double dist_m);

// Adds one N(0, variance) draw to `rate` and clamps at zero. variance = 0
// returns `rate` unchanged without consuming the stream.
double add_twin_noise(double rate, double variance, RandomStream& rng);

// Rate a twin-generated UAV reports: rate_real plus Gaussian deviation of
// the given variance, floored at 0.
double rate_virtual(const ChannelParams& params, double dist_m, double variance,
                    RandomStream& rng);

// One slot of constant-speed flight along `heading_rad`, clamped to the
// world rectangle. Axis-aligned headings move exactly along the axis.
Position move(const Position& pos, double heading_rad, const MovementConfig& cfg);

}  // namespace twinforge::channel
