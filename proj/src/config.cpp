#include "twinforge/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "twinforge/errors.hpp"

namespace twinforge::harness {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

// Thrown by value parsers; the caller adds location.
struct BadValue {
    std::string what;
};

double parse_double(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw BadValue{"expected a finite number, got '" + std::string(s) + "'"};
    }
    return v;
}

long long parse_integer(std::string_view s) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw BadValue{"expected an integer, got '" + std::string(s) + "'"};
    }
    return v;
}

int parse_int(std::string_view s) {
    const long long v = parse_integer(s);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        throw BadValue{"integer out of range: " + std::string(s)};
    }
    return static_cast<int>(v);
}

bool parse_bool(std::string_view s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw BadValue{"expected true or false, got '" + std::string(s) + "'"};
}

std::vector<double> parse_doubles(std::string_view s) {
    std::vector<double> out;
    for (auto item : split_list(s)) out.push_back(parse_double(item));
    return out;
}

std::vector<int> parse_ints(std::string_view s) {
    std::vector<int> out;
    for (auto item : split_list(s)) out.push_back(parse_int(item));
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out += ", ";
        out += fmt(items[i]);
    }
    return out;
}

std::string join_doubles(const std::vector<double>& v) { return join(v, format_double); }
std::string join_ints(const std::vector<int>& v) {
    return join(v, [](int i) { return std::to_string(i); });
}

struct Key {
    std::string section;
    std::string name;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

Key real(std::string section, std::string name, double ExperimentConfig::*outer) {
    return {std::move(section), std::move(name),
            [outer](ExperimentConfig& c, std::string_view v) { c.*outer = parse_double(v); },
            [outer](const ExperimentConfig& c) { return format_double(c.*outer); }};
}

template <typename Member>
Key real_in(std::string section, std::string name, Member ExperimentConfig::*outer,
            double Member::*inner) {
    return {std::move(section), std::move(name),
            [=](ExperimentConfig& c, std::string_view v) { (c.*outer).*inner = parse_double(v); },
            [=](const ExperimentConfig& c) { return format_double((c.*outer).*inner); }};
}

template <typename Member>
Key int_in(std::string section, std::string name, Member ExperimentConfig::*outer,
           int Member::*inner) {
    return {std::move(section), std::move(name),
            [=](ExperimentConfig& c, std::string_view v) { (c.*outer).*inner = parse_int(v); },
            [=](const ExperimentConfig& c) { return std::to_string((c.*outer).*inner); }};
}

template <typename Member>
Key bool_in(std::string section, std::string name, Member ExperimentConfig::*outer,
            bool Member::*inner) {
    return {std::move(section), std::move(name),
            [=](ExperimentConfig& c, std::string_view v) { (c.*outer).*inner = parse_bool(v); },
            [=](const ExperimentConfig& c) {
                return std::string((c.*outer).*inner ? "true" : "false");
            }};
}

const std::vector<Key>& key_table() {
    using C = ExperimentConfig;
    static const std::vector<Key> keys = [] {
        std::vector<Key> k;
        // [env]
        k.push_back(int_in("env", "n_users", &C::env, &env::EnvConfig::n_users));
        k.push_back({"env", "m_uavs",
                     [](C& c, std::string_view v) {
                         c.env.m_uavs = parse_int(v);
                         c.env.plan.total_uavs = c.env.m_uavs;
                     },
                     [](const C& c) { return std::to_string(c.env.m_uavs); }});
        k.push_back(int_in("env", "horizon", &C::env, &env::EnvConfig::horizon));
        k.push_back({"env", "physical_k",
                     [](C& c, std::string_view v) { c.env.plan.physical = parse_int(v); },
                     [](const C& c) { return std::to_string(c.env.plan.physical); }});
        k.push_back({"env", "twin_noise",
                     [](C& c, std::string_view v) { c.env.plan.twin_noise = parse_double(v); },
                     [](const C& c) { return format_double(c.env.plan.twin_noise); }});
        k.push_back({"env", "reward_noise_mode",
                     [](C& c, std::string_view v) {
                         if (v == "per_link") {
                             c.env.noise_mode = env::RewardNoiseMode::per_link;
                         } else if (v == "aggregate") {
                             c.env.noise_mode = env::RewardNoiseMode::aggregate;
                         } else {
                             throw BadValue{"expected per_link or aggregate, got '" + std::string(v) + "'"};
                         }
                     },
                     [](const C& c) {
                         return std::string(c.env.noise_mode == env::RewardNoiseMode::per_link
                                                ? "per_link"
                                                : "aggregate");
                     }});
        k.push_back(bool_in("env", "eq8_literal", &C::env, &env::EnvConfig::eq8_literal));
        k.push_back(real_in("env", "uav_altitude_m", &C::env, &env::EnvConfig::uav_altitude_m));

        // [channel]
        auto channel_real = [](std::string name, double channel::ChannelParams::*field) {
            return Key{"channel", std::move(name),
                       [field](C& c, std::string_view v) { c.env.channel.*field = parse_double(v); },
                       [field](const C& c) { return format_double(c.env.channel.*field); }};
        };
        k.push_back(channel_real("bandwidth_hz", &channel::ChannelParams::bandwidth_hz));
        k.push_back(channel_real("pathloss_const", &channel::ChannelParams::pathloss_const));
        k.push_back(channel_real("ref_distance_m", &channel::ChannelParams::ref_distance_m));
        k.push_back(channel_real("pathloss_exponent", &channel::ChannelParams::pathloss_exponent));
        k.push_back(channel_real("tx_power_w", &channel::ChannelParams::tx_power_w));
        k.push_back(real("channel", "noise_density_dbm_hz", &C::noise_density_dbm_hz));

        // [movement]
        auto movement_real = [](std::string name, double channel::MovementConfig::*field) {
            return Key{"movement", std::move(name),
                       [field](C& c, std::string_view v) { c.env.movement.*field = parse_double(v); },
                       [field](const C& c) { return format_double(c.env.movement.*field); }};
        };
        k.push_back(movement_real("speed_mps", &channel::MovementConfig::speed_mps));
        k.push_back(movement_real("slot_s", &channel::MovementConfig::slot_s));
        k.push_back(movement_real("width_m", &channel::MovementConfig::width_m));
        k.push_back(movement_real("height_m", &channel::MovementConfig::height_m));

        // [train]
        using T = dqn::TrainConfig;
        k.push_back(int_in("train", "episodes", &C::train, &T::episodes));
        k.push_back(real_in("train", "gamma", &C::train, &T::gamma));
        k.push_back(real_in("train", "lr_q", &C::train, &T::lr_q));
        k.push_back(real_in("train", "momentum", &C::train, &T::momentum));
        k.push_back(int_in("train", "batch", &C::train, &T::batch));
        k.push_back(int_in("train", "buffer_capacity", &C::train, &T::buffer_capacity));
        k.push_back(real_in("train", "eps_start", &C::train, &T::eps_start));
        k.push_back(real_in("train", "eps_end", &C::train, &T::eps_end));
        k.push_back(real_in("train", "eps_decay_fraction", &C::train, &T::eps_decay_fraction));
        k.push_back(int_in("train", "target_sync_every", &C::train, &T::target_sync_every));
        k.push_back(int_in("train", "train_every", &C::train, &T::train_every));
        k.push_back(int_in("train", "eval_every", &C::train, &T::eval_every));
        k.push_back(int_in("train", "eval_episodes", &C::train, &T::eval_episodes));
        k.push_back(int_in("train", "moving_average_window", &C::train, &T::moving_average_window));
        k.push_back({"train", "hidden",
                     [](C& c, std::string_view v) { c.train.hidden = parse_ints(v); },
                     [](const C& c) { return join_ints(c.train.hidden); }});
        k.push_back({"train", "reward_scaling",
                     [](C& c, std::string_view v) {
                         if (v == "raw") {
                             c.train.reward_scaling = dqn::RewardScaling::raw;
                         } else if (v == "per_user_over_start") {
                             c.train.reward_scaling = dqn::RewardScaling::per_user_over_start;
                         } else {
                             throw BadValue{"expected raw or per_user_over_start, got '" + std::string(v) + "'"};
                         }
                     },
                     [](const C& c) {
                         return std::string(c.train.reward_scaling == dqn::RewardScaling::raw
                                                ? "raw"
                                                : "per_user_over_start");
                     }});
        k.push_back(real_in("train", "reward_scale", &C::train, &T::reward_scale));
        k.push_back(bool_in("train", "eq7_literal", &C::train, &T::eq7_literal));

        // [economics]
        using E = fleet::TwinEconomics;
        k.push_back(real_in("economics", "alpha", &C::econ, &E::alpha));
        k.push_back(real_in("economics", "beta", &C::econ, &E::beta));
        k.push_back(real_in("economics", "zeta", &C::econ, &E::zeta));
        k.push_back(real_in("economics", "eta", &C::econ, &E::eta));

        // [experiment]
        k.push_back({"experiment", "schemes",
                     [](C& c, std::string_view v) {
                         c.schemes.clear();
                         for (auto item : split_list(v)) {
                             try {
                                 c.schemes.push_back(parse_scheme(item));
                             } catch (const std::exception& e) {
                                 throw BadValue{e.what()};
                             }
                         }
                     },
                     [](const C& c) {
                         return join(c.schemes, [](SchemeKind s) { return std::string(scheme_name(s)); });
                     }});
        k.push_back({"experiment", "seeds",
                     [](C& c, std::string_view v) {
                         c.seeds.clear();
                         for (auto item : split_list(v)) {
                             const long long s = parse_integer(item);
                             if (s < 0) throw BadValue{"seeds must be >= 0"};
                             c.seeds.push_back(static_cast<std::uint64_t>(s));
                         }
                     },
                     [](const C& c) {
                         return join(c.seeds, [](std::uint64_t s) { return std::to_string(s); });
                     }});
        k.push_back({"experiment", "workers",
                     [](C& c, std::string_view v) { c.workers = parse_int(v); },
                     [](const C& c) { return std::to_string(c.workers); }});
        k.push_back({"experiment", "cache_dir",
                     [](C& c, std::string_view v) { c.cache_dir = std::string(v); },
                     [](const C& c) { return c.cache_dir; }});

        // [sweep]
        k.push_back({"sweep", "param",
                     [](C& c, std::string_view v) {
                         try {
                             c.sweep_param = parse_sweep(v);
                         } catch (const std::exception& e) {
                             throw BadValue{e.what()};
                         }
                     },
                     [](const C& c) { return std::string(sweep_name(c.sweep_param)); }});
        k.push_back({"sweep", "values",
                     [](C& c, std::string_view v) { c.sweep_values = parse_doubles(v); },
                     [](const C& c) { return join_doubles(c.sweep_values); }});

        // [surface]
        k.push_back({"surface", "deltas",
                     [](C& c, std::string_view v) { c.surface.deltas = parse_doubles(v); },
                     [](const C& c) { return join_doubles(c.surface.deltas); }});
        k.push_back({"surface", "ks",
                     [](C& c, std::string_view v) { c.surface.ks = parse_ints(v); },
                     [](const C& c) { return join_ints(c.surface.ks); }});
        k.push_back({"surface", "seeds_per_cell",
                     [](C& c, std::string_view v) { c.surface.seeds_per_cell = parse_int(v); },
                     [](const C& c) { return std::to_string(c.surface.seeds_per_cell); }});
        k.push_back({"surface", "csv_path",
                     [](C& c, std::string_view v) { c.surface.csv_path = std::string(v); },
                     [](const C& c) { return c.surface.csv_path; }});

        // [tuner]
        k.push_back({"tuner", "hidden",
                     [](C& c, std::string_view v) { c.tuner.hidden = parse_ints(v); },
                     [](const C& c) { return join_ints(c.tuner.hidden); }});
        k.push_back(real_in("tuner", "lr", &C::tuner, &tuner::TunerConfig::lr));
        k.push_back(int_in("tuner", "steps", &C::tuner, &tuner::TunerConfig::steps));
        k.push_back({"tuner", "seed",
                     [](C& c, std::string_view v) {
                         const long long s = parse_integer(v);
                         if (s < 0) throw BadValue{"seed must be >= 0"};
                         c.tuner.seed = static_cast<std::uint64_t>(s);
                     },
                     [](const C& c) { return std::to_string(c.tuner.seed); }});
        auto scale = [](std::string name, double tuner::InputScales::*field) {
            return Key{"tuner", std::move(name),
                       [field](C& c, std::string_view v) { c.tuner.scales.*field = parse_double(v); },
                       [field](const C& c) { return format_double(c.tuner.scales.*field); }};
        };
        k.push_back(scale("scale_alpha", &tuner::InputScales::alpha));
        k.push_back(scale("scale_beta", &tuner::InputScales::beta));
        k.push_back(scale("scale_zeta", &tuner::InputScales::zeta));
        k.push_back(scale("scale_eta", &tuner::InputScales::eta));
        return k;
    }();
    return keys;
}

const std::vector<std::string>& section_order() {
    static const std::vector<std::string> order{"env",        "channel", "movement", "train",
                                                "economics", "experiment", "sweep",  "surface",
                                                "tuner"};
    return order;
}

struct Located {
    std::string source;
    std::map<std::string, int> lines;  // "section.name" → line

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        const auto it = lines.find(key);
        if (it != lines.end()) {
            throw ConfigError(source + ":" + std::to_string(it->second) + ": " + key + ": " + msg);
        }
        throw ConfigError(source + ": " + key + ": " + msg);
    }
};

// Maps a validation failure back to the key that caused it.
void validate_located(const ExperimentConfig& c, const Located& loc) {
    auto check = [&](bool ok, const std::string& key, const std::string& msg) {
        if (!ok) loc.fail(key, msg);
    };
    auto guarded = [&](const std::string& key, auto&& fn) {
        try {
            fn();
        } catch (const DomainError& e) {
            loc.fail(key, e.what());
        }
    };
    check(c.env.n_users >= 1, "env.n_users", "must be >= 1");
    check(c.env.m_uavs >= 1 && c.env.m_uavs <= 8, "env.m_uavs", "must be in [1, 8]");
    check(c.env.horizon >= 1, "env.horizon", "must be >= 1");
    check(c.env.plan.physical >= 0, "env.physical_k", "must be >= 0");
    check(c.env.plan.physical <= c.env.m_uavs, "env.physical_k",
          "physical_k = " + std::to_string(c.env.plan.physical) + " exceeds m_uavs = " +
              std::to_string(c.env.m_uavs));
    check(c.env.plan.twin_noise >= 0.0, "env.twin_noise", "must be >= 0");
    check(c.env.uav_altitude_m > 0.0, "env.uav_altitude_m", "must be > 0");
    guarded("channel", [&] { c.env.channel.validate(); });
    guarded("movement", [&] { c.env.movement.validate(); });
    guarded("train", [&] { c.train.validate(); });
    check(!c.train.hidden.empty(), "train.hidden", "needs at least one hidden layer");
    for (int h : c.train.hidden) check(h >= 1, "train.hidden", "layer widths must be >= 1");
    check(c.econ.alpha >= 0.0, "economics.alpha", "must be >= 0");
    check(c.econ.beta <= 0.0, "economics.beta", "must be <= 0 (fidelity cost falls as noise grows)");
    check(c.econ.zeta >= 0.0, "economics.zeta", "must be >= 0");
    check(c.econ.eta > 0.0, "economics.eta", "must be > 0");
    check(!c.schemes.empty(), "experiment.schemes", "needs at least one scheme");
    std::set<SchemeKind> unique_schemes(c.schemes.begin(), c.schemes.end());
    check(unique_schemes.size() == c.schemes.size(), "experiment.schemes", "schemes must be distinct");
    check(!c.seeds.empty(), "experiment.seeds", "needs at least one seed");
    std::set<std::uint64_t> unique_seeds(c.seeds.begin(), c.seeds.end());
    check(unique_seeds.size() == c.seeds.size(), "experiment.seeds", "seeds must be distinct");
    check(c.workers >= 0, "experiment.workers", "must be >= 0");
    if (c.sweep_param == SweepParam::none) {
        check(c.sweep_values.empty(), "sweep.values", "values given without a sweep param");
    } else {
        check(!c.sweep_values.empty(), "sweep.values", "a sweep needs at least one value");
        for (double v : c.sweep_values) {
            if (c.sweep_param == SweepParam::beta) check(v <= 0.0, "sweep.values", "beta values must be <= 0");
            if (c.sweep_param != SweepParam::beta) check(v >= 0.0, "sweep.values", "values must be >= 0");
        }
    }
    check(!c.surface.deltas.empty(), "surface.deltas", "needs at least one value");
    check(!c.surface.ks.empty(), "surface.ks", "needs at least one value");
    for (std::size_t i = 0; i < c.surface.deltas.size(); ++i) {
        check(c.surface.deltas[i] >= 0.0, "surface.deltas", "must be >= 0");
        check(i == 0 || c.surface.deltas[i] > c.surface.deltas[i - 1], "surface.deltas",
              "must be strictly ascending");
    }
    for (std::size_t i = 0; i < c.surface.ks.size(); ++i) {
        check(c.surface.ks[i] >= 0 && c.surface.ks[i] <= c.env.m_uavs, "surface.ks",
              "must lie in [0, m_uavs]");
        check(i == 0 || c.surface.ks[i] > c.surface.ks[i - 1], "surface.ks", "must be strictly ascending");
    }
    check(c.surface.seeds_per_cell >= 1, "surface.seeds_per_cell", "must be >= 1");
    check(!c.tuner.hidden.empty(), "tuner.hidden", "needs at least one hidden layer");
    for (int h : c.tuner.hidden) check(h >= 1, "tuner.hidden", "layer widths must be >= 1");
    check(c.tuner.lr >= 0.0, "tuner.lr", "must be >= 0");
    check(c.tuner.steps >= 0, "tuner.steps", "must be >= 0");
    for (const auto& [name, v] : {std::pair{"tuner.scale_alpha", c.tuner.scales.alpha},
                                  std::pair{"tuner.scale_beta", c.tuner.scales.beta},
                                  std::pair{"tuner.scale_zeta", c.tuner.scales.zeta},
                                  std::pair{"tuner.scale_eta", c.tuner.scales.eta}}) {
        check(v > 0.0, name, "must be > 0");
    }
}

}  // namespace

std::string_view scheme_name(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::physical_only: return "physical_only";
        case SchemeKind::fixed_dt: return "fixed_dt";
        case SchemeKind::tuned_dt: return "tuned_dt";
    }
    return "?";
}

SchemeKind parse_scheme(std::string_view name) {
    for (auto k : {SchemeKind::physical_only, SchemeKind::fixed_dt, SchemeKind::tuned_dt}) {
        if (scheme_name(k) == name) return k;
    }
    throw ConfigError("unknown scheme '" + std::string(name) +
                      "' (expected physical_only, fixed_dt or tuned_dt)");
}

std::string_view sweep_name(SweepParam p) {
    switch (p) {
        case SweepParam::none: return "none";
        case SweepParam::alpha: return "alpha";
        case SweepParam::beta: return "beta";
        case SweepParam::cost_weight: return "cost_weight";
    }
    return "?";
}

SweepParam parse_sweep(std::string_view name) {
    for (auto p : {SweepParam::none, SweepParam::alpha, SweepParam::beta, SweepParam::cost_weight}) {
        if (sweep_name(p) == name) return p;
    }
    throw ConfigError("unknown sweep param '" + std::string(name) +
                      "' (expected none, alpha, beta or cost_weight)");
}

fleet::TwinEconomics apply_sweep(const fleet::TwinEconomics& base, SweepParam p, double value) {
    fleet::TwinEconomics e = base;
    switch (p) {
        case SweepParam::none: break;
        case SweepParam::alpha: e.alpha = value; break;
        case SweepParam::beta: e.beta = value; break;
        case SweepParam::cost_weight:
            e.alpha = base.alpha * value;
            e.zeta = base.zeta * value;
            break;
    }
    return e;
}

ExperimentConfig::ExperimentConfig() {
    env.plan = {env.m_uavs, 0, 0.9};
    // Settings that reach a stable route within the episode budget on one core.
    train.hidden = {128, 128};
    train.batch = 32;
    train.train_every = 2;
    train.lr_q = 3e-4;
    train.momentum = 0.9;
    train.gamma = 0.5;
    // The tuner is still mid-transition in K after 500 steps on measured surfaces.
    tuner.steps = 2000;
    env.channel.noise_power_w = channel::noise_power_from_density(noise_density_dbm_hz,
                                                                  env.channel.bandwidth_hz);
}

void ExperimentConfig::validate() const { validate_located(*this, Located{"<config>", {}}); }

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
    ExperimentConfig cfg;
    Located loc{source, {}};
    const auto& keys = key_table();
    const auto& sections = section_order();

    std::string section;  // empty before the first header
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto fail = [&](const std::string& msg) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": " + msg);
        };
        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header '" + std::string(line) + "'");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (std::find(sections.begin(), sections.end(), section) == sections.end()) {
                fail("unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail("expected 'key = value', got '" + std::string(line) + "'");
        const std::string name(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (name.empty()) fail("missing key before '='");

        const Key* match = nullptr;
        if (section.empty()) {
            int hits = 0;
            for (const auto& k : keys) {
                if (k.name == name) {
                    match = &k;
                    ++hits;
                }
            }
            if (hits > 1) fail("key '" + name + "' is ambiguous outside a section; put it under a [section]");
        } else {
            for (const auto& k : keys) {
                if (k.section == section && k.name == name) match = &k;
            }
        }
        if (match == nullptr) {
            fail("unknown key '" + name + "'" + (section.empty() ? "" : " in [" + section + "]"));
        }
        const std::string full = match->section + "." + match->name;
        if (!loc.lines.emplace(full, line_no).second) {
            fail("duplicate key '" + full + "' (first set on line " + std::to_string(loc.lines[full]) + ")");
        }
        try {
            match->set(cfg, value);
        } catch (const BadValue& e) {
            fail(full + ": " + e.what);
        }
    }
    cfg.env.plan.total_uavs = cfg.env.m_uavs;
    if (!loc.lines.contains("surface.ks") && cfg.env.m_uavs >= 1 && cfg.env.m_uavs <= 8) {
        cfg.surface.ks.clear();
        for (int k = 0; k <= cfg.env.m_uavs; ++k) cfg.surface.ks.push_back(k);
    }
    cfg.env.channel.noise_power_w =
        channel::noise_power_from_density(cfg.noise_density_dbm_hz, cfg.env.channel.bandwidth_hz);
    // Section-wide checks report the first key of the section.
    for (const auto& s : {"channel", "movement", "train"}) {
        for (const auto& [k, l] : loc.lines) {
            if (k.rfind(std::string(s) + ".", 0) == 0 && !loc.lines.contains(s)) loc.lines[s] = l;
        }
    }
    validate_located(cfg, loc);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse_config(in, path.string());
}

std::string render_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    for (const auto& section : section_order()) {
        out << '[' << section << "]\n";
        for (const auto& k : key_table()) {
            if (k.section == section) out << k.name << " = " << k.get(cfg) << '\n';
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace twinforge::harness
