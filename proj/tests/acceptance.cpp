// End-to-end acceptance run at full scale (M = 4, N = 100, 2000 episodes,
// five seeds). Prints one PASS/FAIL line per criterion and exits non-zero
// when any fails. Set TWINFORGE_CACHE to a directory to reuse trainings
// across invocations.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lattice_oracle.hpp"
#include "twinforge/channel.hpp"
#include "twinforge/config.hpp"
#include "twinforge/experiment.hpp"
#include "twinforge/fleet.hpp"
#include "twinforge/neural.hpp"
#include "twinforge/report.hpp"
#include "twinforge/twin_tuner.hpp"

using namespace twinforge;
using namespace twinforge::harness;

namespace {

constexpr double kConvergenceGain = 1.2;
constexpr int kConvergenceWindow = 200;
constexpr int kSeedsRequired = 4;
constexpr int kMaxInversions = 1;
constexpr double kTunerSlackSe = 2.0;
constexpr double kFdTolerance = 1e-4;
constexpr double kVarianceTolerance = 0.10;
constexpr int kVarianceSamples = 100000;
constexpr double kOracleRatio = 0.9;
constexpr double kCostDerivativeTolerance = 1e-6;

const std::vector<double> kCostWeights{0.25, 0.5, 1.0, 2.0, 4.0};
const std::vector<double> kBetas{-0.5, -1.0, -2.0};

int failures = 0;

void verdict(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("criterion %d %-22s %s  %s\n", id, name.c_str(), pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

struct Stats {
    double mean = 0.0;
    double se = 0.0;
    bool ok = true;
};

Stats stats(const std::vector<double>& xs) {
    Stats s;
    const double n = static_cast<double>(xs.size());
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.se = xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    for (double x : xs) s.ok = s.ok && std::isfinite(x);
    return s;
}

// Adjacent pairs that rise where the sequence should not.
int inversions(const std::vector<double>& non_increasing) {
    int n = 0;
    for (std::size_t i = 1; i < non_increasing.size(); ++i) n += non_increasing[i] > non_increasing[i - 1] ? 1 : 0;
    return n;
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

// Final moving average of each seed's run for one deployment.
std::vector<double> final_rates(const ExperimentConfig& cfg, const fleet::DeploymentPlan& plan, RunCache& cache,
                                bool& all_ok) {
    std::vector<RunSpec> specs;
    for (auto seed : cfg.seeds) specs.push_back(make_run(cfg, plan, seed));
    std::vector<double> out;
    for (const auto& o : run_all(specs, cache, cfg.workers)) {
        all_ok = all_ok && o->ok;
        out.push_back(o->ok ? o->mean_sum_rate : std::nan(""));
    }
    return out;
}

// scheme → sweep value → per-seed utilities
using UtilityTable = std::map<SchemeKind, std::map<double, std::vector<double>>>;

UtilityTable tabulate(const UtilityReport& rep) {
    UtilityTable t;
    for (const auto& r : rep.rows) t[r.scheme][r.sweep_value].push_back(r.ok ? r.utility : std::nan(""));
    return t;
}

void property_suite() {
    std::vector<std::string> failed;

    // Backpropagation against central differences.
    double worst_fd = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const std::vector<int> dims{6, 9, 7, 4};
        neural::Network net = neural::init_network(dims, seed);
        // Non-zero biases keep a dead layer from parking the next one on the kink.
        RandomStream brng(seed + 1);
        std::uniform_real_distribution<double> ub(-0.3, 0.3);
        for (auto& l : net.layers()) {
            for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = ub(brng);
        }
        const neural::Vector x = neural::Vector::LinSpaced(6, -0.8, 1.1) * (0.5 + 0.1 * static_cast<double>(seed));
        const neural::Vector target = neural::Vector::LinSpaced(4, 1.0, -1.0);
        const neural::OutputLoss loss{
            [target](const neural::Vector& y) { return 0.5 * (y - target).squaredNorm(); },
            [target](const neural::Vector& y) -> neural::Vector { return y - target; }};
        worst_fd = std::max(worst_fd, neural::grad_check(net, x, loss));
    }
    if (!(worst_fd < kFdTolerance)) failed.push_back("backprop FD " + fmt(worst_fd));

    // Injected twin noise variance.
    channel::ChannelParams unit;
    unit.bandwidth_hz = 1.0;
    double worst_var = 0.0;
    for (double delta : {0.2, 0.8, 1.6}) {
        RandomStream rng = make_stream(17, "twin-noise");
        const double base = channel::rate_real(unit, 30.0);
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < kVarianceSamples; ++i) {
            const double dev = channel::rate_virtual(unit, 30.0, delta, rng) - base;
            sum += dev;
            sum_sq += dev * dev;
        }
        const double mean = sum / kVarianceSamples;
        const double var = sum_sq / kVarianceSamples - mean * mean;
        worst_var = std::max(worst_var, std::abs(var - delta) / delta);
    }
    if (!(worst_var <= kVarianceTolerance)) failed.push_back("noise variance off by " + fmt(worst_var));

    // Rate strictly falls with distance; δ = 0 twin rate equals the real rate.
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool monotone = true, identity = true;
    RandomStream noise = make_stream(3, "twin-noise");
    for (int trial = 0; trial < 1000; ++trial) {
        channel::ChannelParams p;
        p.pathloss_const = std::pow(10.0, -6.0 * u(g));
        p.pathloss_exponent = 1.0 + 3.0 * u(g);
        p.tx_power_w = 1e-3 + u(g);
        const double d1 = 1.0 + 200.0 * u(g);
        const double d2 = d1 * (1.01 + u(g));
        monotone = monotone && channel::rate_real(p, d1) > channel::rate_real(p, d2);
        identity = identity && channel::rate_virtual(p, d1, 0.0, noise) == channel::rate_real(p, d1);
    }
    if (!monotone) failed.push_back("rate not monotone in distance");
    if (!identity) failed.push_back("zero-noise twin rate differs");

    // Single-UAV learner against the exact lattice optimum.
    int graded = 0;
    std::string ratios;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const double r = lattice_oracle::grade_seed(seed).ratio();
        graded += r >= kOracleRatio ? 1 : 0;
        ratios += (ratios.empty() ? "" : " ") + fmt(r, 3);
    }
    if (graded < kSeedsRequired) failed.push_back("oracle ratios " + ratios);

    // Identical reruns give byte-identical CSVs.
    ExperimentConfig small;
    small.train.episodes = 30;
    small.seeds = {1, 2};
    small.surface.deltas = {0.0, 0.8};
    small.surface.ks = {0, 2, 4};
    small.surface.seeds_per_cell = 1;
    small.tuner.steps = 100;
    small.sweep_param = SweepParam::cost_weight;
    small.sweep_values = {0.5, 2.0};
    RunCache c1, c2;
    const UtilityReport a = sweep(small, c1);
    const UtilityReport b = sweep(small, c2);
    if (utility_csv(a) != utility_csv(b) || convergence_csv(a) != convergence_csv(b)) {
        failed.push_back("reruns differ");
    }

    // Construction-cost derivative against central differences.
    tuner::PerformanceSurface flat({0.0, 2.0}, {0, 4}, std::vector<tuner::SurfaceCell>(4, {100.0, 0.0, 1}));
    double worst_cost = 0.0;
    for (const fleet::TwinEconomics e : {fleet::TwinEconomics{1.0, -0.5, 0.0, 1.0},
                                         fleet::TwinEconomics{37.0, -2.0, 0.0, 1.0},
                                         fleet::TwinEconomics{200.0, -0.1, 0.0, 1.0}}) {
        for (double delta : {0.1, 0.8, 1.5}) {
            const double analytic = tuner::objective_gradient(e, flat, delta, 2.0).d_delta;
            const double h = 1e-5;
            const fleet::DeploymentPlan up{4, 2, delta + h}, down{4, 2, delta - h};
            const double numeric = -(fleet::construction_cost(e, up) - fleet::construction_cost(e, down)) / (2 * h);
            worst_cost = std::max(worst_cost, std::abs(analytic - numeric) / std::abs(numeric));
        }
    }
    if (!(worst_cost <= kCostDerivativeTolerance)) failed.push_back("cost derivative " + fmt(worst_cost));

    std::string detail = "FD " + fmt(worst_fd, 2) + ", variance " + fmt(100 * worst_var, 2) + "%, oracle " +
                         std::to_string(graded) + "/5 [" + ratios + "], cost derivative " + fmt(worst_cost, 2);
    for (const auto& f : failed) detail += "; " + f;
    verdict(7, "property suite", failed.empty(), detail);
}

}  // namespace

int main() {
    ExperimentConfig cfg;
    const char* cache_dir = std::getenv("TWINFORGE_CACHE");
    RunCache cache(cache_dir != nullptr ? cache_dir : "");
    const int m = cfg.env.m_uavs;

    property_suite();

    // Convergence of the all-physical fleet.
    {
        std::vector<RunSpec> specs;
        for (auto seed : cfg.seeds) specs.push_back(make_run(cfg, {m, m, 0.0}, seed));
        const auto outcomes = run_all(specs, cache, cfg.workers);
        int passed = 0;
        std::string detail;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            const auto& rows = outcomes[i]->log.rows;
            double ratio = std::nan("");
            if (outcomes[i]->ok && rows.size() >= static_cast<std::size_t>(kConvergenceWindow)) {
                double first = 0.0;
                for (int e = 0; e < kConvergenceWindow; ++e) first += rows[e].eval_sum_rate;
                first /= kConvergenceWindow;
                ratio = rows.back().moving_average / first;
            }
            passed += ratio >= kConvergenceGain ? 1 : 0;
            detail += (detail.empty() ? "" : " ") + fmt(ratio, 4);
        }
        verdict(1, "convergence", passed >= kSeedsRequired,
                std::to_string(passed) + "/5 seeds reach " + fmt(kConvergenceGain) + "x; final/first ratios " +
                    detail);
    }

    // Fewer physical UAVs means a worse policy at fixed twin noise.
    {
        bool ok = true;
        std::vector<double> means;
        std::string detail;
        for (int k : {m, m - 2, 0}) {
            const Stats s = stats(final_rates(cfg, {m, k, 0.8}, cache, ok));
            means.push_back(s.mean);
            detail += (detail.empty() ? "" : ", ") + std::to_string(m - k) + " virtual " + fmt(s.mean, 6);
        }
        const int inv = inversions(means);
        verdict(2, "virtual-count order", ok && inv <= kMaxInversions,
                detail + "; inversions " + std::to_string(inv));
    }

    // Noisier twins mean a worse policy.
    {
        bool ok = true;
        std::vector<double> means;
        std::string detail;
        for (double d : {0.2, 0.8, 1.6}) {
            const Stats s = stats(final_rates(cfg, {m, 0, d}, cache, ok));
            means.push_back(s.mean);
            detail += (detail.empty() ? "" : ", ") + std::string("delta ") + fmt(d) + " " + fmt(s.mean, 6);
        }
        const int inv = inversions(means);
        verdict(3, "noise order", ok && inv <= kMaxInversions, detail + "; inversions " + std::to_string(inv));
    }

    ExperimentConfig cost_cfg = cfg;
    cost_cfg.sweep_param = SweepParam::cost_weight;
    cost_cfg.sweep_values = kCostWeights;
    const UtilityReport cost_rep = sweep(cost_cfg, cache);
    const UtilityTable cost = tabulate(cost_rep);

    // Twin beats physical above some cost weight; physical falls fastest.
    {
        std::vector<double> phys, fixed;
        std::map<SchemeKind, double> slope;
        bool ok = cost_rep.all_ok();
        for (const auto& [scheme, by_value] : cost) {
            std::vector<double> xs, ys;
            for (const auto& [v, us] : by_value) {
                xs.push_back(v);
                ys.push_back(stats(us).mean);
            }
            slope[scheme] = fitted_slope(xs, ys);
            if (scheme == SchemeKind::physical_only) phys = ys;
            if (scheme == SchemeKind::fixed_dt) fixed = ys;
        }
        // Smallest index from which fixed_dt leads at every remaining point.
        std::size_t from = phys.size();
        while (from > 0 && fixed[from - 1] > phys[from - 1]) --from;
        const bool crossover = from < phys.size();
        bool steepest = true;
        for (const auto& [scheme, s] : slope) steepest = steepest && slope[SchemeKind::physical_only] <= s;
        std::string detail = crossover ? "fixed_dt leads from cost_weight " + fmt(kCostWeights[from])
                                       : std::string("fixed_dt never leads to the end");
        detail += "; slopes";
        for (const auto& [scheme, s] : slope) detail += " " + std::string(scheme_name(scheme)) + "=" + fmt(s, 5);
        verdict(4, "utility crossover", ok && crossover && steepest, detail);
    }

    ExperimentConfig beta_cfg = cfg;
    beta_cfg.sweep_param = SweepParam::beta;
    beta_cfg.sweep_values = kBetas;
    const UtilityReport beta_rep = sweep(beta_cfg, cache);
    const UtilityTable beta = tabulate(beta_rep);

    // Tuned advantage grows with |β|.
    {
        std::vector<double> gaps;
        std::string detail;
        for (double b : kBetas) {
            const double gap = stats(beta.at(SchemeKind::tuned_dt).at(b)).mean -
                               stats(beta.at(SchemeKind::physical_only).at(b)).mean;
            gaps.push_back(gap);
            detail += (detail.empty() ? "gap" : ",") + std::string(" beta ") + fmt(b) + ": " + fmt(gap, 6);
        }
        bool non_decreasing = true;
        for (std::size_t i = 1; i < gaps.size(); ++i) non_decreasing = non_decreasing && gaps[i] >= gaps[i - 1];
        verdict(5, "beta sweep", beta_rep.all_ok() && non_decreasing, detail);
    }

    // Tuned is never significantly below the better fixed scheme.
    {
        bool pass = cost_rep.all_ok() && beta_rep.all_ok();
        double worst = std::numeric_limits<double>::infinity();
        std::string where;
        auto check = [&](const UtilityTable& t, const std::string& label, double v) {
            const Stats tuned = stats(t.at(SchemeKind::tuned_dt).at(v));
            const Stats phys = stats(t.at(SchemeKind::physical_only).at(v));
            const Stats fixed = stats(t.at(SchemeKind::fixed_dt).at(v));
            const Stats& best = phys.mean >= fixed.mean ? phys : fixed;
            const double se = std::sqrt(tuned.se * tuned.se + best.se * best.se);
            const double margin = (tuned.mean - best.mean) / std::max(se, 1e-12);
            if (tuned.mean < best.mean - kTunerSlackSe * se) pass = false;
            if (margin < worst) {
                worst = margin;
                where = label + " " + fmt(v);
            }
        };
        for (double v : kCostWeights) check(cost, "cost_weight", v);
        for (double v : kBetas) check(beta, "beta", v);
        verdict(6, "tuner dominance", pass,
                "worst margin " + fmt(worst, 3) + " SE at " + where + " (limit -" + fmt(kTunerSlackSe) + ")");
    }

    std::printf("%d of 7 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
