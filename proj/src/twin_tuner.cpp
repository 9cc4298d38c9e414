#include "twinforge/twin_tuner.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "twinforge/errors.hpp"

namespace twinforge::tuner {

namespace {

constexpr double kHullTolerance = 1e-12;

struct Bracket {
    std::size_t lo = 0;
    std::size_t hi = 0;
    double t = 0.0;  // weight of hi
};

template <typename T>
Bracket locate(const std::vector<T>& axis, double x) {
    if (axis.size() == 1) return {};
    const double first = static_cast<double>(axis.front());
    const double last = static_cast<double>(axis.back());
    x = std::clamp(x, first, last);
    std::size_t i = 0;
    while (i + 2 < axis.size() && x > static_cast<double>(axis[i + 1])) ++i;
    const double a = static_cast<double>(axis[i]);
    const double b = static_cast<double>(axis[i + 1]);
    const double t = (x - a) / (b - a);
    // Grid nodes read their own cell exactly.
    if (t == 0.0) return {i, i, 0.0};
    if (t == 1.0) return {i + 1, i + 1, 0.0};
    return {i, i + 1, t};
}

template <typename T>
double span_of(const std::vector<T>& axis) {
    return static_cast<double>(axis.back()) - static_cast<double>(axis.front());
}

// One-dimensional derivative of f along an axis [lo, hi].
template <typename F>
double axis_derivative(F&& f, double x, double lo, double hi) {
    if (hi <= lo) return 0.0;
    const double h = 1e-4 * (hi - lo);
    if (x - h < lo) return (f(x + h) - f(x)) / h;
    if (x + h > hi) return (f(x) - f(x - h)) / h;
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus(double x) {
    // ln(1 + e^x) without overflow for large x.
    return x > 30.0 ? x : std::log1p(std::exp(x));
}

}  // namespace

PerformanceSurface::PerformanceSurface(std::vector<double> deltas, std::vector<int> ks,
                                       std::vector<SurfaceCell> cells)
    : deltas_(std::move(deltas)), ks_(std::move(ks)), cells_(std::move(cells)) {
    if (deltas_.empty() || ks_.empty()) throw DomainError("surface needs at least one δ and one K");
    for (std::size_t i = 0; i < deltas_.size(); ++i) {
        if (!std::isfinite(deltas_[i]) || deltas_[i] < 0.0) {
            throw DomainError("surface δ values must be finite and >= 0");
        }
        if (i > 0 && !(deltas_[i] > deltas_[i - 1])) {
            throw DomainError("surface δ values must be strictly ascending");
        }
    }
    for (std::size_t i = 0; i < ks_.size(); ++i) {
        if (ks_[i] < 0) throw DomainError("surface K values must be >= 0");
        if (i > 0 && ks_[i] <= ks_[i - 1]) throw DomainError("surface K values must be strictly ascending");
    }
    if (cells_.size() != deltas_.size() * ks_.size()) {
        throw DomainError("surface cell count does not match the grid");
    }
}

const SurfaceCell& PerformanceSurface::cell(std::size_t i_delta, std::size_t i_k) const {
    if (i_delta >= deltas_.size() || i_k >= ks_.size()) throw DomainError("surface cell out of range");
    return cells_[i_delta * ks_.size() + i_k];
}

bool PerformanceSurface::contains(double delta, double k) const {
    return delta >= deltas_.front() - kHullTolerance && delta <= deltas_.back() + kHullTolerance &&
           k >= ks_.front() - kHullTolerance && k <= ks_.back() + kHullTolerance;
}

std::pair<double, double> PerformanceSurface::clamp(double delta, double k) const {
    return {std::clamp(delta, deltas_.front(), deltas_.back()),
            std::clamp(k, static_cast<double>(ks_.front()), static_cast<double>(ks_.back()))};
}

double PerformanceSurface::interpolate(double delta, double k) const {
    if (!contains(delta, k)) {
        std::ostringstream msg;
        msg << "surface query (δ=" << delta << ", K=" << k << ") outside the grid hull";
        throw DomainError(msg.str());
    }
    const Bracket bd = locate(deltas_, delta);
    const Bracket bk = locate(ks_, k);
    auto mean_at = [&](std::size_t i, std::size_t j) {
        const SurfaceCell& c = cell(i, j);
        if (!c.valid()) {
            throw DomainError("surface query touches an invalid cell (δ=" + std::to_string(deltas_[i]) +
                              ", K=" + std::to_string(ks_[j]) + ")");
        }
        return c.mean_rate;
    };
    // a + t·(b − a) keeps flat regions exactly flat.
    auto along_k = [&](std::size_t i) {
        const double a = mean_at(i, bk.lo);
        return a + bk.t * (mean_at(i, bk.hi) - a);
    };
    const double lo = along_k(bd.lo);
    return lo + bd.t * (along_k(bd.hi) - lo);
}

double PerformanceSurface::min_rate() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& c : cells_) {
        if (c.valid()) m = std::min(m, c.mean_rate);
    }
    return m;
}

double PerformanceSurface::max_rate() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& c : cells_) {
        if (c.valid()) m = std::max(m, c.mean_rate);
    }
    return m;
}

double train_and_score(const env::EnvConfig& env_cfg, const dqn::TrainConfig& train_cfg) {
    const dqn::TrainResult result = dqn::train(env_cfg, train_cfg);
    if (result.log.rows.empty()) return result.final_eval;
    return result.log.rows.back().moving_average;
}

PerformanceSurface build_surface(const env::EnvConfig& env_cfg, const dqn::TrainConfig& train_cfg,
                                 const std::vector<double>& deltas, const std::vector<int>& ks,
                                 int seeds_per_cell, const RunEvaluator& evaluate) {
    if (seeds_per_cell < 1) throw DomainError("build_surface: need at least one seed per cell");
    for (int k : ks) {
        if (k > env_cfg.m_uavs) throw DomainError("build_surface: K exceeds the fleet size");
    }
    std::vector<SurfaceCell> cells;
    cells.reserve(deltas.size() * ks.size());
    for (double delta : deltas) {
        for (int k : ks) {
            env::EnvConfig cell_env = env_cfg;
            cell_env.plan = {env_cfg.m_uavs, k, delta};
            std::vector<double> scores;
            bool failed = false;
            for (int s = 0; s < seeds_per_cell; ++s) {
                dqn::TrainConfig cell_train = train_cfg;
                cell_train.seed = train_cfg.seed + static_cast<std::uint64_t>(s);
                try {
                    const double score = evaluate(cell_env, cell_train);
                    if (!std::isfinite(score)) failed = true;
                    scores.push_back(score);
                } catch (const std::exception&) {
                    failed = true;
                }
            }
            SurfaceCell c;
            if (!failed) {
                double mean = 0.0;
                for (double v : scores) mean += v;
                mean /= static_cast<double>(scores.size());
                double var = 0.0;
                for (double v : scores) var += (v - mean) * (v - mean);
                const double n = static_cast<double>(scores.size());
                c.mean_rate = mean;
                c.std_err = scores.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
                c.seeds = static_cast<int>(scores.size());
            } else {
                c.mean_rate = std::numeric_limits<double>::quiet_NaN();
            }
            cells.push_back(c);
        }
    }
    return PerformanceSurface(deltas, ks, std::move(cells));
}

RateGradient surface_gradient(const PerformanceSurface& surf, double delta, double k_continuous) {
    if (!surf.contains(delta, k_continuous)) {
        throw DomainError("surface_gradient: query outside the grid hull");
    }
    const auto& ds = surf.deltas();
    const auto& ks = surf.ks();
    RateGradient g;
    g.d_delta = axis_derivative([&](double d) { return surf.interpolate(d, k_continuous); }, delta,
                                ds.front(), ds.back());
    g.d_k = axis_derivative([&](double k) { return surf.interpolate(delta, k); }, k_continuous,
                            static_cast<double>(ks.front()), static_cast<double>(ks.back()));
    return g;
}

void write_surface_csv(const PerformanceSurface& surf, std::ostream& out) {
    out << "delta,k,mean_rate,std_err,seeds\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < surf.deltas().size(); ++i) {
        for (std::size_t j = 0; j < surf.ks().size(); ++j) {
            const SurfaceCell& c = surf.cell(i, j);
            out << surf.deltas()[i] << ',' << surf.ks()[j] << ',';
            if (c.valid()) {
                out << c.mean_rate << ',' << c.std_err;
            } else {
                out << "nan,nan";
            }
            out << ',' << c.seeds << '\n';
        }
    }
}

PerformanceSurface read_surface_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "delta,k,mean_rate,std_err,seeds") {
        throw DomainError("surface CSV: missing or unexpected header");
    }
    std::map<std::pair<double, int>, SurfaceCell> by_key;
    std::vector<double> deltas;
    std::vector<int> ks;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field[5];
        for (auto& f : field) {
            if (!std::getline(row, f, ',')) {
                throw DomainError("surface CSV line " + std::to_string(line_no) + ": expected 5 fields");
            }
        }
        try {
            const double delta = std::stod(field[0]);
            const int k = std::stoi(field[1]);
            SurfaceCell c;
            c.seeds = std::stoi(field[4]);
            c.mean_rate = field[2] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(field[2]);
            c.std_err = field[3] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(field[3]);
            if (!c.valid()) c.seeds = 0;
            if (!by_key.emplace(std::pair{delta, k}, c).second) {
                throw DomainError("duplicate cell");
            }
            if (std::find(deltas.begin(), deltas.end(), delta) == deltas.end()) deltas.push_back(delta);
            if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
        } catch (const std::exception& e) {
            throw DomainError("surface CSV line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    std::sort(deltas.begin(), deltas.end());
    std::sort(ks.begin(), ks.end());
    std::vector<SurfaceCell> cells;
    for (double d : deltas) {
        for (int k : ks) {
            const auto it = by_key.find({d, k});
            if (it == by_key.end()) throw DomainError("surface CSV: grid is not rectangular");
            cells.push_back(it->second);
        }
    }
    return PerformanceSurface(std::move(deltas), std::move(ks), std::move(cells));
}

neural::Vector tuner_input(const fleet::TwinEconomics& econ, const InputScales& scales) {
    neural::Vector x(4);
    x << econ.alpha / scales.alpha, econ.beta / scales.beta, econ.zeta / scales.zeta,
        econ.eta / scales.eta;
    return x;
}

TunerOutput map_outputs(double raw_delta, double raw_k, int m_uavs) {
    TunerOutput out;
    out.delta = softplus(raw_delta);
    out.k_continuous = static_cast<double>(m_uavs) * logistic(raw_k);
    out.k_quantized = std::clamp(static_cast<int>(std::floor(out.k_continuous + 0.5)), 0, m_uavs);
    return out;
}

TunerOutput tuner_forward(const neural::Network& g, const fleet::TwinEconomics& econ, int m_uavs,
                          const InputScales& scales) {
    if (g.input_dim() != 4 || g.output_dim() != 2) {
        throw DomainError("tuner network must map 4 inputs to 2 outputs");
    }
    const neural::Vector raw = neural::forward(g, tuner_input(econ, scales));
    return map_outputs(raw(0), raw(1), m_uavs);
}

neural::Network init_tuner(const TunerConfig& cfg) {
    std::vector<int> dims{4};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(2);
    return neural::init_network(dims, cfg.seed);
}

RateGradient objective_gradient(const fleet::TwinEconomics& econ, const PerformanceSurface& surf,
                                double delta, double k_continuous) {
    const auto [dq, kq] = surf.clamp(delta, k_continuous);
    const RateGradient rate = surface_gradient(surf, dq, kq);
    return {econ.eta * rate.d_delta - econ.alpha * econ.beta * std::exp(econ.beta * delta),
            econ.eta * rate.d_k - econ.zeta};
}

UpdateReport tuner_update(neural::Network& g, const fleet::TwinEconomics& econ,
                          const PerformanceSurface& surf, double lr, int m_uavs,
                          const InputScales& scales) {
    if (g.input_dim() != 4 || g.output_dim() != 2) {
        throw DomainError("tuner network must map 4 inputs to 2 outputs");
    }
    const neural::ForwardTrace trace = neural::forward_trace(g, neural::Matrix(tuner_input(econ, scales)));
    const double raw_delta = trace.activations.back()(0, 0);
    const double raw_k = trace.activations.back()(1, 0);

    UpdateReport report;
    report.before = map_outputs(raw_delta, raw_k, m_uavs);
    report.projected = !surf.contains(report.before.delta, report.before.k_continuous);
    RateGradient grad = objective_gradient(econ, surf, report.before.delta, report.before.k_continuous);

    // Projected ascent: no push beyond a hull face already reached.
    const double d_lo = surf.deltas().front();
    const double d_hi = surf.deltas().back();
    const double k_lo = static_cast<double>(surf.ks().front());
    const double k_hi = static_cast<double>(surf.ks().back());
    if ((report.before.delta >= d_hi && grad.d_delta > 0.0) ||
        (report.before.delta <= d_lo && grad.d_delta < 0.0)) {
        grad.d_delta = 0.0;
    }
    if ((report.before.k_continuous >= k_hi && grad.d_k > 0.0) ||
        (report.before.k_continuous <= k_lo && grad.d_k < 0.0)) {
        grad.d_k = 0.0;
    }
    report.gradient = grad;

    // The objective is divided by its span over the grid so lr does not
    // depend on the units of rate and cost.
    const double span = econ.eta * (surf.max_rate() - surf.min_rate()) + econ.alpha +
                        econ.zeta * static_cast<double>(m_uavs);
    const double scale = span > 0.0 ? 1.0 / span : 0.0;
    const double s = logistic(raw_k);
    neural::Matrix output_grad(2, 1);
    output_grad(0, 0) = scale * grad.d_delta * logistic(raw_delta);  // d softplus / dx
    output_grad(1, 0) = scale * grad.d_k * static_cast<double>(m_uavs) * s * (1.0 - s);
    if (output_grad.isZero(0.0)) return report;
    const neural::GradientSet grads = neural::backward(g, trace, output_grad);
    neural::param_step(g, grads, lr, neural::StepDirection::ascend);
    return report;
}

neural::Network train_tuner(const fleet::TwinEconomics& econ, const PerformanceSurface& surf,
                            int m_uavs, const TunerConfig& cfg) {
    econ.validate();
    neural::Network g = init_tuner(cfg);
    for (int i = 0; i < cfg.steps; ++i) tuner_update(g, econ, surf, cfg.lr, m_uavs, cfg.scales);
    return g;
}

fleet::DeploymentPlan select_plan(const neural::Network& g, const fleet::TwinEconomics& econ,
                                  int m_uavs, const InputScales& scales) {
    const TunerOutput out = tuner_forward(g, econ, m_uavs, scales);
    return {m_uavs, out.k_quantized, out.delta};
}

}  // namespace twinforge::tuner
