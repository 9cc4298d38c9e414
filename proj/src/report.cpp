#include "twinforge/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "twinforge/errors.hpp"

namespace twinforge::harness {

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

double parse_num(const std::string& s) {
    if (s == "nan") return std::nan("");
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw DomainError("not a number: '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct ParsedUtility {
    std::string scheme;
    std::string sweep_param;
    std::string sweep_value;
    std::string seed;
    double mean_sum_rate;
    double construction_cost;
    double deployment_cost;
    double utility;
    std::string status;
    int physical_k;
    std::string twin_noise;
};

std::vector<ParsedUtility> parse_utility(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != kUtilityHeader) {
        throw DomainError("utility CSV: missing or unexpected header");
    }
    std::vector<ParsedUtility> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != 11) {
            throw DomainError("utility CSV line " + std::to_string(line_no) + ": expected 11 fields");
        }
        try {
            rows.push_back({f[0], f[1], f[2], f[3], parse_num(f[4]), parse_num(f[5]), parse_num(f[6]),
                            parse_num(f[7]), f[8], std::stoi(f[9]), f[10]});
        } catch (const std::exception& e) {
            throw DomainError("utility CSV line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

std::vector<ChartSeries> utility_series(const std::vector<ParsedUtility>& rows) {
    // scheme → sweep value → (sum, count)
    std::map<std::string, std::map<double, std::pair<double, int>>> acc;
    std::vector<std::string> order;
    for (const auto& r : rows) {
        if (r.status != "ok" || r.sweep_param == "none") continue;
        if (!acc.contains(r.scheme)) order.push_back(r.scheme);
        auto& cell = acc[r.scheme][parse_num(r.sweep_value)];
        cell.first += r.utility;
        cell.second += 1;
    }
    std::vector<ChartSeries> out;
    for (const auto& scheme : order) {
        ChartSeries s{scheme, {}, {}};
        for (const auto& [x, c] : acc[scheme]) {
            s.x.push_back(x);
            s.y.push_back(c.first / c.second);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ChartSeries> convergence_series(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::map<std::string, std::map<int, std::pair<double, int>>> acc;
    std::vector<std::string> order;
    while (std::getline(in, line)) {
        const auto f = split(line);
        if (f.size() != 7) continue;
        if (!acc.contains(f[6])) order.push_back(f[6]);
        auto& cell = acc[f[6]][std::stoi(f[0])];
        cell.first += parse_num(f[3]);
        cell.second += 1;
    }
    std::vector<ChartSeries> out;
    for (const auto& id : order) {
        ChartSeries s{id, {}, {}};
        for (const auto& [ep, c] : acc[id]) {
            s.x.push_back(ep);
            s.y.push_back(c.first / c.second);
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_charts(const std::filesystem::path& dir, const std::vector<ParsedUtility>& rows,
                  const std::string& convergence) {
    if (rows.empty()) return;
    const auto conv = convergence_series(convergence);
    if (!conv.empty()) {
        write_file(dir / "convergence.svg",
                   line_chart_svg("Moving average of evaluated sum rate (seed mean)", "episode",
                                  "sum rate (bit/s/Hz)", conv));
    }
    const auto util = utility_series(rows);
    if (!util.empty()) {
        write_file(dir / "utility.svg", line_chart_svg("Network utility (seed mean)", rows.front().sweep_param,
                                                       "utility", util));
    }
}

}  // namespace

std::string utility_csv(const UtilityReport& report) {
    std::ostringstream out;
    out << kUtilityHeader << '\n';
    for (const auto& r : report.rows) {
        out << scheme_name(r.scheme) << ',' << sweep_name(r.sweep_param) << ','
            << (r.sweep_param == SweepParam::none ? std::string("n/a") : num(r.sweep_value)) << ',' << r.seed << ','
            << num(r.mean_sum_rate) << ',' << num(r.construction_cost) << ',' << num(r.deployment_cost) << ','
            << num(r.utility) << ',' << (r.ok ? "ok" : "failed") << ',' << r.plan.physical << ','
            << (r.scheme == SchemeKind::physical_only ? std::string("n/a") : num(r.plan.twin_noise)) << '\n';
    }
    return out.str();
}

std::string convergence_csv(const UtilityReport& report) {
    std::ostringstream out;
    out << kConvergenceHeader << '\n';
    for (const auto& t : report.traces) {
        for (const auto& r : t.log.rows) {
            out << r.episode << ',' << num(r.train_return) << ',' << num(r.eval_sum_rate) << ','
                << num(r.moving_average) << ',' << num(r.epsilon) << ',' << t.log.seed << ',' << t.scheme_id << '\n';
        }
    }
    return out.str();
}

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series) {
    constexpr double width = 760, height = 460;
    constexpr double left = 80, right = 200, top = 50, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

    double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, s.y[i]);
            y_hi = std::max(y_hi, s.y[i]);
        }
    }
    if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
    if (x_hi == x_lo) x_hi = x_lo + 1;
    if (y_hi == y_lo) y_hi = y_lo + 1;
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;
    auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * plot_w; };
    auto py = [&](double y) { return top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"15\">"
        << xml_escape(title) << "</text>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = x_lo + (x_hi - x_lo) * i / 5.0;
        const double yv = y_lo + (y_hi - y_lo) * i / 5.0;
        svg << "<line x1=\"" << px(xv) << "\" y1=\"" << top << "\" x2=\"" << px(xv) << "\" y2=\"" << top + plot_h
            << "\" stroke=\"#eee\"/>\n";
        svg << "<line x1=\"" << left << "\" y1=\"" << py(yv) << "\" x2=\"" << left + plot_w << "\" y2=\"" << py(yv)
            << "\" stroke=\"#eee\"/>\n";
        svg << "<text x=\"" << px(xv) << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">"
            << tick_label(xv) << "</text>\n";
        svg << "<text x=\"" << left - 8 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << tick_label(yv)
            << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\">"
        << xml_escape(x_label) << "</text>\n";
    svg << "<text transform=\"translate(20," << top + plot_h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << xml_escape(y_label) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = palette[k % std::size(palette)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            svg << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        }
        svg << "\"/>\n";
        if (s.x.size() <= 20) {
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
                if (!std::isfinite(s.y[i])) continue;
                svg << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << color
                    << "\"/>\n";
            }
        }
        const double ly = top + 14 + 18.0 * static_cast<double>(k);
        svg << "<line x1=\"" << left + plot_w + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + plot_w + 32
            << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << left + plot_w + 38 << "\" y=\"" << ly << "\">" << xml_escape(s.name) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::size_t audit_utility_csv(const std::string& csv, const fleet::TwinEconomics& base_econ, int m_uavs) {
    std::size_t checked = 0;
    const auto rows = parse_utility(csv);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        auto fail = [&](const std::string& what) {
            throw StateError("utility audit, data row " + std::to_string(i + 1) + " (" + r.scheme + ", seed " +
                             r.seed + "): " + what);
        };
        if (r.scheme == "physical_only" && r.twin_noise != "n/a") fail("physical_only row carries a noise value");
        if (r.status != "ok") continue;
        const SweepParam p = parse_sweep(r.sweep_param);
        const fleet::TwinEconomics econ =
            apply_sweep(base_econ, p, p == SweepParam::none ? 0.0 : parse_num(r.sweep_value));
        const fleet::DeploymentPlan plan{m_uavs, r.physical_k, r.twin_noise == "n/a" ? 0.0 : parse_num(r.twin_noise)};
        if (fleet::construction_cost(econ, plan) != r.construction_cost) fail("construction cost does not recompute");
        if (fleet::deployment_cost(econ, plan) != r.deployment_cost) fail("deployment cost does not recompute");
        if (fleet::utility(econ, plan, r.mean_sum_rate) != r.utility) fail("utility does not recompute");
        ++checked;
    }
    return checked;
}

void emit_report(const UtilityReport& report, const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                 const EmitOptions& options) {
    std::filesystem::create_directories(out_dir);
    const std::string util = utility_csv(report);
    const std::string conv = convergence_csv(report);
    write_file(out_dir / "utility.csv", util);
    write_file(out_dir / "convergence.csv", conv);
    write_file(out_dir / "config.resolved.ini", render_config(cfg));
    if (report.surface) {
        std::ostringstream s;
        tuner::write_surface_csv(*report.surface, s);
        write_file(out_dir / "surface.csv", s.str());
    }

    const std::size_t audited = audit_utility_csv(read_file(out_dir / "utility.csv"), report.base_econ, cfg.env.m_uavs);
    write_charts(out_dir, parse_utility(util), conv);

    nlohmann::json manifest;
    manifest["program"] = "twinforge";
    manifest["version"] = "1.0.0";
    manifest["compiler"] = __VERSION__;
    manifest["command"] = options.command;
    manifest["config"] = render_config(cfg);
    manifest["seeds"] = cfg.seeds;
    std::vector<std::string> schemes;
    for (auto s : cfg.schemes) schemes.emplace_back(scheme_name(s));
    manifest["schemes"] = schemes;
    manifest["sweep"] = {{"param", std::string(sweep_name(cfg.sweep_param))}, {"values", cfg.sweep_values}};
    manifest["rows"] = report.rows.size();
    manifest["rows_audited"] = audited;
    manifest["all_rows_ok"] = report.all_ok();
    nlohmann::json walls = nlohmann::json::object();
    for (const auto& [id, secs] : report.wall_times) walls[id] = secs;
    manifest["run_wall_seconds"] = walls;
    manifest["total_wall_seconds"] = options.total_wall_seconds;
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void rerender_report(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    const std::string util = read_file(out_dir / "utility.csv");
    const std::string conv = read_file(out_dir / "convergence.csv");
    audit_utility_csv(util, cfg.econ, cfg.env.m_uavs);
    write_charts(out_dir, parse_utility(util), conv);
}

}  // namespace twinforge::harness
