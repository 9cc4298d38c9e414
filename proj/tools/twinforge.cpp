// Command-line front end: train, evaluate, surface, tune, sweep, report.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "twinforge/config.hpp"
#include "twinforge/errors.hpp"
#include "twinforge/experiment.hpp"
#include "twinforge/report.hpp"

namespace fs = std::filesystem;
using namespace twinforge;
using namespace twinforge::harness;

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::uint64_t> seeds;
    std::string out;
    bool eq8_literal = false;
    bool eq7_literal = false;
    int workers = -1;
    std::string cache;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "Experiment config file (defaults apply when omitted)");
    cmd->add_option("--seed,--seeds", o.seeds, "Seed list, overrides the config")->delimiter(',');
    cmd->add_option("--out", o.out, "Output root (else $TWINFORGE_OUT, else ./out)");
    cmd->add_flag("--eq8-literal", o.eq8_literal, "Aggregate reward noise with variance K*delta");
    cmd->add_flag("--eq7-literal", o.eq7_literal, "TD target without the discount factor");
    cmd->add_option("--workers", o.workers, "Parallel trainings (0: one per hardware thread)");
    cmd->add_option("--cache", o.cache, "Directory for reusable finished trainings");
}

ExperimentConfig resolve(const CommonOptions& o) {
    ExperimentConfig cfg;
    if (!o.config.empty()) cfg = load_config(o.config);
    if (!o.seeds.empty()) cfg.seeds = o.seeds;
    if (o.eq8_literal) cfg.env.eq8_literal = true;
    if (o.eq7_literal) cfg.train.eq7_literal = true;
    if (o.workers >= 0) cfg.workers = o.workers;
    if (!o.cache.empty()) cfg.cache_dir = o.cache;
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("after command-line overrides: ") + e.what());
    }
    return cfg;
}

fs::path output_dir(const CommonOptions& o, const std::string& verb) {
    fs::path root = "out";
    if (const char* env = std::getenv("TWINFORGE_OUT"); env != nullptr && *env != '\0') root = env;
    if (!o.out.empty()) root = o.out;
    return root / verb;
}

std::string command_line(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
    return s;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

int finish(const UtilityReport& report, const ExperimentConfig& cfg, const fs::path& dir, const std::string& cmd,
           double seconds) {
    emit_report(report, cfg, dir, {cmd, seconds});
    int failed = 0;
    for (const auto& r : report.rows) failed += r.ok ? 0 : 1;
    std::cout << "wrote " << report.rows.size() << " rows to " << dir.string();
    if (failed > 0) std::cout << " (" << failed << " failed)";
    std::cout << '\n';
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixed physical/twin UAV fleet training and utility experiments"};
    app.require_subcommand(1);

    CommonOptions train_opt, eval_opt, surface_opt, tune_opt, sweep_opt, report_opt;
    std::string train_scheme;
    std::string policy_path;
    std::string tune_surface;

    auto* train = app.add_subcommand("train", "Train each configured scheme at the base economics");
    add_common(train, train_opt);
    train->add_option("--scheme", train_scheme, "Only this scheme")
        ->check(CLI::IsMember({"physical_only", "fixed_dt", "tuned_dt"}));

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a saved policy with the whole fleet physical");
    add_common(evaluate, eval_opt);
    evaluate->add_option("--policy", policy_path, "Policy snapshot written by train")->required();

    auto* surface = app.add_subcommand("surface", "Train the (delta, K) grid and store the performance surface");
    add_common(surface, surface_opt);

    auto* tune = app.add_subcommand("tune", "Fit the tuner network and print the chosen deployment");
    add_common(tune, tune_opt);
    tune->add_option("--surface", tune_surface, "Stored surface CSV (else the config's, else trained)");

    auto* sweep_cmd = app.add_subcommand("sweep", "Run sweep values x schemes x seeds and write the report");
    add_common(sweep_cmd, sweep_opt);

    auto* report = app.add_subcommand("report", "Redraw charts from an existing output directory and re-audit");
    add_common(report, report_opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string cmd = command_line(argc, argv);
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    try {
        if (*train) {
            ExperimentConfig cfg = resolve(train_opt);
            if (!train_scheme.empty()) cfg.schemes = {parse_scheme(train_scheme)};
            cfg.sweep_param = SweepParam::none;
            cfg.sweep_values.clear();
            RunCache cache(cfg.cache_dir);
            const fs::path dir = output_dir(train_opt, "train");
            const UtilityReport rep = harness::sweep(cfg, cache);
            fs::create_directories(dir / "policies");
            for (const auto& r : rep.rows) {
                const RunSpec spec = make_run(cfg, r.plan, r.seed);
                const auto outcome = cache.find(spec);
                if (outcome && outcome->ok) {
                    write_text(dir / "policies" / (std::string(scheme_name(r.scheme)) + "_seed" +
                                                   std::to_string(r.seed) + ".twnn"),
                               outcome->policy);
                }
            }
            return finish(rep, cfg, dir, cmd, elapsed());
        }
        if (*evaluate) {
            const ExperimentConfig cfg = resolve(eval_opt);
            std::ifstream in(policy_path, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open policy " + policy_path);
            const neural::Network q = neural::load_snapshot(in);
            const int expected_in = cfg.env.feature_count();
            if (q.input_dim() != expected_in || q.output_dim() != cfg.env.action_count()) {
                throw ConfigError("policy shape does not match the configured environment");
            }
            const env::GreedyPolicy greedy = [&](const neural::Vector& s) { return dqn::greedy_action(q, s); };
            nlohmann::json out = nlohmann::json::array();
            for (std::uint64_t seed : cfg.seeds) {
                RandomStream rng = make_stream(seed, "layout");
                const double rate = env::evaluate_physical(cfg.env, greedy, cfg.train.eval_episodes, rng);
                out.push_back({{"seed", seed}, {"mean_sum_rate", rate}});
            }
            std::cout << out.dump(2) << '\n';
            return 0;
        }
        if (*surface) {
            const ExperimentConfig cfg = resolve(surface_opt);
            RunCache cache(cfg.cache_dir);
            const tuner::PerformanceSurface surf = obtain_surface(cfg, cache);
            const fs::path dir = output_dir(surface_opt, "surface");
            fs::create_directories(dir);
            std::ostringstream csv;
            tuner::write_surface_csv(surf, csv);
            write_text(dir / "surface.csv", csv.str());
            write_text(dir / "config.resolved.ini", render_config(cfg));
            std::cout << "wrote " << (dir / "surface.csv").string() << '\n';
            for (std::size_t i = 0; i < surf.deltas().size(); ++i) {
                for (std::size_t j = 0; j < surf.ks().size(); ++j) {
                    if (!surf.cell(i, j).valid()) return 1;
                }
            }
            return 0;
        }
        if (*tune) {
            ExperimentConfig cfg = resolve(tune_opt);
            if (!tune_surface.empty()) cfg.surface.csv_path = tune_surface;
            RunCache cache(cfg.cache_dir);
            const tuner::PerformanceSurface surf = obtain_surface(cfg, cache);
            const neural::Network g = tuner::train_tuner(cfg.econ, surf, cfg.env.m_uavs, cfg.tuner);
            const tuner::TunerOutput out = tuner::tuner_forward(g, cfg.econ, cfg.env.m_uavs, cfg.tuner.scales);
            const fs::path dir = output_dir(tune_opt, "tune");
            fs::create_directories(dir);
            write_text(dir / "tuner.twnn", neural::snapshot_bytes(g));
            nlohmann::json j{{"delta", out.delta},
                             {"k_continuous", out.k_continuous},
                             {"physical_k", out.k_quantized},
                             {"alpha", cfg.econ.alpha},
                             {"beta", cfg.econ.beta},
                             {"zeta", cfg.econ.zeta},
                             {"eta", cfg.econ.eta}};
            write_text(dir / "plan.json", j.dump(2) + "\n");
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (*sweep_cmd) {
            const ExperimentConfig cfg = resolve(sweep_opt);
            RunCache cache(cfg.cache_dir);
            const UtilityReport rep = harness::sweep(cfg, cache);
            return finish(rep, cfg, output_dir(sweep_opt, "sweep"), cmd, elapsed());
        }
        if (*report) {
            const ExperimentConfig cfg = resolve(report_opt);
            const fs::path dir = report_opt.out.empty() ? output_dir(report_opt, "sweep") : fs::path(report_opt.out);
            rerender_report(cfg, dir);
            std::cout << "charts redrawn and audit passed in " << dir.string() << '\n';
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
