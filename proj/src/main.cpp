// Command line front end. Every subcommand reads a JSON run configuration,
// writes CSV/JSON tables (plus gnuplot scripts where a plot makes sense)
// into the configured output directory, and prints a short summary.
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure,
// 4 detection ran but every level came back inconclusive. Error lines
// name the module that raised them and the violated precondition.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "specprobe/common.hpp"
#include "specprobe/detector.hpp"
#include "specprobe/io.hpp"
#include "specprobe/potential.hpp"
#include "specprobe/quantum1d.hpp"
#include "specprobe/specdist.hpp"
#include "specprobe/testfn.hpp"

namespace fs = std::filesystem;

namespace {

using namespace specprobe;
using ojson = nlohmann::ordered_json;

// Re-throws stage errors with the originating module named, so the
// top-level handler prints "module: precondition" for every failure.
template <typename F>
auto stage(const char* module, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", module, e.what()));
    } catch (const SolverError& e) {
        throw SolverError(fmt::format("{}: {}", module, e.what()));
    }
}

std::string opath(const RunConfig& cfg, const char* name) {
    return (fs::path(cfg.output_dir) / name).string();
}

std::ofstream open_table(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError(fmt::format("io: cannot open '{}' for writing", path));
    return f;
}

std::string g17(double v) { return fmt::format("{:.17g}", v); }

const char* verdict_text(LevelVerdict v) {
    switch (v) {
        case LevelVerdict::regular: return "regular";
        case LevelVerdict::critical: return "critical";
        default: return "inconclusive";
    }
}

ojson fit_json(const FitResult& f) {
    ojson j;
    j["alpha"] = f.alpha;
    j["alpha_sigma"] = f.alpha_sigma();
    j["m"] = f.m;
    j["log_c"] = f.log_c;
    j["amplitude_at_center"] = f.numerically_zero ? 0.0 : f.amplitude_at_center();
    j["rms"] = f.rms;
    j["points_used"] = f.used;
    j["numerically_zero"] = f.numerically_zero;
    return j;
}

int cmd_spectrum(const RunConfig& cfg) {
    if (!(cfg.spectrum_h > 0.0)) {
        throw ConfigError("config: the spectrum command needs a spectrum section with h");
    }
    const double h = cfg.spectrum_h;
    const double margin = cfg.eps < 0.0 ? 0.1 * (cfg.e2 - cfg.e1) : cfg.eps;
    const double e_top = cfg.e2 + margin;

    const DiscretizedOperator op = stage("quantum1d", [&] {
        if (cfg.solver_box > 0.0) {
            const double box = cfg.solver_box;
            const int n = cfg.solver_grid > 0
                              ? cfg.solver_grid
                              : static_cast<int>(std::ceil(20.0 * box / h));
            return discretize(cfg.potential, h, box, n, e_top);
        }
        if (cfg.solver_grid > 0) {
            const double box = auto_box(*cfg.potential, e_top, h);
            return discretize(cfg.potential, h, box, cfg.solver_grid, e_top);
        }
        return discretize_auto(cfg.potential, h, e_top);
    });
    const Spectrum spec =
        stage("quantum1d", [&] { return eigen_window(op, cfg.e1, cfg.e2); });

    write_spectrum_csv(opath(cfg, "spectrum.csv"), spec, cfg);
    write_spectrum_json(opath(cfg, "spectrum.json"), spec, cfg);
    fmt::print("spectrum: {} eigenvalues in [{:g}, {:g}] at h = {:g} (box {:.4g}, N = {})\n",
               spec.eigenvalues.size(), cfg.e1, cfg.e2, h, spec.box, spec.n_grid);
    fmt::print("wrote {} and {}\n", opath(cfg, "spectrum.csv"), opath(cfg, "spectrum.json"));
    return 0;
}

int cmd_scan(const RunConfig& cfg) {
    if (!(cfg.scan_h > 0.0)) {
        throw ConfigError("config: the scan command needs a scan section with h");
    }
    if (!cfg.kernel) {
        throw ConfigError("config: the scan command needs a test_function section");
    }
    std::string warning;
    if (!weyl_kill_check(*cfg.kernel)) {
        warning =
            "the kernel keeps the low moments, so the smooth eigenvalue "
            "background dominates the scan and critical levels may show "
            "little contrast";
        fmt::print("warning: {}\n", warning);
    }
    const auto grid = linspace(cfg.e1, cfg.e2, cfg.scan_points);
    const auto points = stage("specdist", [&] {
        return e_scan(cfg.potential, cfg.scan_h, *cfg.kernel, grid, cfg.eps);
    });

    write_scan_csv(opath(cfg, "scan.csv"), points, cfg, warning);
    emit_scan_plot(opath(cfg, "scan.csv"), opath(cfg, "scan.gp"));

    int flagged = 0;
    double best = -1.0, best_e = cfg.e1;
    for (const auto& p : points) {
        if (p.flagged) ++flagged;
        if (p.magnitude > best) {
            best = p.magnitude;
            best_e = p.E;
        }
    }
    fmt::print("scan: {} points over [{:g}, {:g}] at h = {:g}; peak |Y| = {:.5g} at E = {:.6g}; {} flagged\n",
               points.size(), cfg.e1, cfg.e2, cfg.scan_h, best, best_e, flagged);
    fmt::print("wrote {} and {}\n", opath(cfg, "scan.csv"), opath(cfg, "scan.gp"));
    return 0;
}

int cmd_sweep(const RunConfig& cfg) {
    if (!cfg.has_sweep_energy) {
        throw ConfigError("config: the sweep command needs a sweep section with energy");
    }
    if (!cfg.kernel) {
        throw ConfigError("config: the sweep command needs a test_function section");
    }
    SweepParams sp;
    sp.e1 = cfg.e1;
    sp.e2 = cfg.e2;
    sp.eps = cfg.eps;
    sp.jobs = cfg.jobs;
    const auto hs = cfg.h_list.empty() ? default_h_list() : cfg.h_list;
    const SweepResult sweep = stage("specdist", [&] {
        return h_sweep(cfg.potential, cfg.sweep_energy, *cfg.kernel, hs, sp);
    });
    write_sweep_csv(opath(cfg, "sweep.csv"), sweep, cfg);

    // The sweep data stands on its own; a fit that cannot run (too few
    // clean rows, ladder too short) is reported, not fatal.
    FitResult fit;
    bool have_fit = true;
    std::string fit_note;
    try {
        fit = fit_power_log(sweep);
    } catch (const std::exception& e) {
        have_fit = false;
        fit_note = e.what();
    }
    write_sweep_json(opath(cfg, "sweep.json"), sweep, have_fit ? &fit : nullptr, cfg);
    emit_sweep_plot(opath(cfg, "sweep.csv"), opath(cfg, "sweep.gp"));

    if (!have_fit) {
        fmt::print("sweep at E = {:g}: fit skipped ({})\n", cfg.sweep_energy, fit_note);
    } else if (fit.numerically_zero) {
        fmt::print("sweep at E = {:g}: response below its truncation floor at every h (numerically zero)\n",
                   cfg.sweep_energy);
    } else {
        fmt::print("sweep at E = {:g}: |Y| ~ C h^a log(1/h)^m with a = {:+.4f} +- {:.4f}, m = {}, C(center) = {:.5g}\n",
                   cfg.sweep_energy, fit.alpha, fit.alpha_sigma(), fit.m,
                   fit.amplitude_at_center());
    }
    fmt::print("wrote {}, {} and {}\n", opath(cfg, "sweep.csv"),
               opath(cfg, "sweep.json"), opath(cfg, "sweep.gp"));
    return 0;
}

// Levels from the config, or every critical value of V inside the window
// (duplicates within 1e-6 merged). No levels at all is a config error.
std::vector<double> resolve_levels(const RunConfig& cfg) {
    std::vector<double> levels = cfg.levels;
    if (levels.empty()) {
        const auto points =
            stage("potential", [&] { return find_critical_points(*cfg.potential); });
        for (const auto& c : points) {
            if (c.e_c < cfg.e1 || c.e_c > cfg.e2) continue;
            bool dup = false;
            for (double e : levels) dup = dup || std::abs(e - c.e_c) <= 1e-6;
            if (!dup) levels.push_back(c.e_c);
        }
        if (levels.empty()) {
            throw ConfigError(fmt::format(
                "detector: no critical values of V inside [{:g}, {:g}]; "
                "supply levels explicitly",
                cfg.e1, cfg.e2));
        }
    }
    std::sort(levels.begin(), levels.end());
    return levels;
}

int cmd_detect(const RunConfig& cfg) {
    const auto levels = resolve_levels(cfg);
    const DetectorParams dp = detector_params(cfg);

    std::vector<std::pair<double, LevelClass>> rows;
    for (double e : levels) {
        const TestFunction tf =
            cfg.kernel ? *cfg.kernel : stage("detector", [&] {
                return default_classification_kernel(*cfg.potential, e,
                                                     cfg.band_halfwidth);
            });
        rows.emplace_back(e, stage("detector", [&] {
                              return classify_level(cfg.potential, e, tf, dp);
                          }));
    }

    {
        auto f = open_table(opath(cfg, "detect.csv"));
        f << "# specprobe detect\n";
        f << "# config_hash=" << (cfg.config_hash.empty() ? "none" : cfg.config_hash)
          << "\n";
        if (!cfg.potential_label.empty()) f << "# potential=" << cfg.potential_label << "\n";
        f << "E,verdict,alpha,alpha_sigma,m,rms,numerically_zero\n";
        for (const auto& [e, cls] : rows) {
            f << g17(e) << "," << verdict_text(cls.verdict) << ","
              << g17(cls.fit.alpha) << "," << g17(cls.fit.alpha_sigma()) << ","
              << cls.fit.m << "," << g17(cls.fit.rms) << ","
              << (cls.fit.numerically_zero ? 1 : 0) << "\n";
        }
    }
    {
        ojson j;
        j["kind"] = "detect";
        j["config_hash"] = cfg.config_hash.empty() ? "none" : cfg.config_hash;
        if (!cfg.potential_label.empty()) j["potential"] = cfg.potential_label;
        ojson arr = ojson::array();
        for (const auto& [e, cls] : rows) {
            ojson r;
            r["E"] = e;
            r["verdict"] = verdict_text(cls.verdict);
            r["note"] = cls.note;
            r["fit"] = fit_json(cls.fit);
            arr.push_back(std::move(r));
        }
        j["levels"] = std::move(arr);
        auto f = open_table(opath(cfg, "detect.json"));
        f << j.dump(2) << "\n";
    }

    bool any_decided = false;
    for (const auto& [e, cls] : rows) {
        any_decided = any_decided || cls.verdict != LevelVerdict::inconclusive;
        fmt::print("E = {:<10.6g} {} ({})\n", e, verdict_text(cls.verdict), cls.note);
    }
    fmt::print("wrote {} and {}\n", opath(cfg, "detect.csv"), opath(cfg, "detect.json"));
    return any_decided ? 0 : 4;
}

int cmd_density(const RunConfig& cfg) {
    if (cfg.density_centers.empty()) {
        throw ConfigError("config: the density command needs a density section with centers");
    }
    const DetectorParams dp = detector_params(cfg);
    const auto samples = stage("detector", [&] {
        return density_from_quantum(cfg.potential, cfg.density_z0,
                                    cfg.density_level, cfg.density_centers, dp);
    });

    {
        auto f = open_table(opath(cfg, "density.csv"));
        f << "# specprobe density\n";
        f << "# config_hash=" << (cfg.config_hash.empty() ? "none" : cfg.config_hash)
          << "\n";
        if (!cfg.potential_label.empty()) f << "# potential=" << cfg.potential_label << "\n";
        f << "# z0=" << g17(cfg.density_z0) << " level=" << g17(cfg.density_level)
          << "\n";
        f << "t,value,alpha\n";
        for (const auto& s : samples) {
            f << g17(s.t) << "," << g17(s.value) << "," << g17(s.alpha) << "\n";
        }
    }

    ojson j;
    j["kind"] = "density";
    j["config_hash"] = cfg.config_hash.empty() ? "none" : cfg.config_hash;
    if (!cfg.potential_label.empty()) j["potential"] = cfg.potential_label;
    j["z0"] = cfg.density_z0;
    j["level"] = cfg.density_level;
    ojson arr = ojson::array();
    for (const auto& s : samples) {
        arr.push_back(ojson{{"t", s.t}, {"value", s.value}, {"alpha", s.alpha}});
    }
    j["samples"] = std::move(arr);

    // Curvature fit from the recovered density. The pure-product model has
    // no 2^-n prefactor, so one-dimensional samples are doubled first.
    fmt::print("density: {} samples at E = {:g} around z0 = {:g}\n", samples.size(),
               cfg.density_level, cfg.density_z0);
    if (samples.size() >= 16) {
        std::vector<std::pair<double, double>> pts;
        pts.reserve(samples.size());
        for (const auto& s : samples) pts.emplace_back(s.t, 2.0 * s.value);
        try {
            const HessianSpectrum hs = recover_hessian_spectrum(pts, 1);
            j["hessian"] = ojson{{"alphas", hs.alphas},
                                 {"mu", hs.mu},
                                 {"signature_r", hs.signature_r},
                                 {"rms", hs.rms}};
            fmt::print("curvature fit: mu = {:.4f}, signature r = {}\n", hs.mu[0],
                       hs.signature_r);
        } catch (const std::exception& e) {
            j["hessian"] = nullptr;
            fmt::print("curvature fit skipped: {}\n", e.what());
        }
    } else {
        j["hessian"] = nullptr;
        fmt::print("curvature fit skipped: {} samples, need at least 16\n",
                   samples.size());
    }

    auto f = open_table(opath(cfg, "density.json"));
    f << j.dump(2) << "\n";
    fmt::print("wrote {} and {}\n", opath(cfg, "density.csv"), opath(cfg, "density.json"));
    return 0;
}

int cmd_invert(const RunConfig& cfg) {
    const auto levels = resolve_levels(cfg);
    const DetectorParams dp = detector_params(cfg);

    std::vector<CriticalReport> reports;
    for (double e : levels) {
        reports.push_back(stage("detector", [&] {
            return analyze_critical_level(cfg.potential, e, dp);
        }));
    }
    write_report_json(opath(cfg, "report.json"), reports, cfg);

    std::string all;
    for (const auto& r : reports) {
        all += report_summary(r);
        all += "\n";
    }
    {
        auto f = open_table(opath(cfg, "summary.txt"));
        f << all;
    }
    fmt::print("{}", all);
    fmt::print("wrote {} and {}\n", opath(cfg, "report.json"), opath(cfg, "summary.txt"));

    bool any_decided = false;
    for (const auto& r : reports) {
        any_decided =
            any_decided || r.classification.verdict != LevelVerdict::inconclusive;
    }
    return any_decided ? 0 : 4;
}

int cmd_tables(const std::string& out_dir) {
    const std::string dir = out_dir.empty() ? "." : out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw ConfigError(fmt::format("io: cannot create output directory '{}': {}",
                                      dir, ec.message()));
    }
    const std::string path = (fs::path(dir) / "order_table.csv").string();
    write_order_table_csv(path);
    fmt::print("wrote {} (n <= 4, k <= 5)\n", path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "specprobe: smoothed spectral distributions of -h^2 d^2/dx^2 + V "
        "and the inverse critical-level pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_flag;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "JSON run configuration")
            ->required();
        cmd->add_option("-o,--output-dir", out_flag,
                        "override the config's output_dir");
    };

    auto* c_spectrum = app.add_subcommand(
        "spectrum", "eigenvalues of one operator in the energy window");
    auto* c_scan = app.add_subcommand(
        "scan", "|Y(E)| profile over the window at fixed h");
    auto* c_sweep = app.add_subcommand(
        "sweep", "Y(E, h) along the h ladder at one energy, with the power-log fit");
    auto* c_detect = app.add_subcommand(
        "detect", "classify energy levels as regular or critical");
    auto* c_density = app.add_subcommand(
        "density", "recover the linearized return density near a critical point");
    auto* c_invert = app.add_subcommand(
        "invert", "full local inversion at each critical level");
    for (CLI::App* cmd : {c_spectrum, c_scan, c_sweep, c_detect, c_density, c_invert}) {
        add_common(cmd);
    }
    auto* c_tables = app.add_subcommand(
        "tables", "write the (n, k) critical-order exponent table");
    c_tables->add_option("-o,--output-dir", out_flag, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // help/version exit clean, bad usage is a config error
    }

    try {
        if (c_tables->parsed()) return cmd_tables(out_flag);

        RunConfig cfg = load_run_config(config_path);
        if (!out_flag.empty()) cfg.output_dir = out_flag;
        std::error_code ec;
        fs::create_directories(cfg.output_dir, ec);
        if (ec) {
            throw ConfigError(fmt::format(
                "io: cannot create output directory '{}': {}", cfg.output_dir,
                ec.message()));
        }

        if (c_spectrum->parsed()) return cmd_spectrum(cfg);
        if (c_scan->parsed()) return cmd_scan(cfg);
        if (c_sweep->parsed()) return cmd_sweep(cfg);
        if (c_detect->parsed()) return cmd_detect(cfg);
        if (c_density->parsed()) return cmd_density(cfg);
        if (c_invert->parsed()) return cmd_invert(cfg);
        return 0;
    } catch (const ConfigError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch (const SolverError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: unexpected failure: {}\n", e.what());
        return 3;
    }
}
