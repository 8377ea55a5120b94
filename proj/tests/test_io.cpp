#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "specprobe/classical.hpp"
#include "specprobe/common.hpp"
#include "specprobe/detector.hpp"
#include "specprobe/io.hpp"
#include "specprobe/potential.hpp"
#include "specprobe/quantum1d.hpp"
#include "specprobe/specdist.hpp"
#include "specprobe/testfn.hpp"

using namespace specprobe;

namespace {

namespace fs = std::filesystem;

fs::path io_dir() {
    const fs::path d = fs::temp_directory_path() / "specprobe_io_suite";
    fs::create_directories(d);
    return d;
}

std::string opath(const char* name) { return (io_dir() / name).string(); }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Rows past the comment block and the header line.
int data_rows(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    bool header_seen = false;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        ++rows;
    }
    return rows;
}

bool contains(const std::string& text, const std::string& needle) {
    return text.find(needle) != std::string::npos;
}

std::string config_error_of(const std::string& json_text) {
    try {
        parse_run_config(json_text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

const char* kFullConfig = R"({
  "potential": {"type": "pure_power", "k": 2, "c": 1.5, "box": 4.0},
  "window": {"e1": 0.2, "e2": 1.2, "eps": 0.05},
  "test_function": {"j0": 1, "support": [0.1, 2.0], "mode": "one_sided"},
  "h_list": {"from": 0.05, "to": 0.005, "points": 10},
  "jobs": 3,
  "solver": {"box": 5.0, "n_grid": 2000},
  "spectrum": {"h": 0.02},
  "scan": {"h": 0.03, "points": 40},
  "sweep": {"energy": 0.7},
  "detect": {"levels": [0.0, 1.0]},
  "detector": {"weak_mode": true, "hessian_centers": 20, "band_halfwidth": 0.6},
  "density": {"z0": 0.5, "level": 0.25, "centers": [0.8, 1.0]},
  "output_dir": "some/dir"
})";

RunConfig tiny_cfg() {
    return parse_run_config(
        R"({"potential": {"type": "harmonic"}, "window": {"e1": 0.0, "e2": 1.0}})");
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("full config parses into every field") {
    const RunConfig cfg = parse_run_config(kFullConfig);

    REQUIRE(cfg.potential != nullptr);
    CHECK(cfg.potential_label == "pure_power(k=2,c=1.5)");
    CHECK(cfg.e1 == doctest::Approx(0.2));
    CHECK(cfg.e2 == doctest::Approx(1.2));
    CHECK(cfg.eps == doctest::Approx(0.05));

    REQUIRE(cfg.kernel.has_value());
    CHECK(cfg.kernel->support_lo() == doctest::Approx(0.1));
    CHECK(cfg.kernel->support_hi() == doctest::Approx(2.0));
    CHECK(contains(cfg.kernel_label, "one_sided"));

    REQUIRE(cfg.h_list.size() == 10);
    CHECK(cfg.h_list.front() == doctest::Approx(0.05));
    CHECK(cfg.h_list.back() == doctest::Approx(0.005));
    for (size_t i = 1; i < cfg.h_list.size(); ++i) {
        CHECK(cfg.h_list[i] < cfg.h_list[i - 1]);  // strictly decreasing ladder
    }

    CHECK(cfg.jobs == 3);
    CHECK(cfg.solver_box == doctest::Approx(5.0));
    CHECK(cfg.solver_grid == 2000);
    CHECK(cfg.spectrum_h == doctest::Approx(0.02));
    CHECK(cfg.scan_h == doctest::Approx(0.03));
    CHECK(cfg.scan_points == 40);
    CHECK(cfg.has_sweep_energy);
    CHECK(cfg.sweep_energy == doctest::Approx(0.7));
    REQUIRE(cfg.levels.size() == 2);
    CHECK(cfg.levels[0] == doctest::Approx(0.0));
    CHECK(cfg.levels[1] == doctest::Approx(1.0));
    CHECK(cfg.weak_mode);
    CHECK(cfg.hessian_centers == 20);
    CHECK(cfg.band_halfwidth == doctest::Approx(0.6));
    CHECK(cfg.density_z0 == doctest::Approx(0.5));
    CHECK(cfg.density_level == doctest::Approx(0.25));
    REQUIRE(cfg.density_centers.size() == 2);
    CHECK(cfg.output_dir == "some/dir");

    CHECK(cfg.config_text == kFullConfig);
    CHECK(cfg.config_hash == fnv1a64_hex(kFullConfig));
}

TEST_CASE("defaults fill omitted sections") {
    const RunConfig cfg = tiny_cfg();
    CHECK(cfg.eps == doctest::Approx(-1.0));
    CHECK_FALSE(cfg.kernel.has_value());
    CHECK(cfg.h_list.empty());
    CHECK(cfg.jobs == 1);
    CHECK(cfg.spectrum_h == 0.0);
    CHECK_FALSE(cfg.has_sweep_energy);
    CHECK(cfg.levels.empty());
    CHECK_FALSE(cfg.weak_mode);
    CHECK(cfg.hessian_centers == 16);
    CHECK(cfg.output_dir == ".");
}

TEST_CASE("invert levels land in the shared field") {
    const RunConfig cfg = parse_run_config(
        R"({"potential": {"type": "double_well"}, "window": {"e1": -0.2, "e2": 1.4},
            "invert": {"levels": [1.0]}})");
    REQUIRE(cfg.levels.size() == 1);
    CHECK(cfg.levels[0] == doctest::Approx(1.0));
}

TEST_CASE("h_list accepts an explicit array") {
    const RunConfig cfg = parse_run_config(
        R"({"potential": {"type": "harmonic"}, "window": {"e1": 0.0, "e2": 1.0},
            "h_list": [0.05, 0.03, 0.02]})");
    REQUIRE(cfg.h_list.size() == 3);
    CHECK(cfg.h_list[1] == doctest::Approx(0.03));
}

TEST_CASE("rejected configs name the offending field") {
    CHECK(contains(config_error_of("not json at all"), "not valid JSON"));
    CHECK(contains(config_error_of("[1, 2]"), "top level must be an object"));
    CHECK(contains(config_error_of(
                       R"({"potential": {"type": "harmonic"},
                           "window": {"e1": 0.0, "e2": 1.0}, "spectrun": {}})"),
                   "unknown key 'spectrun'"));
    CHECK(contains(config_error_of(R"({"window": {"e1": 0.0, "e2": 1.0}})"),
                   "missing required key 'potential'"));
    CHECK(contains(config_error_of(R"({"potential": {"type": "harmonic"},
                                       "window": {"e1": 0.5}})"),
                   "missing required key 'e2'"));
    CHECK(contains(config_error_of(R"({"potential": {"type": "harmonic"},
                                       "window": {"e1": 1.0, "e2": 0.5}})"),
                   "need e1 < e2"));
    CHECK(contains(config_error_of(R"({"potential": {"type": "mexican_hat"},
                                       "window": {"e1": 0.0, "e2": 1.0}})"),
                   "unknown type"));
    CHECK(contains(config_error_of(R"({"potential": {"type": "pure_power"},
                                       "window": {"e1": 0.0, "e2": 1.0}})"),
                   "k >= 1"));
    CHECK(contains(config_error_of(R"({"potential": {"type": "polynomial",
                                                     "coeffs": [0, 0, 1]},
                                       "window": {"e1": 0.0, "e2": 1.0}})"),
                   "box > 0"));
}

TEST_CASE("kernel and ladder validation") {
    const char* base = R"({"potential": {"type": "harmonic"},
                           "window": {"e1": 0.0, "e2": 1.0},)";
    auto with = [&](const char* tail) { return std::string(base) + tail; };

    CHECK(contains(config_error_of(with(
              R"("test_function": {"j0": 0, "support": [0.1, 2.0], "mode": "flat"}})")),
          "'symmetric' or 'one_sided'"));
    CHECK(contains(config_error_of(with(
              R"("test_function": {"j0": 0, "support": [0.1], "mode": "symmetric"}})")),
          "[lo, hi]"));
    // geometry errors from the kernel factory surface as config errors
    CHECK(contains(config_error_of(with(
              R"("test_function": {"j0": 0, "support": [-1.0, 1.0], "mode": "one_sided"}})")),
          "test_function"));
    CHECK(contains(config_error_of(with(R"("h_list": [0.05]})")), "at least two"));
    CHECK(contains(config_error_of(with(
              R"("h_list": {"from": 0.005, "to": 0.05, "points": 6}})")),
          "0 < to < from < 1"));
    CHECK(contains(config_error_of(with(
              R"("h_list": {"from": 0.05, "to": 0.005, "points": 1}})")),
          "points >= 2"));
    CHECK(contains(config_error_of(with(R"("jobs": 0})")), "jobs >= 1"));
    CHECK(contains(config_error_of(with(R"("spectrum": {"h": 1.5}})")), "0 < h < 1"));
    CHECK(contains(config_error_of(with(R"("scan": {"h": 0.05, "points": 1}})")),
                   "points >= 2"));
    CHECK(contains(config_error_of(with(R"("detector": {"hessian_centers": -1}})")),
                   ">= 0"));
    CHECK(contains(config_error_of(with(R"("density": {"centers": []}})")),
                   "at least one"));
    CHECK(contains(config_error_of(with(R"("detect": {"level": [0.0]}})")),
                   "unknown key 'level'"));
    CHECK(contains(config_error_of(with(R"("output_dir": 3})")), "expected a string"));
}

TEST_CASE("load_run_config reports unreadable paths") {
    CHECK_THROWS_AS(load_run_config((io_dir() / "no_such_config.json").string()),
                    ConfigError);
}

TEST_CASE("detector params mirror the config") {
    const RunConfig cfg = parse_run_config(kFullConfig);
    const DetectorParams dp = detector_params(cfg);
    CHECK(dp.h_list.size() == cfg.h_list.size());
    CHECK(dp.eps == doctest::Approx(cfg.eps));
    CHECK(dp.jobs == 3);
    CHECK(dp.weak_mode);
    CHECK(dp.hessian_centers == 20);
    CHECK(dp.band_halfwidth == doctest::Approx(0.6));
}

TEST_CASE("spectrum table carries provenance and full precision") {
    Spectrum spec;
    spec.h = 0.1;
    spec.box = 2.0;
    spec.n_grid = 101;
    spec.window_lo = 0.0;
    spec.window_hi = 1.0;
    spec.eigenvalues = {0.1, 0.3};
    spec.convergence = {1e-9, 2e-9};

    const RunConfig cfg = tiny_cfg();
    write_spectrum_csv(opath("spec.csv"), spec, cfg);
    const std::string text = slurp(opath("spec.csv"));

    CHECK(text.rfind("# specprobe spectrum\n", 0) == 0);
    CHECK(contains(text, "# config_hash=" + cfg.config_hash));
    CHECK(contains(text, "# potential=harmonic(c=1)"));
    CHECK(contains(text, "j,lambda,convergence"));
    CHECK(data_rows(text) == 2);
    // %.17g keeps the doubles bit-exact on read-back
    CHECK(contains(text, "0.10000000000000001"));

    write_spectrum_csv(opath("spec_again.csv"), spec, cfg);
    CHECK(slurp(opath("spec_again.csv")) == text);

    write_spectrum_json(opath("spec.json"), spec, cfg);
    const auto j = nlohmann::json::parse(slurp(opath("spec.json")));
    CHECK(j["kind"] == "spectrum");
    CHECK(j["eigenvalues"].size() == 2);
    CHECK(j["config_hash"] == cfg.config_hash);
}

TEST_CASE("sweep tables mark solver failures as nan rows") {
    SweepResult sweep;
    sweep.E = 0.5;
    sweep.window_lo = 0.0;
    sweep.window_hi = 1.0;
    sweep.tf_note = "test kernel";
    SweepRow good;
    good.h = 0.05;
    good.value = Complex(0.25, -0.1);
    good.tail_bound = 1e-4;
    SweepRow bad;
    bad.h = 0.02;
    bad.error = "solver diverged";
    bad.flagged = true;
    sweep.rows = {good, bad};

    const RunConfig cfg = tiny_cfg();
    write_sweep_csv(opath("sweep.csv"), sweep, cfg);
    const std::string text = slurp(opath("sweep.csv"));
    CHECK(contains(text, "h,re,im,abs,tail_bound"));
    CHECK(contains(text, ",nan,nan,nan,"));
    CHECK(data_rows(text) == 2);

    FitResult fit;
    fit.alpha = -0.25;
    fit.m = 0;
    fit.log_c = 1.0;
    fit.used = 2;
    write_sweep_json(opath("sweep_fit.json"), sweep, &fit, cfg);
    auto j = nlohmann::json::parse(slurp(opath("sweep_fit.json")));
    CHECK(j["fit"]["alpha"] == doctest::Approx(-0.25));
    CHECK(j["rows"].size() == 2);
    CHECK(j["rows"][1]["error"] == "solver diverged");

    write_sweep_json(opath("sweep_nofit.json"), sweep, nullptr, cfg);
    j = nlohmann::json::parse(slurp(opath("sweep_nofit.json")));
    CHECK_FALSE(j.contains("fit"));
}

TEST_CASE("scan table records the no-contrast warning") {
    std::vector<ScanPoint> scan(2);
    scan[0].E = 0.2;
    scan[0].magnitude = 0.5;
    scan[1].E = 0.4;
    scan[1].magnitude = 0.1;
    scan[1].flagged = true;

    const RunConfig cfg = tiny_cfg();
    write_scan_csv(opath("scan_warn.csv"), scan, cfg, "kernel keeps the low moments");
    const std::string warned = slurp(opath("scan_warn.csv"));
    CHECK(contains(warned, "# warning: kernel keeps the low moments"));
    CHECK(contains(warned, "E,re,im,abs,bound,flagged"));
    CHECK(data_rows(warned) == 2);
    CHECK(contains(warned, ",1\n"));  // flagged column

    write_scan_csv(opath("scan_clean.csv"), scan, cfg, "");
    CHECK_FALSE(contains(slurp(opath("scan_clean.csv")), "# warning"));
}

TEST_CASE("flow table reports energy and unit monodromy determinant") {
    PotentialPtr pot = make_harmonic();
    PhasePoint z0{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)};

    const FlowResult bare = integrate_flow(*pot, z0, 1.0, false);
    CHECK_THROWS_AS(write_flow_csv(opath("flow_bad.csv"), bare, *pot), ConfigError);

    const FlowResult flow = integrate_flow(*pot, z0, 1.0, true);
    write_flow_csv(opath("flow.csv"), flow, *pot);
    const std::string text = slurp(opath("flow.csv"));
    CHECK(contains(text, "t,x,xi,energy,det_monodromy"));
    CHECK(data_rows(text) == static_cast<int>(flow.states.size()));

    // last row: energy conserved at V(1) = 1, det of the monodromy at 1
    std::istringstream in(text);
    std::string line, last;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#' && line.find(",") != std::string::npos &&
            line[0] != 't') {
            last = line;
        }
    }
    std::istringstream row(last);
    std::string field;
    std::vector<double> vals;
    while (std::getline(row, field, ',')) vals.push_back(std::stod(field));
    REQUIRE(vals.size() == 5);
    CHECK(vals[3] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(vals[4] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("order table lists every (n, k) case") {
    write_order_table_csv(opath("orders.csv"));
    const std::string text = slurp(opath("orders.csv"));
    CHECK(data_rows(text) == 40);  // n = 1..4, k = 1..5, both extremum types
    CHECK(contains(text, "n,k,type,alpha,m,case"));
    CHECK(contains(text, "1,2,min,-0.25,0,minimum\n"));
    CHECK(contains(text, "1,1,max,0,1,max_log\n"));
    CHECK(contains(text, "2,1,max,0,0,max_even_integer\n"));
    CHECK(contains(text, "2,2,max,-0.5,0,max_generic\n"));
}

TEST_CASE("critical reports round-trip through JSON") {
    CriticalReport full;
    full.e_c = 1.0;
    full.classification.verdict = LevelVerdict::critical;
    full.classification.note = "slow decay";
    full.classification.fit.alpha = -0.25;
    full.classification.fit.used = 12;
    full.alpha = -0.25;
    full.m = 0;
    full.degree.k = 2;
    full.degree.k_real = 1.99;
    full.degree.accepted = true;
    full.type = ExtremumVerdict::maximum;
    full.a_ratio = 2.0;
    full.a_value = 1.19;
    full.calibration = "x^4 reference";
    full.hessian_alphas = {1.0};
    full.hessian_mu = {2.0};
    full.signature_r = 0;
    full.diagnostics = {"one note"};

    CriticalReport empty;
    empty.e_c = 0.5;

    const RunConfig cfg = tiny_cfg();
    write_report_json(opath("report.json"), {full, empty}, cfg);
    const auto j = nlohmann::json::parse(slurp(opath("report.json")));
    REQUIRE(j["reports"].size() == 2);
    CHECK(j["kind"] == "critical_report");
    CHECK(j["reports"][0]["verdict"] == "critical");
    CHECK(j["reports"][0]["degree"]["k"] == 2);
    CHECK(j["reports"][0]["type"] == "maximum");
    CHECK(j["reports"][0]["hessian"]["mu"][0] == doctest::Approx(2.0));
    CHECK(j["reports"][1]["verdict"] == "inconclusive");
    CHECK(j["reports"][1]["hessian"].is_null());

    const std::string summary = report_summary(full);
    CHECK(contains(summary, "critical level report"));
    CHECK(contains(summary, "k = 2"));
    CHECK(contains(summary, "maximum"));
    CHECK(contains(summary, "A = 1.19"));
    CHECK(contains(summary, "signature r = 0"));

    // non-critical reports stop after the classification line
    const std::string short_form = report_summary(empty);
    CHECK(contains(short_form, "inconclusive"));
    CHECK_FALSE(contains(short_form, "degree"));
}

TEST_CASE("plot scripts match their dataset") {
    SweepResult sweep;
    sweep.E = 0.5;
    SweepRow row;
    row.h = 0.05;
    row.value = Complex(0.1, 0.0);
    row.tail_bound = 1e-5;
    sweep.rows = {row};
    const RunConfig cfg = tiny_cfg();
    write_sweep_csv(opath("plot_sweep.csv"), sweep, cfg);
    emit_sweep_plot(opath("plot_sweep.csv"), opath("plot_sweep.gp"));
    const std::string sweep_gp = slurp(opath("plot_sweep.gp"));
    CHECK(contains(sweep_gp, "set logscale xy"));
    CHECK(contains(sweep_gp, "set datafile separator ','"));
    CHECK(contains(sweep_gp, "'plot_sweep.csv' using 1:4"));
    CHECK(contains(sweep_gp, "using 1:5"));  // tail bound overlay

    std::vector<ScanPoint> scan(1);
    scan[0].E = 0.3;
    scan[0].magnitude = 0.2;
    write_scan_csv(opath("plot_scan.csv"), scan, cfg, "");
    emit_scan_plot(opath("plot_scan.csv"), opath("plot_scan.gp"));
    const std::string scan_gp = slurp(opath("plot_scan.gp"));
    CHECK(contains(scan_gp, "'plot_scan.csv' using 1:4"));
    CHECK_FALSE(contains(scan_gp, "logscale"));

    // a data file with no rows yields a script that says so instead of plotting
    write_scan_csv(opath("plot_empty.csv"), {}, cfg, "");
    emit_scan_plot(opath("plot_empty.csv"), opath("plot_empty.gp"));
    const std::string empty_gp = slurp(opath("plot_empty.gp"));
    CHECK(contains(empty_gp, "# empty dataset: no rows in plot_empty.csv"));
    CHECK_FALSE(contains(empty_gp, "plot '"));

    CHECK_THROWS_AS(
        emit_scan_plot((io_dir() / "missing_data.csv").string(), opath("x.gp")),
        ConfigError);
}

}  // TEST_SUITE
