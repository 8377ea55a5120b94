#include "specprobe/io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "specprobe/invariants.hpp"

namespace specprobe {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string g17(double v) { return fmt::format("{:.17g}", v); }

[[noreturn]] void bad_field(const std::string& where, const std::string& what) {
    throw ConfigError(fmt::format("config: {}: {}", where, what));
}

const json& need(const json& obj, const std::string& sec, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) bad_field(sec, fmt::format("missing required key '{}'", key));
    return *it;
}

double as_num(const json& v, const std::string& where) {
    if (!v.is_number()) bad_field(where, "expected a number");
    return v.get<double>();
}

double num_or(const json& obj, const std::string& sec, const char* key,
              double fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    return as_num(*it, fmt::format("{}.{}", sec, key));
}

int int_or(const json& obj, const std::string& sec, const char* key, int fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_integer()) {
        bad_field(fmt::format("{}.{}", sec, key), "expected an integer");
    }
    return it->get<int>();
}

bool bool_or(const json& obj, const std::string& sec, const char* key,
             bool fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean()) bad_field(fmt::format("{}.{}", sec, key), "expected a boolean");
    return it->get<bool>();
}

std::vector<double> num_list(const json& v, const std::string& where) {
    if (!v.is_array()) bad_field(where, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(as_num(e, where));
    return out;
}

void reject_unknown(const json& obj, const std::string& sec,
                    std::initializer_list<const char*> known) {
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (item.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) bad_field(sec, fmt::format("unknown key '{}'", item.key()));
    }
}

void build_potential(const json& spec, RunConfig& cfg) {
    if (!spec.is_object()) bad_field("potential", "expected an object");
    const std::string type = need(spec, "potential", "type").get<std::string>();
    if (type == "harmonic") {
        reject_unknown(spec, "potential", {"type", "c", "box"});
        const double c = num_or(spec, "potential", "c", 1.0);
        const double box = num_or(spec, "potential", "box", 6.0);
        cfg.potential = make_harmonic(c, box);
        cfg.potential_label = fmt::format("harmonic(c={:g})", c);
    } else if (type == "pure_power") {
        reject_unknown(spec, "potential", {"type", "k", "c", "box"});
        const int k = int_or(spec, "potential", "k", 0);
        if (k < 1) bad_field("potential.k", "pure_power needs an integer k >= 1");
        const double c = num_or(spec, "potential", "c", 1.0);
        const double box = num_or(spec, "potential", "box", 4.0);
        cfg.potential = make_pure_power(k, c, box);
        cfg.potential_label = fmt::format("pure_power(k={},c={:g})", k, c);
    } else if (type == "double_well") {
        reject_unknown(spec, "potential", {"type", "box"});
        cfg.potential = make_double_well(num_or(spec, "potential", "box", 3.0));
        cfg.potential_label = "double_well";
    } else if (type == "polynomial") {
        reject_unknown(spec, "potential", {"type", "coeffs", "box"});
        auto coeffs = num_list(need(spec, "potential", "coeffs"), "potential.coeffs");
        const double box = num_or(spec, "potential", "box", 0.0);
        if (!(box > 0.0)) bad_field("potential.box", "polynomial needs box > 0");
        cfg.potential = make_polynomial(coeffs, box);
        cfg.potential_label = fmt::format("polynomial(degree={})",
                                          coeffs.empty() ? 0 : coeffs.size() - 1);
    } else {
        bad_field("potential.type",
                  fmt::format("unknown type '{}' (harmonic | pure_power | "
                              "double_well | polynomial)",
                              type));
    }
}

void build_kernel(const json& spec, RunConfig& cfg) {
    if (!spec.is_object()) bad_field("test_function", "expected an object");
    reject_unknown(spec, "test_function", {"j0", "support", "mode"});
    const int j0 = int_or(spec, "test_function", "j0", 0);
    auto supp = num_list(need(spec, "test_function", "support"),
                         "test_function.support");
    if (supp.size() != 2) bad_field("test_function.support", "expected [lo, hi]");
    const std::string mode =
        need(spec, "test_function", "mode").get<std::string>();
    SupportMode sm;
    if (mode == "symmetric") {
        sm = SupportMode::symmetric;
    } else if (mode == "one_sided") {
        sm = SupportMode::one_sided;
    } else {
        bad_field("test_function.mode", "expected 'symmetric' or 'one_sided'");
    }
    try {
        cfg.kernel = make_test_function(j0, supp[0], supp[1], sm);
    } catch (const ConfigError& e) {
        bad_field("test_function", e.what());
    }
    cfg.kernel_label =
        fmt::format("j0={} support=({:g},{:g}) {}", j0, supp[0], supp[1], mode);
}

std::vector<double> build_h_list(const json& spec) {
    if (spec.is_array()) {
        auto hs = num_list(spec, "h_list");
        if (hs.size() < 2) bad_field("h_list", "need at least two h values");
        return hs;
    }
    if (!spec.is_object()) bad_field("h_list", "expected an array or {from, to, points}");
    reject_unknown(spec, "h_list", {"from", "to", "points"});
    const double from = as_num(need(spec, "h_list", "from"), "h_list.from");
    const double to = as_num(need(spec, "h_list", "to"), "h_list.to");
    const int points = int_or(spec, "h_list", "points", 0);
    if (!(0.0 < to && to < from && from < 1.0)) {
        bad_field("h_list", "need 0 < to < from < 1");
    }
    if (points < 2) bad_field("h_list.points", "need points >= 2");
    std::vector<double> hs(static_cast<size_t>(points));
    const double r = std::pow(to / from, 1.0 / (points - 1));
    double x = from;
    for (int i = 0; i < points; ++i, x *= r) hs[static_cast<size_t>(i)] = x;
    hs.back() = to;
    return hs;
}

std::string verdict_text(LevelVerdict v) {
    switch (v) {
        case LevelVerdict::regular: return "regular";
        case LevelVerdict::critical: return "critical";
        default: return "inconclusive";
    }
}

std::string type_text(ExtremumVerdict v) {
    switch (v) {
        case ExtremumVerdict::minimum: return "minimum";
        case ExtremumVerdict::maximum: return "maximum";
        default: return "inconclusive";
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError(fmt::format("io: cannot open '{}' for writing", path));
    return f;
}

void provenance(std::ofstream& f, const RunConfig& cfg, const char* kind) {
    f << "# specprobe " << kind << "\n";
    f << "# config_hash=" << (cfg.config_hash.empty() ? "none" : cfg.config_hash)
      << "\n";
    if (!cfg.potential_label.empty()) f << "# potential=" << cfg.potential_label << "\n";
}

ojson provenance_json(const RunConfig& cfg, const char* kind) {
    ojson j;
    j["kind"] = kind;
    j["config_hash"] = cfg.config_hash.empty() ? "none" : cfg.config_hash;
    if (!cfg.potential_label.empty()) j["potential"] = cfg.potential_label;
    return j;
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

// Data rows in a CSV: lines past the comment block and the header.
int count_data_rows(const std::string& data_csv) {
    std::ifstream in(data_csv);
    if (!in) throw ConfigError(fmt::format("io: data file '{}' not found", data_csv));
    std::string line;
    int rows = 0;
    bool header_seen = false;
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

std::string basename_of(const std::string& path) {
    const auto pos = path.find_last_of('/');
    return pos == std::string::npos ? path : path.substr(pos + 1);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config: not valid JSON: {}", e.what()));
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown(j, "run",
                   {"potential", "window", "test_function", "h_list", "jobs",
                    "solver", "spectrum", "scan", "sweep", "detect", "invert",
                    "detector", "density", "output_dir"});

    RunConfig cfg;
    cfg.config_text = json_text;
    cfg.config_hash = fnv1a64_hex(json_text);

    build_potential(need(j, "run", "potential"), cfg);

    {
        const json& w = need(j, "run", "window");
        if (!w.is_object()) bad_field("window", "expected an object");
        reject_unknown(w, "window", {"e1", "e2", "eps"});
        cfg.e1 = as_num(need(w, "window", "e1"), "window.e1");
        cfg.e2 = as_num(need(w, "window", "e2"), "window.e2");
        cfg.eps = num_or(w, "window", "eps", -1.0);
        if (!(cfg.e1 < cfg.e2)) bad_field("window", "need e1 < e2");
    }

    if (j.contains("test_function")) build_kernel(j["test_function"], cfg);
    if (j.contains("h_list")) cfg.h_list = build_h_list(j["h_list"]);

    cfg.jobs = int_or(j, "run", "jobs", 1);
    if (cfg.jobs < 1) bad_field("jobs", "need jobs >= 1");

    if (j.contains("solver")) {
        const json& s = j["solver"];
        if (!s.is_object()) bad_field("solver", "expected an object");
        reject_unknown(s, "solver", {"box", "n_grid"});
        cfg.solver_box = num_or(s, "solver", "box", 0.0);
        cfg.solver_grid = int_or(s, "solver", "n_grid", 0);
        if (cfg.solver_box < 0.0) bad_field("solver.box", "need box > 0");
        if (cfg.solver_grid < 0) bad_field("solver.n_grid", "need n_grid > 0");
    }

    if (j.contains("spectrum")) {
        const json& s = j["spectrum"];
        if (!s.is_object()) bad_field("spectrum", "expected an object");
        reject_unknown(s, "spectrum", {"h"});
        cfg.spectrum_h = as_num(need(s, "spectrum", "h"), "spectrum.h");
        if (!(cfg.spectrum_h > 0.0 && cfg.spectrum_h < 1.0)) {
            bad_field("spectrum.h", "need 0 < h < 1");
        }
    }

    if (j.contains("scan")) {
        const json& s = j["scan"];
        if (!s.is_object()) bad_field("scan", "expected an object");
        reject_unknown(s, "scan", {"h", "points"});
        cfg.scan_h = as_num(need(s, "scan", "h"), "scan.h");
        if (!(cfg.scan_h > 0.0 && cfg.scan_h < 1.0)) bad_field("scan.h", "need 0 < h < 1");
        cfg.scan_points = int_or(s, "scan", "points", 60);
        if (cfg.scan_points < 2) bad_field("scan.points", "need points >= 2");
    }

    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        if (!s.is_object()) bad_field("sweep", "expected an object");
        reject_unknown(s, "sweep", {"energy"});
        cfg.sweep_energy = as_num(need(s, "sweep", "energy"), "sweep.energy");
        cfg.has_sweep_energy = true;
    }

    auto read_levels = [&](const char* sec) {
        const json& s = j[sec];
        if (!s.is_object()) bad_field(sec, "expected an object");
        reject_unknown(s, sec, {"levels"});
        if (s.contains("levels")) {
            cfg.levels = num_list(s["levels"], fmt::format("{}.levels", sec));
        }
    };
    if (j.contains("detect")) read_levels("detect");
    if (j.contains("invert")) read_levels("invert");

    if (j.contains("detector")) {
        const json& d = j["detector"];
        if (!d.is_object()) bad_field("detector", "expected an object");
        reject_unknown(d, "detector",
                       {"weak_mode", "hessian_centers", "band_halfwidth"});
        cfg.weak_mode = bool_or(d, "detector", "weak_mode", false);
        cfg.hessian_centers = int_or(d, "detector", "hessian_centers", 16);
        cfg.band_halfwidth = num_or(d, "detector", "band_halfwidth", 0.0);
        if (cfg.hessian_centers < 0) bad_field("detector.hessian_centers", "need >= 0");
        if (cfg.band_halfwidth < 0.0) bad_field("detector.band_halfwidth", "need >= 0");
    }

    if (j.contains("density")) {
        const json& d = j["density"];
        if (!d.is_object()) bad_field("density", "expected an object");
        reject_unknown(d, "density", {"z0", "level", "centers"});
        cfg.density_z0 = num_or(d, "density", "z0", 0.0);
        cfg.density_level = num_or(d, "density", "level", 0.0);
        cfg.density_centers =
            num_list(need(d, "density", "centers"), "density.centers");
        if (cfg.density_centers.empty()) bad_field("density.centers", "need at least one");
    }

    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) bad_field("output_dir", "expected a string");
        cfg.output_dir = j["output_dir"].get<std::string>();
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("config: cannot read '{}'", path));
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

DetectorParams detector_params(const RunConfig& cfg) {
    DetectorParams p;
    p.h_list = cfg.h_list;
    p.eps = cfg.eps;
    p.jobs = cfg.jobs;
    p.weak_mode = cfg.weak_mode;
    p.hessian_centers = cfg.hessian_centers;
    p.band_halfwidth = cfg.band_halfwidth;
    return p;
}

void write_spectrum_csv(const std::string& path, const Spectrum& spec,
                        const RunConfig& cfg) {
    auto f = open_out(path);
    provenance(f, cfg, "spectrum");
    f << "# h=" << g17(spec.h) << " box=" << g17(spec.box)
      << " n_grid=" << spec.n_grid << "\n";
    f << "# window=[" << g17(spec.window_lo) << "," << g17(spec.window_hi) << "]\n";
    f << "j,lambda,convergence\n";
    for (size_t i = 0; i < spec.eigenvalues.size(); ++i) {
        f << i << "," << g17(spec.eigenvalues[i]) << ","
          << g17(i < spec.convergence.size() ? spec.convergence[i] : 0.0) << "\n";
    }
}

void write_spectrum_json(const std::string& path, const Spectrum& spec,
                         const RunConfig& cfg) {
    ojson j = provenance_json(cfg, "spectrum");
    j["h"] = spec.h;
    j["box"] = spec.box;
    j["n_grid"] = spec.n_grid;
    j["window"] = {spec.window_lo, spec.window_hi};
    j["eigenvalues"] = spec.eigenvalues;
    j["convergence"] = spec.convergence;
    auto f = open_out(path);
    f << j.dump(2) << "\n";
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep,
                     const RunConfig& cfg) {
    auto f = open_out(path);
    provenance(f, cfg, "sweep");
    f << "# E=" << g17(sweep.E) << " window=[" << g17(sweep.window_lo) << ","
      << g17(sweep.window_hi) << "]\n";
    if (!sweep.tf_note.empty()) f << "# kernel=" << sweep.tf_note << "\n";
    f << "h,re,im,abs,tail_bound\n";
    for (const auto& r : sweep.rows) {
        if (!r.error.empty()) {
            f << g17(r.h) << ",nan,nan,nan," << g17(r.tail_bound) << "\n";
            continue;
        }
        f << g17(r.h) << "," << g17(r.value.real()) << "," << g17(r.value.imag())
          << "," << g17(std::abs(r.value)) << "," << g17(r.tail_bound) << "\n";
    }
}

void write_sweep_json(const std::string& path, const SweepResult& sweep,
                      const FitResult* fit, const RunConfig& cfg) {
    ojson j = provenance_json(cfg, "sweep");
    j["E"] = sweep.E;
    j["window"] = {sweep.window_lo, sweep.window_hi};
    j["kernel"] = sweep.tf_note;
    ojson rows = ojson::array();
    for (const auto& r : sweep.rows) {
        ojson row;
        row["h"] = r.h;
        row["re"] = r.value.real();
        row["im"] = r.value.imag();
        row["abs"] = std::abs(r.value);
        row["count"] = r.count;
        row["tail_bound"] = r.tail_bound;
        row["noise_bound"] = r.noise_bound;
        row["flagged"] = r.flagged;
        if (!r.error.empty()) row["error"] = r.error;
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    if (fit) j["fit"] = fit_json(*fit);
    auto f = open_out(path);
    f << j.dump(2) << "\n";
}

void write_scan_csv(const std::string& path, const std::vector<ScanPoint>& scan,
                    const RunConfig& cfg, const std::string& warning) {
    auto f = open_out(path);
    provenance(f, cfg, "scan");
    if (!cfg.kernel_label.empty()) f << "# kernel=" << cfg.kernel_label << "\n";
    if (!warning.empty()) f << "# warning: " << warning << "\n";
    f << "E,re,im,abs,bound,flagged\n";
    for (const auto& p : scan) {
        f << g17(p.E) << "," << g17(p.value.real()) << "," << g17(p.value.imag())
          << "," << g17(p.magnitude) << "," << g17(p.bound) << ","
          << (p.flagged ? 1 : 0) << "\n";
    }
}

void write_flow_csv(const std::string& path, const FlowResult& flow,
                    const Potential& pot) {
    if (flow.monodromies.size() != flow.states.size()) {
        throw ConfigError("io: flow export needs monodromy data for every sample");
    }
    auto f = open_out(path);
    f << "# specprobe flow\n";
    f << "# dt=" << g17(flow.dt) << " truncated=" << (flow.truncated ? 1 : 0)
      << "\n";
    f << "t,x,xi,energy,det_monodromy\n";
    for (size_t i = 0; i < flow.states.size(); ++i) {
        const auto& z = flow.states[i];
        const double energy = z.xi.squaredNorm() + pot.value(z.x);
        f << g17(flow.times[i]) << "," << g17(z.x(0)) << "," << g17(z.xi(0)) << ","
          << g17(energy) << "," << g17(flow.monodromies[i].determinant()) << "\n";
    }
}

void write_order_table_csv(const std::string& path, int n_max, int k_max) {
    auto f = open_out(path);
    f << "# specprobe order table\n";
    f << "# |sum| ~ C h^alpha log(1/h)^m at a critical level of degree 2k in "
         "dimension n\n";
    f << "n,k,type,alpha,m,case\n";
    for (const auto& s : singularity_table(n_max, k_max)) {
        const char* tag = "minimum";
        switch (s.tag) {
            case SingularCase::minimum: tag = "minimum"; break;
            case SingularCase::max_generic: tag = "max_generic"; break;
            case SingularCase::max_log: tag = "max_log"; break;
            case SingularCase::max_even_integer: tag = "max_even_integer"; break;
        }
        f << s.n << "," << s.k << ","
          << (s.type == ExtremumType::minimum ? "min" : "max") << ","
          << g17(s.alpha) << "," << s.m << "," << tag << "\n";
    }
}

void write_report_json(const std::string& path,
                       const std::vector<CriticalReport>& reports,
                       const RunConfig& cfg) {
    ojson j = provenance_json(cfg, "critical_report");
    ojson arr = ojson::array();
    for (const auto& rep : reports) {
        ojson r;
        r["e_c"] = rep.e_c;
        r["verdict"] = verdict_text(rep.classification.verdict);
        r["note"] = rep.classification.note;
        r["fit"] = fit_json(rep.classification.fit);
        r["alpha"] = rep.alpha;
        r["m"] = rep.m;
        r["degree"] = {{"k", rep.degree.k},
                       {"k_real", rep.degree.k_real},
                       {"k_sigma", rep.degree.k_sigma},
                       {"accepted", rep.degree.accepted}};
        r["type"] = type_text(rep.type);
        r["a_ratio"] = rep.a_ratio;
        r["a_value"] = rep.a_value;
        r["calibration"] = rep.calibration;
        if (!rep.hessian_alphas.empty()) {
            r["hessian"] = {{"alphas", rep.hessian_alphas},
                            {"mu", rep.hessian_mu},
                            {"signature_r", rep.signature_r}};
        } else {
            r["hessian"] = nullptr;
        }
        r["diagnostics"] = rep.diagnostics;
        arr.push_back(std::move(r));
    }
    j["reports"] = std::move(arr);
    auto f = open_out(path);
    f << j.dump(2) << "\n";
}

std::string report_summary(const CriticalReport& rep) {
    std::string out;
    out += fmt::format("critical level report: E = {:g}\n", rep.e_c);
    out += fmt::format("  classification : {} ({})\n",
                       verdict_text(rep.classification.verdict),
                       rep.classification.note);
    if (rep.classification.verdict != LevelVerdict::critical) return out;
    const FitResult& f = rep.classification.fit;
    out += fmt::format("  order          : alpha = {:+.4f} +- {:.4f}, m = {}\n",
                       rep.alpha, f.alpha_sigma(), rep.m);
    out += fmt::format("  degree         : k = {} (k_real {:.3f}, {})\n",
                       rep.degree.k, rep.degree.k_real,
                       rep.degree.accepted ? "accepted" : "rejected");
    out += fmt::format("  type           : {}\n", type_text(rep.type));
    if (!rep.calibration.empty()) {
        out += fmt::format(
            "  spherical mean : A = {:.4f} (ratio {:.4f} against {})\n",
            rep.a_value, rep.a_ratio, rep.calibration);
    }
    if (!rep.hessian_mu.empty()) {
        std::string mus;
        for (size_t i = 0; i < rep.hessian_mu.size(); ++i) {
            mus += fmt::format("{}{:.4f}", i ? ", " : "", rep.hessian_mu[i]);
        }
        out += fmt::format("  curvature      : mu = [{}], signature r = {}\n", mus,
                           rep.signature_r);
    }
    for (const auto& d : rep.diagnostics) {
        out += fmt::format("  note           : {}\n", d);
    }
    return out;
}

void emit_sweep_plot(const std::string& data_csv, const std::string& script_path) {
    const int rows = count_data_rows(data_csv);
    auto f = open_out(script_path);
    f << "# gnuplot script: log-log sweep profile\n";
    f << "set datafile separator ','\n";
    f << "set datafile commentschars '#'\n";
    f << "set logscale xy\n";
    f << "set xlabel 'h'\n";
    f << "set ylabel '|Y|'\n";
    f << "set key left top\n";
    if (rows == 0) {
        f << "# empty dataset: no rows in " << basename_of(data_csv) << "\n";
        return;
    }
    f << "plot '" << basename_of(data_csv)
      << "' using 1:4 with linespoints title '|Y|', \\\n     '"
      << basename_of(data_csv)
      << "' using 1:5 with lines dashtype 2 title 'tail bound'\n";
}

void emit_scan_plot(const std::string& data_csv, const std::string& script_path) {
    const int rows = count_data_rows(data_csv);
    auto f = open_out(script_path);
    f << "# gnuplot script: energy scan profile\n";
    f << "set datafile separator ','\n";
    f << "set datafile commentschars '#'\n";
    f << "set xlabel 'E'\n";
    f << "set ylabel '|Y|'\n";
    f << "set key left top\n";
    if (rows == 0) {
        f << "# empty dataset: no rows in " << basename_of(data_csv) << "\n";
        return;
    }
    f << "plot '" << basename_of(data_csv)
      << "' using 1:4 with linespoints title '|Y|'\n";
}

}  // namespace specprobe
