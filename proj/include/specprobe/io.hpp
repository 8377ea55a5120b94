#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specprobe/classical.hpp"
#include "specprobe/detector.hpp"
#include "specprobe/potential.hpp"
#include "specprobe/quantum1d.hpp"
#include "specprobe/specdist.hpp"
#include "specprobe/testfn.hpp"

namespace specprobe {

/// Parsed and validated batch-run configuration. Every command reads the
/// shared sections (potential, window, kernel, h ladder) plus its own
/// options block; parsing rejects unknown shapes with the offending field
/// named, so a bad config never reaches the solvers.
struct RunConfig {
    PotentialPtr potential;       // null only when the command needs none
    std::string potential_label;  // e.g. "harmonic(c=1)"

    double e1 = 0.0;
    double e2 = 0.0;
    double eps = -1.0;  // negative selects the 0.1 (e2 - e1) default

    std::optional<TestFunction> kernel;
    std::string kernel_label;

    std::vector<double> h_list;  // empty selects default_h_list()
    int jobs = 1;

    // quantum solver overrides, spectrum command only (0 = automatic)
    double solver_box = 0.0;
    int solver_grid = 0;

    double spectrum_h = 0.0;  // spectrum command
    double scan_h = 0.0;      // scan command
    int scan_points = 0;

    bool has_sweep_energy = false;
    double sweep_energy = 0.0;

    std::vector<double> levels;  // detect / invert; empty = find them
    bool weak_mode = false;
    int hessian_centers = 16;
    double band_halfwidth = 0.0;

    double density_z0 = 0.0;
    double density_level = 0.0;
    std::vector<double> density_centers;

    std::string output_dir = ".";

    std::string config_text;  // raw bytes, hashed for provenance
    std::string config_hash;  // fnv1a64 of config_text, hex
};

/// Parse a JSON config. Throws ConfigError naming the violated field.
RunConfig parse_run_config(const std::string& json_text);

/// Read, hash, and parse a config file.
RunConfig load_run_config(const std::string& path);

/// Detector parameters assembled from the shared config sections.
DetectorParams detector_params(const RunConfig& cfg);

// --- data files -----------------------------------------------------------
// All writers emit '#'-prefixed provenance comments (config hash, solver
// settings, bounds) followed by a header row and %.17g numbers; no
// timestamps, so identical inputs give bit-identical files.

void write_spectrum_csv(const std::string& path, const Spectrum& spec,
                        const RunConfig& cfg);
void write_spectrum_json(const std::string& path, const Spectrum& spec,
                         const RunConfig& cfg);

void write_sweep_csv(const std::string& path, const SweepResult& sweep,
                     const RunConfig& cfg);
void write_sweep_json(const std::string& path, const SweepResult& sweep,
                      const FitResult* fit, const RunConfig& cfg);

void write_scan_csv(const std::string& path, const std::vector<ScanPoint>& scan,
                    const RunConfig& cfg, const std::string& warning = "");

/// Trajectory table (t, x, xi, energy, det monodromy); the flow must carry
/// monodromy data.
void write_flow_csv(const std::string& path, const FlowResult& flow,
                    const Potential& pot);

/// Critical-point order table over n = 1..n_max, k = 1..k_max.
void write_order_table_csv(const std::string& path, int n_max = 4,
                           int k_max = 5);

void write_report_json(const std::string& path,
                       const std::vector<CriticalReport>& reports,
                       const RunConfig& cfg);

/// Fixed-width human-readable rendering of one report.
std::string report_summary(const CriticalReport& rep);

// --- plot scripts ----------------------------------------------------------
// Plain gnuplot text referring to the data file by name; a data file that
// exists but has no rows yields a script with an empty-dataset comment.

/// Log-log |Y| vs h with the tail bound overlaid.
void emit_sweep_plot(const std::string& data_csv, const std::string& script_path);

/// Linear |Y| vs E profile.
void emit_scan_plot(const std::string& data_csv, const std::string& script_path);

}  // namespace specprobe
