#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nucspin/config.hpp"
#include "nucspin/experiments.hpp"
#include "nucspin/io.hpp"
#include "nucspin/version.hpp"

namespace nucspin {

using ordered_json = nlohmann::ordered_json;

// --- grid construction from config ------------------------------------------

inline std::vector<double> linspace(double lo, double hi, long n) {
    std::vector<double> out;
    out.reserve(n);
    for (long i = 0; i < n; ++i) {
        out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return out;
}

inline std::vector<double> rabi_grid(const Config& c) {
    const double span = c.rabi_periods * kTwoPi / c.apparatus.rabi_freq;
    return linspace(0.0, span, c.rabi_points);
}

inline std::vector<double> ramsey_grid(const Config& c) {
    const double span = c.ramsey_periods * kTwoPi / c.apparatus.relax.larmor;
    return linspace(0.0, span, c.ramsey_points);
}

inline std::vector<double> t1_grid(const Config& c) { return linspace(0.0, c.t1_t_max, c.t1_points); }

// Trapping times snap to multiples of the Larmor period so every local fringe
// starts at the same precession phase.
inline std::vector<double> t2_trap_grid(const Config& c) {
    const double period = kTwoPi / c.apparatus.relax.larmor;
    std::vector<double> out;
    double prev = -1.0;
    for (long k = 0; k < c.t2_traps; ++k) {
        const double raw =
            c.t2_trap_max * static_cast<double>(k) / static_cast<double>(c.t2_traps - 1);
        const double snapped = std::round(raw / period) * period;
        if (snapped > prev) {
            out.push_back(snapped);
            prev = snapped;
        }
    }
    return out;
}

// --- provenance and report assembly ------------------------------------------

inline ordered_json provenance_json(const Config& cfg) {
    ordered_json versions;
    versions["nucspin"] = std::string(kVersion);
    for (const auto& [name, ver] : kModuleVersions) {
        versions[std::string(name)] = std::string(ver);
    }
    ordered_json p;
    p["config_hash"] = hex64(fnv1a64(render_config(cfg)));
    p["seed"] = cfg.seed;
    p["mode"] = cfg.mode == Mode::sampled ? "sampled" : "analytic";
    p["versions"] = versions;
    return p;
}

inline ordered_json fit_json(const FitResult& fit) {
    ordered_json j;
    ordered_json params, errors;
    for (std::size_t i = 0; i < fit.names.size(); ++i) {
        params[fit.names[i]] = fit.params[i];
        if (!fit.std_errors.empty()) errors[fit.names[i]] = fit.std_errors[i];
    }
    j["params"] = params;
    j["std_errors"] = fit.std_errors.empty() ? ordered_json(nullptr) : errors;
    j["residual_norm"] = fit.residual_norm;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["singular"] = fit.singular;
    return j;
}

struct CommandOutput {
    std::optional<std::string> csv;
    std::optional<std::string> json;
    std::string summary;
};

inline CommandOutput make_rabi_output(const Config& cfg) {
    const RabiRun run = run_rabi(cfg.apparatus, rabi_grid(cfg), cfg.rabi_shots, cfg.seed,
                                 static_cast<int>(cfg.rabi_atoms), cfg.mode);
    CsvTable csv;
    csv.header = {"t", "click_fraction", "clicks", "shots"};
    for (const ExperimentPoint& p : run.curve) {
        csv.rows.push_back({p.x, p.fraction, static_cast<double>(p.clicks),
                            static_cast<double>(p.shots)});
    }
    ordered_json j;
    j["command"] = "rabi";
    j["provenance"] = provenance_json(cfg);
    ordered_json res;
    res["n_atoms"] = run.n_atoms;
    res["visibility"] = run.visibility;
    res["visibility_saturated"] = run.visibility_saturated;
    res["fit"] = run.has_fit ? fit_json(run.fit) : ordered_json(nullptr);
    j["results"] = res;
    CommandOutput out;
    out.csv = csv.to_string();
    out.json = j.dump(2) + "\n";
    out.summary = "rabi: visibility = " + format_sig12(run.visibility);
    return out;
}

inline CommandOutput make_ramsey_output(const Config& cfg) {
    const RamseyRun run =
        run_ramsey(cfg.apparatus, ramsey_grid(cfg), cfg.ramsey_shots, cfg.seed, cfg.mode);
    CsvTable csv;
    csv.header = {"delay", "click_fraction", "clicks", "shots"};
    for (const ExperimentPoint& p : run.curve) {
        csv.rows.push_back({p.x, p.fraction, static_cast<double>(p.clicks),
                            static_cast<double>(p.shots)});
    }
    ordered_json j;
    j["command"] = "ramsey";
    j["provenance"] = provenance_json(cfg);
    ordered_json res;
    res["visibility"] = run.visibility;
    res["visibility_saturated"] = run.visibility_saturated;
    res["fringe_freq_rad_s"] = run.fringe_freq;
    res["fit"] = run.has_fit ? fit_json(run.fit) : ordered_json(nullptr);
    j["results"] = res;
    CommandOutput out;
    out.csv = csv.to_string();
    out.json = j.dump(2) + "\n";
    out.summary = "ramsey: visibility = " + format_sig12(run.visibility) +
                  ", fringe = " + format_sig12(run.fringe_freq / kTwoPi) + " Hz";
    return out;
}

inline ordered_json bloch_json(const Vec3& r) { return ordered_json{r.x, r.y, r.z}; }

inline CommandOutput make_tomo_output(const Config& cfg) {
    TomographyOptions opts;
    opts.mode = cfg.tomo_likelihood;
    opts.n_resamples = cfg.tomo_resamples;
    const StatePrepTomography rec = run_state_prep_tomography(
        cfg.apparatus, cfg.tomo_state, cfg.tomo_shots_per_basis, cfg.seed, cfg.mode, opts);
    ordered_json j;
    j["command"] = "tomo";
    j["provenance"] = provenance_json(cfg);
    ordered_json res;
    res["state"] = std::string(1, rec.state_id);
    res["likelihood_mode"] =
        cfg.tomo_likelihood == LikelihoodMode::raw ? "raw" : "unfolded";
    res["target_bloch"] = bloch_json(rec.target.bloch());
    res["prepared_bloch"] = bloch_json(rec.prepared.bloch());
    ordered_json records = ordered_json::array();
    for (const MeasurementRecord& r : rec.records) {
        ordered_json rj;
        rj["basis"] = basis_name(r.basis);
        rj["shots"] = r.shots;
        rj["clicks"] = r.clicks;
        records.push_back(rj);
    }
    res["records"] = records;
    ordered_json lin;
    lin["bloch"] = bloch_json(rec.tomo.linear.r);
    lin["physical"] = rec.tomo.linear.physical;
    res["linear_inversion"] = lin;
    ordered_json mle;
    mle["bloch"] = bloch_json(rec.tomo.rho_mle.bloch());
    mle["log_likelihood"] = rec.tomo.log_likelihood;
    mle["converged"] = rec.tomo.mle_converged;
    mle["iterations"] = rec.tomo.mle_iterations;
    res["mle"] = mle;
    res["purity"] = rec.tomo.purity;
    res["fidelity"] = rec.tomo.fidelity;
    res["sigma_purity"] = rec.tomo.sigma_purity;
    res["sigma_fidelity"] = rec.tomo.sigma_fidelity;
    res["n_resamples"] = rec.tomo.n_resamples;
    res["bootstrap_skips"] = rec.tomo.bootstrap_skips;
    j["results"] = res;
    CommandOutput out;
    out.json = j.dump(2) + "\n";
    out.summary = "tomo(" + std::string(1, rec.state_id) +
                  "): purity = " + format_sig12(rec.tomo.purity) + " +- " +
                  format_sig12(rec.tomo.sigma_purity) +
                  ", fidelity = " + format_sig12(rec.tomo.fidelity) + " +- " +
                  format_sig12(rec.tomo.sigma_fidelity);
    return out;
}

inline CommandOutput make_t1_output(const Config& cfg) {
    const T1Run run = run_t1(cfg.apparatus, t1_grid(cfg), cfg.t1_shots, cfg.seed, cfg.mode);
    CsvTable csv;
    csv.header = {"t", "down_fraction", "up_fraction", "survival", "normalized"};
    for (std::size_t i = 0; i < run.down_run.size(); ++i) {
        const double total = run.down_run[i].fraction + run.up_run[i].fraction;
        const double normalized =
            total > 0.0 ? run.down_run[i].fraction / total : std::nan("");
        csv.rows.push_back({run.down_run[i].x, run.down_run[i].fraction, run.up_run[i].fraction,
                            total, normalized});
    }
    ordered_json j;
    j["command"] = "t1";
    j["provenance"] = provenance_json(cfg);
    ordered_json res;
    res["lifetime"] = run.lifetime;
    res["lifetime_fit"] = fit_json(run.lifetime_fit);
    res["t1"] = run.t1;
    res["t1_identifiable"] = run.t1_identifiable;
    res["t1_fit"] = fit_json(run.t1_fit);
    j["results"] = res;
    CommandOutput out;
    out.csv = csv.to_string();
    out.json = j.dump(2) + "\n";
    out.summary =
        "t1: lifetime = " + format_sig12(run.lifetime) + " s, T1 = " + format_sig12(run.t1) + " s";
    return out;
}

inline CommandOutput make_t2_output(const Config& cfg) {
    const T2Run run = run_t2(cfg.apparatus, t2_trap_grid(cfg), cfg.t2_shots, cfg.seed, cfg.mode,
                             static_cast<int>(cfg.t2_fringe_points), cfg.t2_fringe_periods);
    CsvTable csv;
    csv.header = {"trap_time", "visibility"};
    for (const ExperimentPoint& p : run.visibility_curve) {
        csv.rows.push_back({p.x, p.fraction});
    }
    ordered_json j;
    j["command"] = "t2";
    j["provenance"] = provenance_json(cfg);
    ordered_json res;
    res["t2"] = run.t2;
    res["t2_fit"] = fit_json(run.t2_fit);
    ordered_json fringes = ordered_json::array();
    for (const T2Run::Fringe& f : run.fringes) {
        ordered_json fj;
        fj["trap_time"] = f.trap_time;
        fj["visibility"] = f.visibility;
        fj["fit"] = fit_json(f.fit);
        fringes.push_back(fj);
    }
    res["fringes"] = fringes;
    j["results"] = res;
    CommandOutput out;
    out.csv = csv.to_string();
    out.json = j.dump(2) + "\n";
    out.summary = "t2: T2 = " + format_sig12(run.t2) + " s";
    return out;
}

inline CommandOutput make_transport_output(const Config& cfg) {
    const std::vector<TransportPoint> traj =
        transport_profile(cfg.apparatus.lattice, static_cast<int>(cfg.transport_points));
    CsvTable csv;
    csv.header = {"t", "delta", "velocity", "position"};
    for (const TransportPoint& p : traj) {
        csv.rows.push_back({p.t, p.delta, p.velocity, p.position});
    }
    CommandOutput out;
    out.csv = csv.to_string();
    out.summary = "transport: displacement = " +
                  format_sig12(transport_total_displacement(cfg.apparatus.lattice) * 1e3) +
                  " mm, peak velocity = " +
                  format_sig12(transport_peak_velocity(cfg.apparatus.lattice)) + " m/s";
    return out;
}

// Closed-form derived quantities from the configured apparatus.
inline CommandOutput make_report_output(const Config& cfg) {
    const ApparatusParams& a = cfg.apparatus;
    const double linewidth = cavity_enhanced_linewidth(a.cavity);
    const double eta = detection_efficiency(a.readout);
    ReadoutParams both_sides = a.readout;
    both_sides.p_det = std::min(2.0 * a.readout.p_det, 1.0);
    const double t1 = a.relax.gamma_p > 0 ? 1.0 / a.relax.gamma_p : 0.0;
    ordered_json j;
    j["command"] = "report";
    j["provenance"] = provenance_json(cfg);
    ordered_json res;
    res["cavity_enhanced_linewidth_rad_s"] = linewidth;
    res["cavity_enhanced_linewidth_hz"] = linewidth / kTwoPi;
    res["detection_efficiency"] = eta;
    res["detection_efficiency_both_sides"] = detection_efficiency(both_sides);
    res["t1_from_gamma_p"] = t1;
    res["t2_from_rates"] = t1 > 0.0 ? t2_relation(t1, a.relax.gamma_m) : 0.0;
    res["operation_budget"] =
        t1 > 0.0 ? operation_budget(t2_relation(t1, a.relax.gamma_m), a.readout.window) : 0.0;
    res["transport_peak_velocity_m_s"] = transport_peak_velocity(a.lattice);
    res["transport_total_displacement_m"] = transport_total_displacement(a.lattice);
    const auto warning = a.state_selectivity_warning();
    res["state_selectivity_warning"] = warning ? ordered_json(*warning) : ordered_json(nullptr);
    j["results"] = res;
    CommandOutput out;
    out.json = j.dump(2) + "\n";
    out.summary = "report: linewidth/2pi = " + format_sig12(linewidth / kTwoPi) +
                  " Hz, readout efficiency = " + format_sig12(eta);
    return out;
}

inline CommandOutput make_command_output(const std::string& command, const Config& cfg) {
    if (command == "rabi") return make_rabi_output(cfg);
    if (command == "ramsey") return make_ramsey_output(cfg);
    if (command == "tomo") return make_tomo_output(cfg);
    if (command == "t1") return make_t1_output(cfg);
    if (command == "t2") return make_t2_output(cfg);
    if (command == "transport") return make_transport_output(cfg);
    if (command == "report") return make_report_output(cfg);
    throw std::invalid_argument("unknown command '" + command + "'");
}

// Runs a command and writes <prefix>.csv / <prefix>.json next to the caller.
// Nonzero exit with a single machine-readable JSON error line on failure.
inline int dispatch(const std::string& command, const Config& cfg, std::ostream& out,
                    std::ostream& err) {
    try {
        const auto warning = cfg.apparatus.state_selectivity_warning();
        if (warning) err << "warning: " << *warning << "\n";
        const CommandOutput result = make_command_output(command, cfg);
        const std::string prefix = cfg.out.empty() ? command : cfg.out;
        if (result.csv) {
            std::ofstream f(prefix + ".csv", std::ios::binary);
            if (!f) throw std::runtime_error("cannot open " + prefix + ".csv for writing");
            f << *result.csv;
            out << "wrote " << prefix << ".csv\n";
        }
        if (result.json) {
            std::ofstream f(prefix + ".json", std::ios::binary);
            if (!f) throw std::runtime_error("cannot open " + prefix + ".json for writing");
            f << *result.json;
            out << "wrote " << prefix << ".json\n";
        }
        out << result.summary << "\n";
        return 0;
    } catch (const std::exception& e) {
        ordered_json ej;
        ej["error"] = e.what();
        err << ej.dump() << "\n";
        return 1;
    }
}

}  // namespace nucspin
