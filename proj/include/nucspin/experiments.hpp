#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nucspin/density_matrix.hpp"
#include "nucspin/fitting.hpp"
#include "nucspin/readout.hpp"
#include "nucspin/rng.hpp"
#include "nucspin/spin_dynamics.hpp"
#include "nucspin/tomography.hpp"

namespace nucspin {

struct LatticeParams {
    double wavelength = 532e-9;        // m
    double delta0 = kTwoPi * 700e3;    // rad/s
    double tau_transport = 0.1;        // s

    void validate() const {
        if (!(wavelength > 0.0)) throw std::invalid_argument("LatticeParams: wavelength <= 0");
        if (delta0 < 0.0) throw std::invalid_argument("LatticeParams: delta0 < 0");
        if (!(tau_transport > 0.0)) {
            throw std::invalid_argument("LatticeParams: tau_transport <= 0");
        }
    }
};

// Every physical rate of the virtual apparatus, defaulted to the values the
// experiments below are calibrated against.
struct ApparatusParams {
    CavityParams cavity{};
    ReadoutParams readout{};
    RelaxationParams relax{2.0, 8.0, kTwoPi * 2.5e3, 0.0};
    double rabi_freq = kPi / (2.0 * 3.2e-3);  // rad/s; pi/2 pulse lasts 3.2 ms
    double delta_e = kTwoPi * 60e6;           // excited-state Zeeman splitting, for validation
    double atom_lifetime = 0.44;              // s
    LatticeParams lattice{};
    double polarization_fidelity = 1.0;

    void validate() const {
        cavity.validate();
        readout.validate();
        relax.validate();
        lattice.validate();
        if (!(rabi_freq > 0.0)) throw std::invalid_argument("ApparatusParams: rabi_freq <= 0");
        if (delta_e < 0.0) throw std::invalid_argument("ApparatusParams: delta_e < 0");
        if (!(atom_lifetime > 0.0)) {
            throw std::invalid_argument("ApparatusParams: atom_lifetime <= 0");
        }
        if (!(polarization_fidelity >= 0.0 && polarization_fidelity <= 1.0)) {
            throw std::invalid_argument("ApparatusParams: polarization_fidelity outside [0, 1]");
        }
    }

    // State-selective readout requires the excited Zeeman splitting to sit far
    // above the cavity-enhanced linewidth.
    std::optional<std::string> state_selectivity_warning() const {
        const double linewidth = cavity_enhanced_linewidth(cavity);
        if (delta_e < 10.0 * linewidth) {
            return "delta_e is not large compared to the cavity-enhanced linewidth; "
                   "readout is not state-selective";
        }
        return std::nullopt;
    }
};

enum class Mode { sampled, analytic };

// One sweep point: fraction is clicks/shots in sampled mode and the exact
// click expectation in analytic mode (clicks/shots left zero).
struct ExperimentPoint {
    double x = 0.0;
    double fraction = 0.0;
    long clicks = 0;
    long shots = 0;
};

namespace detail {

inline Dataset to_dataset(const std::vector<ExperimentPoint>& pts) {
    Dataset d;
    d.t.reserve(pts.size());
    d.y.reserve(pts.size());
    for (const ExperimentPoint& p : pts) {
        d.t.push_back(p.x);
        d.y.push_back(p.fraction);
    }
    return d;
}

inline void require_increasing(std::span<const double> grid, const char* what) {
    if (grid.empty()) throw std::invalid_argument(std::string(what) + ": empty grid");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw std::invalid_argument(std::string(what) + ": grid must be strictly increasing");
        }
    }
}

}  // namespace detail

// --- Rabi ------------------------------------------------------------------

struct RabiRun {
    std::vector<ExperimentPoint> curve;
    FitResult fit;
    bool has_fit = false;
    double visibility = 0.0;
    bool visibility_saturated = false;
    int n_atoms = 1;
    Mode mode = Mode::sampled;
    std::uint64_t seed = 0;
};

// Drive |down> for each t, read out, fit a sinusoid. n_atoms = 2 samples the
// joint click of two independent atoms, which is no longer sinusoidal.
inline RabiRun run_rabi(const ApparatusParams& params, std::span<const double> t_grid, long shots,
                        std::uint64_t seed, int n_atoms = 1, Mode mode = Mode::sampled) {
    params.validate();
    detail::require_increasing(t_grid, "run_rabi");
    if (n_atoms != 1 && n_atoms != 2) throw std::invalid_argument("run_rabi: n_atoms must be 1 or 2");
    if (mode == Mode::sampled && shots < 1) throw std::invalid_argument("run_rabi: shots < 1");

    RabiRun run;
    run.n_atoms = n_atoms;
    run.mode = mode;
    run.seed = seed;
    const DensityMatrix rho0 = initialize_state(params.polarization_fidelity);
    const rng::Stream root = rng::Stream(seed).child(rng::StreamTag::rabi);
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const RFPulse pulse{params.rabi_freq, 0.0, 0.0, t_grid[i]};
        const DensityMatrix rho_t = rf_pulse_propagate(rho0, pulse, params.relax);
        const double p_down = rho_t.population_down();
        ExperimentPoint pt;
        pt.x = t_grid[i];
        if (mode == Mode::analytic) {
            pt.fraction = multi_atom_click_probability(n_atoms, p_down, params.readout);
        } else {
            const rng::Stream point_stream = root.child(i);
            long clicks = 0;
            const double p_multi =
                n_atoms > 1 ? multi_atom_click_probability(n_atoms, p_down, params.readout) : 0.0;
            for (long j = 0; j < shots; ++j) {
                rng::Stream s = point_stream.child(static_cast<std::uint64_t>(j));
                const bool click = (n_atoms == 1)
                                       ? simulate_readout(rho_t, params.readout, s).click
                                       : s.bernoulli(p_multi);
                clicks += click ? 1 : 0;
            }
            pt.clicks = clicks;
            pt.shots = shots;
            pt.fraction = static_cast<double>(clicks) / static_cast<double>(shots);
        }
        run.curve.push_back(pt);
    }
    if (run.curve.size() >= 8) {
        run.fit = fit_sinusoid(detail::to_dataset(run.curve));
        run.has_fit = true;
        const VisibilityResult v = visibility(run.fit);
        run.visibility = v.value;
        run.visibility_saturated = v.saturated;
    }
    return run;
}

// --- Ramsey ----------------------------------------------------------------

struct RamseyRun {
    std::vector<ExperimentPoint> curve;
    FitResult fit;
    bool has_fit = false;
    double visibility = 0.0;
    bool visibility_saturated = false;
    double fringe_freq = 0.0;  // rad/s, from the fit
    Mode mode = Mode::sampled;
    std::uint64_t seed = 0;
};

// pi/2 - delay - pi/2 from |down>; the fringe oscillates at the Larmor rate.
inline RamseyRun run_ramsey(const ApparatusParams& params, std::span<const double> delays,
                            long shots, std::uint64_t seed, Mode mode = Mode::sampled) {
    params.validate();
    detail::require_increasing(delays, "run_ramsey");
    if (mode == Mode::sampled && shots < 1) throw std::invalid_argument("run_ramsey: shots < 1");

    RamseyRun run;
    run.mode = mode;
    run.seed = seed;
    const DensityMatrix rho0 = initialize_state(params.polarization_fidelity);
    const RFPulse half = pi_half_pulse(params.rabi_freq);
    const rng::Stream root = rng::Stream(seed).child(rng::StreamTag::ramsey);
    for (std::size_t i = 0; i < delays.size(); ++i) {
        const PulseSequence seq{half, FreeEvolution{delays[i]}, half};
        const DensityMatrix rho_t = run_sequence(rho0, seq, params.relax);
        ExperimentPoint pt;
        pt.x = delays[i];
        if (mode == Mode::analytic) {
            pt.fraction = click_probability(rho_t.population_down(), params.readout);
        } else {
            const rng::Stream point_stream = root.child(i);
            long clicks = 0;
            for (long j = 0; j < shots; ++j) {
                rng::Stream s = point_stream.child(static_cast<std::uint64_t>(j));
                clicks += simulate_readout(rho_t, params.readout, s).click ? 1 : 0;
            }
            pt.clicks = clicks;
            pt.shots = shots;
            pt.fraction = static_cast<double>(clicks) / static_cast<double>(shots);
        }
        run.curve.push_back(pt);
    }
    if (run.curve.size() >= 8) {
        run.fit = fit_sinusoid(detail::to_dataset(run.curve));
        run.has_fit = true;
        const VisibilityResult v = visibility(run.fit);
        run.visibility = v.value;
        run.visibility_saturated = v.saturated;
        run.fringe_freq = kTwoPi * run.fit.param("f");
    }
    return run;
}

// --- state preparation + tomography ----------------------------------------

struct StatePrepTomography {
    char state_id = 'a';
    DensityMatrix prepared;
    DensityMatrix target;
    std::vector<MeasurementRecord> records;
    TomographyResult tomo;
};

// (a) pi/2 pulse -> (|up>+|down>)/sqrt(2); (b) same plus a quarter-turn Larmor
// delay -> (|up>+i|down>)/sqrt(2); (c) no pulse -> |down>.
inline StatePrepTomography run_state_prep_tomography(const ApparatusParams& params, char state_id,
                                                     long shots_per_basis, std::uint64_t seed,
                                                     Mode mode = Mode::sampled,
                                                     TomographyOptions opts = {}) {
    params.validate();
    if (shots_per_basis < 1) {
        throw std::invalid_argument("run_state_prep_tomography: shots_per_basis < 1");
    }

    StatePrepTomography out;
    out.state_id = state_id;
    const RFPulse prep_pulse = pi_half_pulse(params.rabi_freq, -0.5 * kPi);
    PulseSequence prep;
    switch (state_id) {
        case 'a':
            prep = {prep_pulse};
            out.target = pure_state(0.5 * kPi, 0.0);
            break;
        case 'b': {
            if (!(params.relax.larmor > 0.0)) {
                throw std::invalid_argument("run_state_prep_tomography: state b needs larmor > 0");
            }
            const double quarter_turn = 0.5 * kPi / params.relax.larmor;
            prep = {prep_pulse, FreeEvolution{quarter_turn}};
            out.target = pure_state(0.5 * kPi, 0.5 * kPi);
            break;
        }
        case 'c':
            out.target = pure_state(kPi, 0.0);
            break;
        default:
            throw std::invalid_argument("run_state_prep_tomography: state_id must be a, b or c");
    }
    const DensityMatrix rho0 = initialize_state(params.polarization_fidelity);
    out.prepared = run_sequence(rho0, prep, params.relax);

    const auto bases = standard_bases(params.rabi_freq);
    const rng::Stream root = rng::Stream(seed).child(rng::StreamTag::tomography);
    for (std::size_t b = 0; b < bases.size(); ++b) {
        const DensityMatrix rho_b = run_sequence(out.prepared, bases[b].prefix, params.relax);
        const double p_click = click_probability(rho_b.population_down(), params.readout);
        MeasurementRecord rec;
        rec.basis = bases[b].label;
        rec.shots = shots_per_basis;
        if (mode == Mode::analytic) {
            rec.clicks = std::lround(p_click * static_cast<double>(shots_per_basis));
        } else {
            const rng::Stream basis_stream = root.child(b);
            long clicks = 0;
            for (long j = 0; j < shots_per_basis; ++j) {
                rng::Stream s = basis_stream.child(static_cast<std::uint64_t>(j));
                clicks += simulate_readout(rho_b, params.readout, s).click ? 1 : 0;
            }
            rec.clicks = clicks;
        }
        out.records.push_back(rec);
    }
    opts.bootstrap_seed = rng::Stream(seed).child(rng::StreamTag::bootstrap).next_u64();
    out.tomo = tomography_report(out.records, params.readout, out.target, opts);
    return out;
}

// --- T1 / lifetime ----------------------------------------------------------

struct T1Run {
    std::vector<ExperimentPoint> down_run;
    std::vector<ExperimentPoint> up_run;
    std::vector<ExperimentPoint> survival;    // summed click fractions
    std::vector<ExperimentPoint> normalized;  // down clicks / (down + up clicks)
    FitResult lifetime_fit;
    FitResult t1_fit;
    double lifetime = 0.0;
    double t1 = 0.0;
    bool t1_identifiable = false;
    Mode mode = Mode::sampled;
    std::uint64_t seed = 0;
};

// Decay runs from |down> and |up> with exponential atom loss. The summed
// click fractions estimate survival (lifetime fit); the population normalized
// by survival decays at gamma_p (offset-exponential fit for T1).
inline T1Run run_t1(const ApparatusParams& params, std::span<const double> times, long shots,
                    std::uint64_t seed, Mode mode = Mode::sampled) {
    params.validate();
    detail::require_increasing(times, "run_t1");
    if (times.size() < 4) throw std::invalid_argument("run_t1: need at least 4 time points");
    if (mode == Mode::sampled && shots < 1) throw std::invalid_argument("run_t1: shots < 1");

    T1Run run;
    run.mode = mode;
    run.seed = seed;
    const DensityMatrix down0 = initialize_state(params.polarization_fidelity);
    const DensityMatrix up0 = apply_rotation(down0, {1.0, 0.0, 0.0}, kPi);
    const rng::Stream root = rng::Stream(seed);
    const rng::Stream down_stream = root.child(rng::StreamTag::t1_down);
    const rng::Stream up_stream = root.child(rng::StreamTag::t1_up);

    auto sample_run = [&](const DensityMatrix& rho_init, const rng::Stream& stream,
                          std::vector<ExperimentPoint>& out_pts) {
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double t = times[i];
            const DensityMatrix rho_t = free_evolve(rho_init, t, params.relax);
            const double survival_prob = std::exp(-t / params.atom_lifetime);
            ExperimentPoint pt;
            pt.x = t;
            if (mode == Mode::analytic) {
                pt.fraction =
                    survival_prob * click_probability(rho_t.population_down(), params.readout);
            } else {
                const rng::Stream point_stream = stream.child(i);
                long clicks = 0;
                for (long j = 0; j < shots; ++j) {
                    rng::Stream s = point_stream.child(static_cast<std::uint64_t>(j));
                    if (!s.bernoulli(survival_prob)) continue;  // atom lost: no click
                    clicks += simulate_readout(rho_t, params.readout, s).click ? 1 : 0;
                }
                pt.clicks = clicks;
                pt.shots = shots;
                pt.fraction = static_cast<double>(clicks) / static_cast<double>(shots);
            }
            out_pts.push_back(pt);
        }
    };
    sample_run(down0, down_stream, run.down_run);
    sample_run(up0, up_stream, run.up_run);

    Dataset survival_data;
    Dataset normalized_data;
    std::vector<double> normalized_shots;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double total = run.down_run[i].fraction + run.up_run[i].fraction;
        run.survival.push_back({times[i], total, run.down_run[i].clicks + run.up_run[i].clicks,
                                run.down_run[i].shots});
        survival_data.t.push_back(times[i]);
        survival_data.y.push_back(total);
        if (total > 0.0) {
            const double frac = run.down_run[i].fraction / total;
            run.normalized.push_back(
                {times[i], frac, run.down_run[i].clicks, run.down_run[i].clicks + run.up_run[i].clicks});
            normalized_data.t.push_back(times[i]);
            normalized_data.y.push_back(frac);
            if (mode == Mode::sampled) {
                normalized_shots.push_back(
                    static_cast<double>(run.down_run[i].clicks + run.up_run[i].clicks));
            }
        }
    }
    run.lifetime_fit = fit_exponential(survival_data, ExponentialVariant::plain);
    run.lifetime = run.lifetime_fit.param("tau");

    if (mode == Mode::sampled) {
        normalized_data.sigma = binomial_sigmas(normalized_data.y, normalized_shots);
    }
    run.t1_fit = fit_exponential(normalized_data, ExponentialVariant::offset);
    run.t1 = run.t1_fit.param("tau");
    run.t1_identifiable = !run.t1_fit.singular && run.t1_fit.converged;
    return run;
}

// --- T2 ----------------------------------------------------------------------

struct T2Run {
    struct Fringe {
        double trap_time = 0.0;
        std::vector<ExperimentPoint> curve;  // x = delay offset from trap_time
        FitResult fit;
        double visibility = 0.0;
    };
    std::vector<Fringe> fringes;
    std::vector<ExperimentPoint> visibility_curve;  // x = trap time, fraction = visibility
    FitResult t2_fit;
    double t2 = 0.0;
    Mode mode = Mode::sampled;
    std::uint64_t seed = 0;
};

// A local Ramsey fringe (fringe_points points over fringe_periods Larmor
// periods) at each trapping time; visibility vs trapping time decays at
// 1/T2 = gamma_p + gamma_m. Fringes are post-selected on atom survival, which
// cancels in the visibility ratio.
inline T2Run run_t2(const ApparatusParams& params, std::span<const double> trap_times, long shots,
                    std::uint64_t seed, Mode mode = Mode::sampled, int fringe_points = 12,
                    double fringe_periods = 5.0) {
    params.validate();
    detail::require_increasing(trap_times, "run_t2");
    if (trap_times.size() < 4) throw std::invalid_argument("run_t2: need at least 4 trap times");
    if (!(params.relax.larmor > 0.0)) throw std::invalid_argument("run_t2: needs larmor > 0");
    if (fringe_points < 8) throw std::invalid_argument("run_t2: need at least 8 fringe points");
    if (!(fringe_periods > 0.0)) throw std::invalid_argument("run_t2: fringe_periods <= 0");
    if (mode == Mode::sampled && shots < 1) throw std::invalid_argument("run_t2: shots < 1");

    T2Run run;
    run.mode = mode;
    run.seed = seed;
    const DensityMatrix rho0 = initialize_state(params.polarization_fidelity);
    const RFPulse half = pi_half_pulse(params.rabi_freq);
    const double larmor_period = kTwoPi / params.relax.larmor;
    const double step = fringe_periods * larmor_period / static_cast<double>(fringe_points);
    const rng::Stream root = rng::Stream(seed).child(rng::StreamTag::t2);

    Dataset vis_data;
    for (std::size_t k = 0; k < trap_times.size(); ++k) {
        T2Run::Fringe fringe;
        fringe.trap_time = trap_times[k];
        const rng::Stream trap_stream = root.child(k);
        for (int j = 0; j < fringe_points; ++j) {
            const double offset = static_cast<double>(j) * step;
            const double delay = trap_times[k] + offset;
            const PulseSequence seq{half, FreeEvolution{delay}, half};
            const DensityMatrix rho_t = run_sequence(rho0, seq, params.relax);
            ExperimentPoint pt;
            pt.x = offset;
            if (mode == Mode::analytic) {
                pt.fraction = click_probability(rho_t.population_down(), params.readout);
            } else {
                const rng::Stream point_stream = trap_stream.child(static_cast<std::uint64_t>(j));
                long clicks = 0;
                for (long s_idx = 0; s_idx < shots; ++s_idx) {
                    rng::Stream s = point_stream.child(static_cast<std::uint64_t>(s_idx));
                    clicks += simulate_readout(rho_t, params.readout, s).click ? 1 : 0;
                }
                pt.clicks = clicks;
                pt.shots = shots;
                pt.fraction = static_cast<double>(clicks) / static_cast<double>(shots);
            }
            fringe.curve.push_back(pt);
        }
        fringe.fit = fit_sinusoid(detail::to_dataset(fringe.curve), params.relax.larmor / kTwoPi);
        fringe.visibility = visibility(fringe.fit).value;
        run.visibility_curve.push_back({trap_times[k], fringe.visibility, 0, 0});
        vis_data.t.push_back(trap_times[k]);
        vis_data.y.push_back(fringe.visibility);
        run.fringes.push_back(std::move(fringe));
    }
    run.t2_fit = fit_exponential(vis_data, ExponentialVariant::plain);
    run.t2 = run.t2_fit.param("tau");
    return run;
}

// --- rate relations and budgets ----------------------------------------------

// 1/T2 = 1/T1 + gamma_m.
inline double t2_relation(double t1, double gamma_m) {
    if (!(t1 > 0.0)) throw std::invalid_argument("t2_relation: T1 must be > 0");
    if (gamma_m < 0.0) throw std::invalid_argument("t2_relation: gamma_m must be >= 0");
    return 1.0 / (1.0 / t1 + gamma_m);
}

inline double gamma_m_from(double t1, double t2) {
    if (!(t1 > 0.0) || !(t2 > 0.0)) throw std::invalid_argument("gamma_m_from: times must be > 0");
    if (t2 > t1) {
        throw std::invalid_argument("gamma_m_from: T2 > T1 implies a negative dephasing rate");
    }
    return 1.0 / t2 - 1.0 / t1;
}

// Coherence time over readout time: the usable operation count.
inline double operation_budget(double t2, double t_readout) {
    if (!(t2 > 0.0) || !(t_readout > 0.0)) {
        throw std::invalid_argument("operation_budget: inputs must be > 0");
    }
    return t2 / t_readout;
}

// --- moving-lattice transport --------------------------------------------------

struct TransportPoint {
    double t = 0.0;         // s
    double delta = 0.0;     // rad/s
    double velocity = 0.0;  // m/s
    double position = 0.0;  // m
};

// delta(t) = delta0 sin(pi t / tau); v = lambda delta / (4 pi); position from
// the closed-form antiderivative.
inline std::vector<TransportPoint> transport_profile(const LatticeParams& lat, int n_points) {
    lat.validate();
    if (n_points < 2) throw std::invalid_argument("transport_profile: need at least 2 points");
    std::vector<TransportPoint> out;
    out.reserve(n_points);
    const double tau = lat.tau_transport;
    for (int i = 0; i < n_points; ++i) {
        const double t = tau * static_cast<double>(i) / static_cast<double>(n_points - 1);
        TransportPoint p;
        p.t = t;
        p.delta = lat.delta0 * std::sin(kPi * t / tau);
        p.velocity = lat.wavelength * p.delta / (4.0 * kPi);
        p.position =
            lat.wavelength * lat.delta0 * tau * (1.0 - std::cos(kPi * t / tau)) / (4.0 * kPi * kPi);
        out.push_back(p);
    }
    return out;
}

inline double transport_peak_velocity(const LatticeParams& lat) {
    lat.validate();
    return lat.wavelength * lat.delta0 / (4.0 * kPi);
}

// x(tau) = lambda delta0 tau / (2 pi^2).
inline double transport_total_displacement(const LatticeParams& lat) {
    lat.validate();
    return lat.wavelength * lat.delta0 * lat.tau_transport / (2.0 * kPi * kPi);
}

}  // namespace nucspin
