#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "nucspin/experiments.hpp"

namespace nucspin {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Full run configuration: apparatus rates plus per-experiment grids. Defaults
// reproduce the reference numbers out of the box.
struct Config {
    ApparatusParams apparatus;

    long rabi_points = 20;
    double rabi_periods = 2.0;
    long rabi_shots = 500;
    long rabi_atoms = 1;

    long ramsey_points = 48;
    double ramsey_periods = 3.0;
    long ramsey_shots = 1000;

    char tomo_state = 'a';
    long tomo_shots_per_basis = 200;
    long tomo_resamples = 1000;
    LikelihoodMode tomo_likelihood = LikelihoodMode::raw;

    long t1_points = 24;
    double t1_t_max = 1.15;
    long t1_shots = 500;

    long t2_traps = 6;
    double t2_trap_max = 0.2;
    long t2_fringe_points = 12;
    double t2_fringe_periods = 5.0;
    long t2_shots = 500;

    long transport_points = 201;

    std::uint64_t seed = 42;
    Mode mode = Mode::sampled;
    std::string out;  // output path prefix; empty means the command name
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] inline void config_fail(int line, const std::string& msg) {
    std::ostringstream os;
    os << "config error (line " << line << "): " << msg;
    throw ConfigError(os.str());
}

// Unit suffixes. Cyclic-frequency units convert to angular rad/s (x 2*pi)
// because every frequency-like field is stored angular; plain rates use /s.
inline double suffix_factor(const std::string& suffix, int line) {
    static const std::map<std::string, double> table = {
        {"Hz", kTwoPi},   {"kHz", kTwoPi * 1e3}, {"MHz", kTwoPi * 1e6},
        {"/s", 1.0},      {"s", 1.0},            {"ms", 1e-3},
        {"us", 1e-6},     {"m", 1.0},            {"mm", 1e-3},
        {"nm", 1e-9},     {"G", 1.0},            {"mG", 1e-3},
    };
    const auto it = table.find(suffix);
    if (it == table.end()) config_fail(line, "unknown unit suffix '" + suffix + "'");
    return it->second;
}

inline double parse_real(const std::string& key, const std::string& value, int line) {
    const char* begin = value.c_str();
    char* end = nullptr;
    const double number = std::strtod(begin, &end);
    if (end == begin) config_fail(line, "malformed value for " + key + ": '" + value + "'");
    const std::string suffix = trim(std::string(end));
    return suffix.empty() ? number : number * suffix_factor(suffix, line);
}

inline long parse_integer(const std::string& key, const std::string& value, int line) {
    const char* begin = value.c_str();
    char* end = nullptr;
    const long long number = std::strtoll(begin, &end, 10);
    if (end == begin || !trim(std::string(end)).empty()) {
        config_fail(line, "malformed integer for " + key + ": '" + value + "'");
    }
    return static_cast<long>(number);
}

inline void check_range(const std::string& key, int line, bool ok, const std::string& what) {
    if (!ok) config_fail(line, key + " " + what);
}

}  // namespace detail

// Line-oriented `key = value` parser with `#` comments. Missing keys keep the
// defaults; unknown keys, malformed values and range violations are rejected
// with the offending line number.
inline Config parse_config(const std::string& text) {
    Config cfg;
    using Setter = std::function<void(Config&, const std::string&, int)>;

    static const std::map<std::string, Setter> table = {
        {"cavity.g",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.cavity.g = detail::parse_real("cavity.g", v, l);
             detail::check_range("cavity.g", l, c.apparatus.cavity.g > 0, "must be > 0");
         }},
        {"cavity.kappa",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.cavity.kappa = detail::parse_real("cavity.kappa", v, l);
             detail::check_range("cavity.kappa", l, c.apparatus.cavity.kappa > 0, "must be > 0");
         }},
        {"cavity.gamma",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.cavity.gamma = detail::parse_real("cavity.gamma", v, l);
             detail::check_range("cavity.gamma", l, c.apparatus.cavity.gamma > 0, "must be > 0");
         }},
        {"readout.n_emit",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.readout.n_emit = detail::parse_integer("readout.n_emit", v, l);
             detail::check_range("readout.n_emit", l, c.apparatus.readout.n_emit >= 0,
                                 "must be >= 0");
         }},
        {"readout.p_det",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.readout.p_det = detail::parse_real("readout.p_det", v, l);
             detail::check_range("readout.p_det", l,
                                 c.apparatus.readout.p_det >= 0 && c.apparatus.readout.p_det <= 1,
                                 "outside [0, 1]");
         }},
        {"readout.threshold",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.readout.threshold = detail::parse_integer("readout.threshold", v, l);
             detail::check_range("readout.threshold", l, c.apparatus.readout.threshold >= 1,
                                 "must be >= 1");
         }},
        {"readout.eps_up",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.readout.eps_up = detail::parse_real("readout.eps_up", v, l);
             detail::check_range("readout.eps_up", l,
                                 c.apparatus.readout.eps_up >= 0 && c.apparatus.readout.eps_up <= 1,
                                 "outside [0, 1]");
         }},
        {"readout.window",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.readout.window = detail::parse_real("readout.window", v, l);
             detail::check_range("readout.window", l, c.apparatus.readout.window > 0,
                                 "must be > 0");
         }},
        {"relax.gamma_p",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.relax.gamma_p = detail::parse_real("relax.gamma_p", v, l);
             detail::check_range("relax.gamma_p", l, c.apparatus.relax.gamma_p >= 0,
                                 "must be >= 0");
         }},
        {"relax.gamma_m",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.relax.gamma_m = detail::parse_real("relax.gamma_m", v, l);
             detail::check_range("relax.gamma_m", l, c.apparatus.relax.gamma_m >= 0,
                                 "must be >= 0");
         }},
        {"relax.larmor",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.relax.larmor = detail::parse_real("relax.larmor", v, l);
             detail::check_range("relax.larmor", l, c.apparatus.relax.larmor >= 0, "must be >= 0");
         }},
        {"relax.equilibrium_rz",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.relax.equilibrium_rz = detail::parse_real("relax.equilibrium_rz", v, l);
             detail::check_range("relax.equilibrium_rz", l,
                                 std::abs(c.apparatus.relax.equilibrium_rz) <= 1.0,
                                 "outside [-1, 1]");
         }},
        {"rabi_freq",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.rabi_freq = detail::parse_real("rabi_freq", v, l);
             detail::check_range("rabi_freq", l, c.apparatus.rabi_freq > 0, "must be > 0");
         }},
        {"delta_e",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.delta_e = detail::parse_real("delta_e", v, l);
             detail::check_range("delta_e", l, c.apparatus.delta_e >= 0, "must be >= 0");
         }},
        {"atom_lifetime",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.atom_lifetime = detail::parse_real("atom_lifetime", v, l);
             detail::check_range("atom_lifetime", l, c.apparatus.atom_lifetime > 0, "must be > 0");
         }},
        {"polarization_fidelity",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.polarization_fidelity =
                 detail::parse_real("polarization_fidelity", v, l);
             detail::check_range("polarization_fidelity", l,
                                 c.apparatus.polarization_fidelity >= 0 &&
                                     c.apparatus.polarization_fidelity <= 1,
                                 "outside [0, 1]");
         }},
        {"lattice.wavelength",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.lattice.wavelength = detail::parse_real("lattice.wavelength", v, l);
             detail::check_range("lattice.wavelength", l, c.apparatus.lattice.wavelength > 0,
                                 "must be > 0");
         }},
        {"lattice.delta0",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.lattice.delta0 = detail::parse_real("lattice.delta0", v, l);
             detail::check_range("lattice.delta0", l, c.apparatus.lattice.delta0 >= 0,
                                 "must be >= 0");
         }},
        {"lattice.tau_transport",
         [](Config& c, const std::string& v, int l) {
             c.apparatus.lattice.tau_transport = detail::parse_real("lattice.tau_transport", v, l);
             detail::check_range("lattice.tau_transport", l,
                                 c.apparatus.lattice.tau_transport > 0, "must be > 0");
         }},
        {"rabi.points",
         [](Config& c, const std::string& v, int l) {
             c.rabi_points = detail::parse_integer("rabi.points", v, l);
             detail::check_range("rabi.points", l, c.rabi_points >= 2, "must be >= 2");
         }},
        {"rabi.periods",
         [](Config& c, const std::string& v, int l) {
             c.rabi_periods = detail::parse_real("rabi.periods", v, l);
             detail::check_range("rabi.periods", l, c.rabi_periods > 0, "must be > 0");
         }},
        {"rabi.shots",
         [](Config& c, const std::string& v, int l) {
             c.rabi_shots = detail::parse_integer("rabi.shots", v, l);
             detail::check_range("rabi.shots", l, c.rabi_shots >= 1, "must be >= 1");
         }},
        {"rabi.atoms",
         [](Config& c, const std::string& v, int l) {
             c.rabi_atoms = detail::parse_integer("rabi.atoms", v, l);
             detail::check_range("rabi.atoms", l, c.rabi_atoms == 1 || c.rabi_atoms == 2,
                                 "must be 1 or 2");
         }},
        {"ramsey.points",
         [](Config& c, const std::string& v, int l) {
             c.ramsey_points = detail::parse_integer("ramsey.points", v, l);
             detail::check_range("ramsey.points", l, c.ramsey_points >= 2, "must be >= 2");
         }},
        {"ramsey.periods",
         [](Config& c, const std::string& v, int l) {
             c.ramsey_periods = detail::parse_real("ramsey.periods", v, l);
             detail::check_range("ramsey.periods", l, c.ramsey_periods > 0, "must be > 0");
         }},
        {"ramsey.shots",
         [](Config& c, const std::string& v, int l) {
             c.ramsey_shots = detail::parse_integer("ramsey.shots", v, l);
             detail::check_range("ramsey.shots", l, c.ramsey_shots >= 1, "must be >= 1");
         }},
        {"tomo.state",
         [](Config& c, const std::string& v, int l) {
             const std::string s = detail::trim(v);
             if (s != "a" && s != "b" && s != "c") {
                 detail::config_fail(l, "tomo.state must be a, b or c");
             }
             c.tomo_state = s[0];
         }},
        {"tomo.shots_per_basis",
         [](Config& c, const std::string& v, int l) {
             c.tomo_shots_per_basis = detail::parse_integer("tomo.shots_per_basis", v, l);
             detail::check_range("tomo.shots_per_basis", l, c.tomo_shots_per_basis >= 1,
                                 "must be >= 1");
         }},
        {"tomo.resamples",
         [](Config& c, const std::string& v, int l) {
             c.tomo_resamples = detail::parse_integer("tomo.resamples", v, l);
             detail::check_range("tomo.resamples", l, c.tomo_resamples >= 2, "must be >= 2");
         }},
        {"tomo.likelihood",
         [](Config& c, const std::string& v, int l) {
             const std::string s = detail::trim(v);
             if (s == "raw") {
                 c.tomo_likelihood = LikelihoodMode::raw;
             } else if (s == "unfolded") {
                 c.tomo_likelihood = LikelihoodMode::unfolded;
             } else {
                 detail::config_fail(l, "tomo.likelihood must be raw or unfolded");
             }
         }},
        {"t1.points",
         [](Config& c, const std::string& v, int l) {
             c.t1_points = detail::parse_integer("t1.points", v, l);
             detail::check_range("t1.points", l, c.t1_points >= 4, "must be >= 4");
         }},
        {"t1.t_max",
         [](Config& c, const std::string& v, int l) {
             c.t1_t_max = detail::parse_real("t1.t_max", v, l);
             detail::check_range("t1.t_max", l, c.t1_t_max > 0, "must be > 0");
         }},
        {"t1.shots",
         [](Config& c, const std::string& v, int l) {
             c.t1_shots = detail::parse_integer("t1.shots", v, l);
             detail::check_range("t1.shots", l, c.t1_shots >= 1, "must be >= 1");
         }},
        {"t2.traps",
         [](Config& c, const std::string& v, int l) {
             c.t2_traps = detail::parse_integer("t2.traps", v, l);
             detail::check_range("t2.traps", l, c.t2_traps >= 4, "must be >= 4");
         }},
        {"t2.trap_max",
         [](Config& c, const std::string& v, int l) {
             c.t2_trap_max = detail::parse_real("t2.trap_max", v, l);
             detail::check_range("t2.trap_max", l, c.t2_trap_max > 0, "must be > 0");
         }},
        {"t2.fringe_points",
         [](Config& c, const std::string& v, int l) {
             c.t2_fringe_points = detail::parse_integer("t2.fringe_points", v, l);
             detail::check_range("t2.fringe_points", l, c.t2_fringe_points >= 8, "must be >= 8");
         }},
        {"t2.fringe_periods",
         [](Config& c, const std::string& v, int l) {
             c.t2_fringe_periods = detail::parse_real("t2.fringe_periods", v, l);
             detail::check_range("t2.fringe_periods", l, c.t2_fringe_periods > 0, "must be > 0");
         }},
        {"t2.shots",
         [](Config& c, const std::string& v, int l) {
             c.t2_shots = detail::parse_integer("t2.shots", v, l);
             detail::check_range("t2.shots", l, c.t2_shots >= 1, "must be >= 1");
         }},
        {"transport.points",
         [](Config& c, const std::string& v, int l) {
             c.transport_points = detail::parse_integer("transport.points", v, l);
             detail::check_range("transport.points", l, c.transport_points >= 2, "must be >= 2");
         }},
        {"seed",
         [](Config& c, const std::string& v, int l) {
             const long s = detail::parse_integer("seed", v, l);
             detail::check_range("seed", l, s >= 0, "must be >= 0");
             c.seed = static_cast<std::uint64_t>(s);
         }},
        {"mode",
         [](Config& c, const std::string& v, int l) {
             const std::string s = detail::trim(v);
             if (s == "sampled") {
                 c.mode = Mode::sampled;
             } else if (s == "analytic") {
                 c.mode = Mode::analytic;
             } else {
                 detail::config_fail(l, "mode must be sampled or analytic");
             }
         }},
        {"out",
         [](Config& c, const std::string& v, int) { c.out = detail::trim(v); }},
    };

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::size_t hash = raw.find('#');
        std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) detail::config_fail(line_no, "expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) detail::config_fail(line_no, "empty key");
        if (value.empty()) detail::config_fail(line_no, "empty value for " + key);
        const auto it = table.find(key);
        if (it == table.end()) detail::config_fail(line_no, "unknown key '" + key + "'");
        it->second(cfg, value, line_no);
    }

    try {
        cfg.apparatus.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
    return cfg;
}

namespace detail {

inline std::string real17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// Canonical rendering: every key, fixed order, plain SI numbers (no unit
// suffixes) so parse(render(c)) reproduces c bit-exactly.
inline std::string render_config(const Config& c) {
    std::ostringstream os;
    const auto& a = c.apparatus;
    os << "cavity.g = " << detail::real17(a.cavity.g) << "\n";
    os << "cavity.kappa = " << detail::real17(a.cavity.kappa) << "\n";
    os << "cavity.gamma = " << detail::real17(a.cavity.gamma) << "\n";
    os << "readout.n_emit = " << a.readout.n_emit << "\n";
    os << "readout.p_det = " << detail::real17(a.readout.p_det) << "\n";
    os << "readout.threshold = " << a.readout.threshold << "\n";
    os << "readout.eps_up = " << detail::real17(a.readout.eps_up) << "\n";
    os << "readout.window = " << detail::real17(a.readout.window) << "\n";
    os << "relax.gamma_p = " << detail::real17(a.relax.gamma_p) << "\n";
    os << "relax.gamma_m = " << detail::real17(a.relax.gamma_m) << "\n";
    os << "relax.larmor = " << detail::real17(a.relax.larmor) << "\n";
    os << "relax.equilibrium_rz = " << detail::real17(a.relax.equilibrium_rz) << "\n";
    os << "rabi_freq = " << detail::real17(a.rabi_freq) << "\n";
    os << "delta_e = " << detail::real17(a.delta_e) << "\n";
    os << "atom_lifetime = " << detail::real17(a.atom_lifetime) << "\n";
    os << "polarization_fidelity = " << detail::real17(a.polarization_fidelity) << "\n";
    os << "lattice.wavelength = " << detail::real17(a.lattice.wavelength) << "\n";
    os << "lattice.delta0 = " << detail::real17(a.lattice.delta0) << "\n";
    os << "lattice.tau_transport = " << detail::real17(a.lattice.tau_transport) << "\n";
    os << "rabi.points = " << c.rabi_points << "\n";
    os << "rabi.periods = " << detail::real17(c.rabi_periods) << "\n";
    os << "rabi.shots = " << c.rabi_shots << "\n";
    os << "rabi.atoms = " << c.rabi_atoms << "\n";
    os << "ramsey.points = " << c.ramsey_points << "\n";
    os << "ramsey.periods = " << detail::real17(c.ramsey_periods) << "\n";
    os << "ramsey.shots = " << c.ramsey_shots << "\n";
    os << "tomo.state = " << c.tomo_state << "\n";
    os << "tomo.shots_per_basis = " << c.tomo_shots_per_basis << "\n";
    os << "tomo.resamples = " << c.tomo_resamples << "\n";
    os << "tomo.likelihood = "
       << (c.tomo_likelihood == LikelihoodMode::raw ? "raw" : "unfolded") << "\n";
    os << "t1.points = " << c.t1_points << "\n";
    os << "t1.t_max = " << detail::real17(c.t1_t_max) << "\n";
    os << "t1.shots = " << c.t1_shots << "\n";
    os << "t2.traps = " << c.t2_traps << "\n";
    os << "t2.trap_max = " << detail::real17(c.t2_trap_max) << "\n";
    os << "t2.fringe_points = " << c.t2_fringe_points << "\n";
    os << "t2.fringe_periods = " << detail::real17(c.t2_fringe_periods) << "\n";
    os << "t2.shots = " << c.t2_shots << "\n";
    os << "transport.points = " << c.transport_points << "\n";
    os << "seed = " << c.seed << "\n";
    os << "mode = " << (c.mode == Mode::sampled ? "sampled" : "analytic") << "\n";
    if (!c.out.empty()) os << "out = " << c.out << "\n";
    return os.str();
}

}  // namespace nucspin
