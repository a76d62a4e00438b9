// nucspin-lab: command-line front end for the single nuclear-spin virtual lab.
//
//   nucspin-lab <command> [--config PATH] [--seed N] [--out PATH]
//                         [--mode sampled|analytic] [command flags]
//
// Flags override config-file keys, which override the built-in defaults.
// NUCSPIN_SEED serves as a fallback seed when --seed is absent.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nucspin/cli.hpp"

namespace {

struct GlobalFlags {
    std::string config_path;
    std::optional<long> seed;
    std::optional<std::string> out;
    std::optional<std::string> mode;
};

void add_global_flags(CLI::App* cmd, GlobalFlags& flags) {
    cmd->add_option("--config", flags.config_path, "configuration file (key = value lines)");
    auto* seed_opt = cmd->add_option("--seed", "root random seed");
    seed_opt->envname("NUCSPIN_SEED");
    seed_opt->each([&flags](const std::string& v) { flags.seed = std::stol(v); });
    cmd->add_option("--out", "output path prefix")->each([&flags](const std::string& v) {
        flags.out = v;
    });
    cmd->add_option("--mode", "sampled | analytic")
        ->check(CLI::IsMember({"sampled", "analytic"}))
        ->each([&flags](const std::string& v) { flags.mode = v; });
}

int run(const std::string& command, const GlobalFlags& flags,
        const std::function<void(nucspin::Config&)>& apply_command_flags) {
    nucspin::Config cfg;
    try {
        if (!flags.config_path.empty()) {
            std::ifstream in(flags.config_path);
            if (!in) {
                throw std::runtime_error("cannot read config file " + flags.config_path);
            }
            std::ostringstream text;
            text << in.rdbuf();
            cfg = nucspin::parse_config(text.str());
        }
        if (flags.seed) {
            if (*flags.seed < 0) throw std::runtime_error("seed must be >= 0");
            cfg.seed = static_cast<std::uint64_t>(*flags.seed);
        }
        if (flags.out) cfg.out = *flags.out;
        if (flags.mode) {
            cfg.mode = *flags.mode == "analytic" ? nucspin::Mode::analytic
                                                 : nucspin::Mode::sampled;
        }
        apply_command_flags(cfg);
    } catch (const std::exception& e) {
        nucspin::ordered_json ej;
        ej["error"] = e.what();
        std::cerr << ej.dump() << "\n";
        return 1;
    }
    return nucspin::dispatch(command, cfg, std::cout, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"virtual laboratory for a single nuclear-spin qubit"};
    app.require_subcommand(1);

    GlobalFlags flags;

    std::optional<long> shots, points, atoms, traps, resamples;
    std::optional<double> periods, tmax, trap_max;
    std::optional<std::string> state;

    auto add_shots = [&](CLI::App* cmd) {
        cmd->add_option("--shots", "shots per grid point")->each([&](const std::string& v) {
            shots = std::stol(v);
        });
    };
    auto add_points = [&](CLI::App* cmd) {
        cmd->add_option("--points", "grid points")->each([&](const std::string& v) {
            points = std::stol(v);
        });
    };
    auto add_periods = [&](CLI::App* cmd) {
        cmd->add_option("--periods", "periods spanned by the grid")
            ->each([&](const std::string& v) { periods = std::stod(v); });
    };

    CLI::App* rabi = app.add_subcommand("rabi", "drive scan: population vs pulse duration");
    add_global_flags(rabi, flags);
    add_shots(rabi);
    add_points(rabi);
    add_periods(rabi);
    rabi->add_option("--atoms", "atoms in the cavity (1 or 2)")
        ->check(CLI::IsMember({"1", "2"}))
        ->each([&](const std::string& v) { atoms = std::stol(v); });

    CLI::App* ramsey = app.add_subcommand("ramsey", "two-pulse interference vs delay");
    add_global_flags(ramsey, flags);
    add_shots(ramsey);
    add_points(ramsey);
    add_periods(ramsey);

    CLI::App* tomo = app.add_subcommand("tomo", "prepare a state and reconstruct it");
    add_global_flags(tomo, flags);
    tomo->add_option("--state", "prepared state: a, b or c")
        ->check(CLI::IsMember({"a", "b", "c"}))
        ->each([&](const std::string& v) { state = v; });
    tomo->add_option("--shots", "shots per measurement basis")->each([&](const std::string& v) {
        shots = std::stol(v);
    });
    tomo->add_option("--resamples", "bootstrap resamples")->each([&](const std::string& v) {
        resamples = std::stol(v);
    });

    CLI::App* t1 = app.add_subcommand("t1", "population decay and atom lifetime");
    add_global_flags(t1, flags);
    add_shots(t1);
    add_points(t1);
    t1->add_option("--tmax", "last trapping time (s)")->each([&](const std::string& v) {
        tmax = std::stod(v);
    });

    CLI::App* t2 = app.add_subcommand("t2", "fringe visibility decay vs trapping time");
    add_global_flags(t2, flags);
    add_shots(t2);
    t2->add_option("--traps", "number of trapping times")->each([&](const std::string& v) {
        traps = std::stol(v);
    });
    t2->add_option("--trap-max", "last trapping time (s)")->each([&](const std::string& v) {
        trap_max = std::stod(v);
    });

    CLI::App* transport = app.add_subcommand("transport", "moving-lattice trajectory");
    add_global_flags(transport, flags);
    add_points(transport);

    CLI::App* report = app.add_subcommand("report", "closed-form derived quantities");
    add_global_flags(report, flags);

    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    return run(command, flags, [&](nucspin::Config& cfg) {
        if (command == "rabi") {
            if (shots) cfg.rabi_shots = *shots;
            if (points) cfg.rabi_points = *points;
            if (periods) cfg.rabi_periods = *periods;
            if (atoms) cfg.rabi_atoms = *atoms;
        } else if (command == "ramsey") {
            if (shots) cfg.ramsey_shots = *shots;
            if (points) cfg.ramsey_points = *points;
            if (periods) cfg.ramsey_periods = *periods;
        } else if (command == "tomo") {
            if (shots) cfg.tomo_shots_per_basis = *shots;
            if (state) cfg.tomo_state = (*state)[0];
            if (resamples) cfg.tomo_resamples = *resamples;
        } else if (command == "t1") {
            if (shots) cfg.t1_shots = *shots;
            if (points) cfg.t1_points = *points;
            if (tmax) cfg.t1_t_max = *tmax;
        } else if (command == "t2") {
            if (shots) cfg.t2_shots = *shots;
            if (traps) cfg.t2_traps = *traps;
            if (trap_max) cfg.t2_trap_max = *trap_max;
        } else if (command == "transport") {
            if (points) cfg.transport_points = *points;
        }
    });
}
