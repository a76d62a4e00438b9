#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "nucspin/rng.hpp"
#include "nucspin/spin_dynamics.hpp"

using namespace nucspin;

namespace {
const RelaxationParams kNoRelax{};
const double kOmega = kPi / (2.0 * 3.2e-3);  // pi/2 in 3.2 ms
}  // namespace

TEST_CASE("pi pulse inverts the population", "[dynamics]") {
    const DensityMatrix down = pure_state(kPi, 0.0);
    const DensityMatrix up = rf_pulse_propagate(down, pi_pulse(kOmega), kNoRelax);
    REQUIRE(up.population_down() == Approx(0.0).margin(1e-9));
    REQUIRE(up.bloch().z == Approx(1.0).margin(1e-9));
}

TEST_CASE("3.2 ms pulse acts as pi/2", "[dynamics]") {
    const DensityMatrix down = pure_state(kPi, 0.0);
    const RFPulse pulse{kOmega, 0.0, 0.0, 3.2e-3};
    const DensityMatrix rho = rf_pulse_propagate(down, pulse, kNoRelax);
    REQUIRE(rho.population_down() == Approx(0.5).margin(1e-10));
}

TEST_CASE("resonant Rabi flopping matches the closed form", "[dynamics]") {
    const DensityMatrix down = pure_state(kPi, 0.0);
    for (int i = 1; i <= 20; ++i) {
        const double t = 2.3e-4 * i;
        const DensityMatrix rho = rf_pulse_propagate(down, {kOmega, 0.0, 0.0, t}, kNoRelax);
        const double expected = std::cos(0.5 * kOmega * t) * std::cos(0.5 * kOmega * t);
        REQUIRE(rho.population_down() == Approx(expected).margin(1e-8));
    }
}

TEST_CASE("detuned drive matches the generalized Rabi formula", "[dynamics]") {
    const DensityMatrix down = pure_state(kPi, 0.0);
    const double delta = 0.7 * kOmega;
    const double omega_eff = std::hypot(kOmega, delta);
    for (int i = 1; i <= 10; ++i) {
        const double t = 4.1e-4 * i;
        const DensityMatrix rho =
            rf_pulse_propagate(down, {kOmega, 0.0, delta, t}, kNoRelax);
        const double p_up = (kOmega * kOmega) / (omega_eff * omega_eff) *
                            std::sin(0.5 * omega_eff * t) * std::sin(0.5 * omega_eff * t);
        REQUIRE(rho.population_up() == Approx(p_up).margin(1e-8));
    }
}

TEST_CASE("free evolution precesses and damps with the closed form", "[dynamics]") {
    RelaxationParams relax;
    relax.larmor = kTwoPi * 2.5e3;

    const DensityMatrix a = pure_state(0.5 * kPi, 0.0);
    SECTION("zero duration is the identity") {
        REQUIRE(trace_distance(free_evolve(a, 0.0, relax), a) == 0.0);
    }
    SECTION("0.1 ms at 2.5 kHz is a quarter turn: state (a) becomes state (b)") {
        const DensityMatrix b = free_evolve(a, 1e-4, relax);
        REQUIRE(trace_distance(b, pure_state(0.5 * kPi, 0.5 * kPi)) < 1e-12);
    }
    SECTION("longitudinal decay at gamma_p") {
        RelaxationParams damped;
        damped.gamma_p = 2.0;
        const DensityMatrix down = pure_state(kPi, 0.0);
        const DensityMatrix rho = free_evolve(down, 0.5, damped);  // t = 1/gamma_p
        REQUIRE(rho.bloch().z == Approx(-std::exp(-1.0)).margin(1e-12));
        REQUIRE(rho.bloch().z == Approx(-0.3679).margin(5e-5));
    }
}

TEST_CASE("coherence decay rate equals gamma_p + gamma_m", "[dynamics]") {
    RelaxationParams relax;
    relax.gamma_p = 2.0;
    relax.gamma_m = 8.0;
    relax.larmor = kTwoPi * 2.5e3;
    const DensityMatrix a = pure_state(0.5 * kPi, 0.0);
    // log-linear fit of the transverse magnitude on a noiseless trajectory
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = 24;
    for (int i = 1; i <= n; ++i) {
        const double t = 0.01 * i;
        const Vec3 r = free_evolve(a, t, relax).bloch();
        const double mag = std::hypot(r.x, r.y);
        sx += t;
        sy += std::log(mag);
        sxx += t * t;
        sxy += t * std::log(mag);
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    REQUIRE(-slope == Approx(relax.gamma_p + relax.gamma_m).epsilon(1e-3));
}

TEST_CASE("ideal Ramsey sequence reproduces the fringe formula", "[dynamics]") {
    RelaxationParams relax;
    relax.larmor = kTwoPi * 2.5e3;
    const DensityMatrix down = pure_state(kPi, 0.0);
    const RFPulse half = pi_half_pulse(kOmega);
    for (int i = 0; i <= 12; ++i) {
        const double delay = 1.3e-4 * i;
        const PulseSequence seq{half, FreeEvolution{delay}, half};
        const DensityMatrix rho = run_sequence(down, seq, relax);
        const double expected = 0.5 * (1.0 - std::cos(relax.larmor * delay));
        REQUIRE(rho.population_down() == Approx(expected).margin(1e-8));
    }
}

TEST_CASE("back-to-back half pulses form a pi pulse", "[dynamics]") {
    const DensityMatrix down = pure_state(kPi, 0.0);
    const RFPulse half = pi_half_pulse(kOmega);
    const PulseSequence seq{half, FreeEvolution{0.0}, half};
    REQUIRE(run_sequence(down, seq, kNoRelax).population_down() == Approx(0.0).margin(1e-9));
}

TEST_CASE("empty sequence returns the input", "[dynamics]") {
    const DensityMatrix rho = DensityMatrix::from_bloch({0.3, -0.2, 0.4});
    REQUIRE(trace_distance(run_sequence(rho, {}, kNoRelax), rho) == 0.0);
}

TEST_CASE("splitting a free evolution leaves the endpoint unchanged", "[dynamics]") {
    RelaxationParams relax;
    relax.gamma_p = 2.0;
    relax.gamma_m = 8.0;
    relax.larmor = kTwoPi * 2.5e3;
    const DensityMatrix rho = DensityMatrix::from_bloch({0.6, 0.1, -0.5});
    for (double t : {1e-4, 3.7e-3, 0.21}) {
        const DensityMatrix whole = run_sequence(rho, {FreeEvolution{t}}, relax);
        const DensityMatrix halves =
            run_sequence(rho, {FreeEvolution{0.5 * t}, FreeEvolution{0.5 * t}}, relax);
        REQUIRE(trace_distance(whole, halves) < 1e-12);
    }
}

TEST_CASE("driven norm is non-increasing with relaxation on", "[dynamics]") {
    RelaxationParams relax;
    relax.gamma_p = 5.0;
    relax.gamma_m = 20.0;
    const DensityMatrix start = pure_state(0.3 * kPi, 0.7);
    double prev = norm(start.bloch());
    DensityMatrix rho = start;
    for (int i = 0; i < 10; ++i) {
        rho = rf_pulse_propagate(rho, {kOmega, 0.4, 0.0, 2e-3}, relax);
        const double n = norm(rho.bloch());
        REQUIRE(n <= prev + 1e-12);
        prev = n;
    }
}

TEST_CASE("randomized sequences keep trace, positivity and unitary purity", "[dynamics]") {
    rng::Stream s(20260808);
    for (int trial = 0; trial < 300; ++trial) {
        const bool damped = trial % 2;
        RelaxationParams relax;
        relax.larmor = kTwoPi * 2.5e3 * s.uniform01();
        if (damped) {
            relax.gamma_p = 20.0 * s.uniform01();
            relax.gamma_m = 20.0 * s.uniform01();
        }
        const double theta = std::acos(2.0 * s.uniform01() - 1.0);
        const double phi = kTwoPi * s.uniform01();
        DensityMatrix rho = pure_state(theta, phi);
        const double initial_purity = purity(rho);
        const int segs = 1 + static_cast<int>(s.uniform01() * 4);
        PulseSequence seq;
        for (int k = 0; k < segs; ++k) {
            if (s.uniform01() < 0.6) {
                const double omega = 100.0 + 1900.0 * s.uniform01();
                seq.push_back(RFPulse{omega, kTwoPi * s.uniform01(),
                                      omega * (2.0 * s.uniform01() - 1.0),
                                      kTwoPi / omega * 2.0 * s.uniform01()});
            } else {
                seq.push_back(FreeEvolution{0.05 * s.uniform01()});
            }
        }
        rho = run_sequence(rho, seq, relax);
        REQUIRE(std::abs(rho.trace() - 1.0) <= 1e-12);
        REQUIRE(rho.min_eigenvalue() >= -1e-10);
        if (!damped) REQUIRE(purity(rho) == Approx(initial_purity).margin(1e-10));
    }
}

TEST_CASE("propagation rejects impossible step budgets", "[dynamics]") {
    PropagationOptions opts;
    opts.max_steps = 10;
    const DensityMatrix down = pure_state(kPi, 0.0);
    REQUIRE_THROWS_AS(rf_pulse_propagate(down, {kOmega, 0.0, 0.0, 10.0}, kNoRelax, opts),
                      std::runtime_error);
}

TEST_CASE("segment validation rejects negative durations and rates", "[dynamics]") {
    const DensityMatrix down = pure_state(kPi, 0.0);
    REQUIRE_THROWS_AS(rf_pulse_propagate(down, {kOmega, 0.0, 0.0, -1.0}, kNoRelax),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(rf_pulse_propagate(down, {-kOmega, 0.0, 0.0, 1.0}, kNoRelax),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(free_evolve(down, -0.1, kNoRelax), std::invalid_argument);
    RelaxationParams bad;
    bad.gamma_p = -1.0;
    REQUIRE_THROWS_AS(free_evolve(down, 0.1, bad), std::invalid_argument);
}
