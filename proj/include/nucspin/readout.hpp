#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nucspin/density_matrix.hpp"
#include "nucspin/rng.hpp"

namespace nucspin {

// Cavity QED rates: atom-photon coupling g, cavity decay HWHM kappa, half
// natural linewidth gamma, all angular (rad/s).
struct CavityParams {
    double g = kTwoPi * 2.8e6;
    double kappa = kTwoPi * 4.8e6;
    double gamma = kTwoPi * 91e3;

    void validate() const {
        if (!(g > 0.0 && kappa > 0.0 && gamma > 0.0)) {
            throw std::invalid_argument("CavityParams: all rates must be positive");
        }
    }
};

// Photon-counting readout model. A |down> atom emits n_emit photons per
// window, each detected with probability p_det; a click is declared at
// >= threshold detected photons. eps_up lumps dark counts and off-resonant
// spin flips into a single click probability for |up>.
struct ReadoutParams {
    long n_emit = 40;
    double p_det = 0.1;
    long threshold = 1;
    double eps_up = 0.02;
    double window = 500e-6;  // s

    void validate() const {
        if (n_emit < 0) throw std::invalid_argument("ReadoutParams: n_emit must be >= 0");
        if (!(p_det >= 0.0 && p_det <= 1.0)) {
            throw std::invalid_argument("ReadoutParams: p_det outside [0, 1]");
        }
        if (threshold < 1) throw std::invalid_argument("ReadoutParams: threshold must be >= 1");
        if (!(eps_up >= 0.0 && eps_up <= 1.0)) {
            throw std::invalid_argument("ReadoutParams: eps_up outside [0, 1]");
        }
        if (!(window > 0.0)) throw std::invalid_argument("ReadoutParams: window must be > 0");
    }
};

struct ReadoutOutcome {
    bool click = false;
    long detected_photons = 0;
    DensityMatrix collapsed_state;
};

// Purcell-broadened linewidth gamma * (1 + 2 g^2 / (kappa gamma)).
inline double cavity_enhanced_linewidth(const CavityParams& c) {
    c.validate();
    return c.gamma * (1.0 + 2.0 * c.g * c.g / (c.kappa * c.gamma));
}

// P(X >= threshold) for X ~ Binomial(n_emit, p_det), by exact summation of
// whichever tail has fewer terms (no normal approximation).
inline double detection_efficiency(long n_emit, double p_det, long threshold) {
    if (n_emit < 0) throw std::invalid_argument("detection_efficiency: n_emit must be >= 0");
    if (threshold < 1) throw std::invalid_argument("detection_efficiency: threshold must be >= 1");
    if (!(p_det >= 0.0 && p_det <= 1.0)) {
        throw std::invalid_argument("detection_efficiency: p_det outside [0, 1]");
    }
    if (threshold > n_emit) return 0.0;
    if (p_det == 0.0) return 0.0;
    if (p_det == 1.0) return 1.0;

    const double n = static_cast<double>(n_emit);
    const double lp = std::log(p_det);
    const double lq = std::log1p(-p_det);
    const double lgn = std::lgamma(n + 1.0);
    auto log_pmf = [&](long k) {
        const double kd = static_cast<double>(k);
        return lgn - std::lgamma(kd + 1.0) - std::lgamma(n - kd + 1.0) + kd * lp + (n - kd) * lq;
    };

    const long tail_terms = n_emit - threshold + 1;
    const long head_terms = threshold;
    if (tail_terms <= head_terms) {
        double sum = 0.0;
        for (long k = n_emit; k >= threshold; --k) sum += std::exp(log_pmf(k));
        return sum;
    }
    double head = 0.0;
    for (long k = 0; k < threshold; ++k) head += std::exp(log_pmf(k));
    return 1.0 - head;
}

inline double detection_efficiency(const ReadoutParams& rp) {
    rp.validate();
    return detection_efficiency(rp.n_emit, rp.p_det, rp.threshold);
}

// Affine readout map: click probability for a state with P(|down>) = p_down.
// Populations within integrator roundoff of the endpoints are clamped.
inline double click_probability(double p_down, const ReadoutParams& rp) {
    if (!(p_down >= -1e-9 && p_down <= 1.0 + 1e-9)) {
        throw std::invalid_argument("click_probability: p_down outside [0, 1]");
    }
    p_down = std::min(1.0, std::max(0.0, p_down));
    const double eta = detection_efficiency(rp);
    return p_down * eta + (1.0 - p_down) * rp.eps_up;
}

// Projective readout: collapse the spin first, then sample photons for the
// collapsed state. Error clicks for |up> register `threshold` photons so the
// click <-> photons invariant holds.
inline ReadoutOutcome simulate_readout(const DensityMatrix& rho, const ReadoutParams& rp,
                                       rng::Stream& stream) {
    rp.validate();
    ReadoutOutcome out;
    const bool projected_down = stream.bernoulli(rho.population_down());
    if (projected_down) {
        out.detected_photons = stream.binomial(rp.n_emit, rp.p_det);
        out.click = out.detected_photons >= rp.threshold;
        out.collapsed_state = pure_state(kPi, 0.0);
    } else {
        out.click = stream.bernoulli(rp.eps_up);
        out.detected_photons = out.click ? rp.threshold : 0;
        out.collapsed_state = pure_state(0.0, 0.0);
    }
    return out;
}

// k independent atoms, each with the same P(|down>): a click unless every
// atom fails to produce one.
inline double multi_atom_click_probability(long k_atoms, double p_down, const ReadoutParams& rp) {
    if (k_atoms < 1) throw std::invalid_argument("multi_atom_click_probability: need k >= 1");
    const double q = 1.0 - click_probability(p_down, rp);
    return 1.0 - std::pow(q, static_cast<double>(k_atoms));
}

}  // namespace nucspin
