#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>

#include "nucspin/math.hpp"

namespace nucspin {

// Qubit density matrix in the (|up>, |down>) basis, stored as the two real
// populations plus the single independent off-diagonal element rho_{ud}.
// Hermiticity holds by construction. Bloch convention: |up> -> rz = +1,
// |down> -> rz = -1, with rho = (I + r.sigma)/2 and rho_{ud} = (rx - i ry)/2.
class DensityMatrix {
  public:
    static constexpr double kTraceTol = 1e-12;
    static constexpr double kBlochTol = 1e-10;

    // Maximally mixed state.
    DensityMatrix() : p_up_(0.5), p_down_(0.5), coherence_(0.0, 0.0) {}

    static DensityMatrix from_bloch(const Vec3& r) {
        const double n = norm(r);
        if (!(n <= 1.0 + kBlochTol)) {
            throw std::invalid_argument("DensityMatrix: Bloch vector outside the unit ball");
        }
        DensityMatrix rho;
        rho.p_up_ = 0.5 * (1.0 + r.z);
        rho.p_down_ = 0.5 * (1.0 - r.z);
        rho.coherence_ = {0.5 * r.x, -0.5 * r.y};
        return rho;
    }

    static DensityMatrix from_elements(double p_up, double p_down, std::complex<double> rho_ud) {
        if (std::abs(p_up + p_down - 1.0) > kTraceTol) {
            throw std::invalid_argument("DensityMatrix: trace must be 1");
        }
        return from_bloch({2.0 * rho_ud.real(), -2.0 * rho_ud.imag(), p_up - p_down});
    }

    Vec3 bloch() const {
        return {2.0 * coherence_.real(), -2.0 * coherence_.imag(), p_up_ - p_down_};
    }

    double population_up() const { return p_up_; }
    double population_down() const { return p_down_; }
    std::complex<double> coherence() const { return coherence_; }
    double trace() const { return p_up_ + p_down_; }

    // Eigenvalues are (1 +- |r|)/2.
    double min_eigenvalue() const { return 0.5 * (1.0 - norm(bloch())); }

  private:
    double p_up_;
    double p_down_;
    std::complex<double> coherence_;  // rho_{up,down}
};

// |psi> = cos(theta/2)|up> + e^{i phi} sin(theta/2)|down>.
inline DensityMatrix pure_state(double theta, double phi) {
    const double st = std::sin(theta);
    return DensityMatrix::from_bloch({st * std::cos(phi), st * std::sin(phi), std::cos(theta)});
}

// diag(1 - P, P) with P the probability of |down>.
inline DensityMatrix initialize_state(double polarization_fidelity) {
    if (!(polarization_fidelity >= 0.0 && polarization_fidelity <= 1.0)) {
        throw std::invalid_argument("initialize_state: polarization fidelity outside [0, 1]");
    }
    return DensityMatrix::from_bloch({0.0, 0.0, 1.0 - 2.0 * polarization_fidelity});
}

// Ideal-limit Bloch rotation about a unit axis (right-hand rule).
inline DensityMatrix apply_rotation(const DensityMatrix& rho, const Vec3& axis, double angle) {
    if (std::abs(norm(axis) - 1.0) > 1e-9) {
        throw std::invalid_argument("apply_rotation: axis must be a unit vector");
    }
    return DensityMatrix::from_bloch(rotated(rho.bloch(), axis, angle));
}

// Tr rho^2 = (1 + |r|^2)/2.
inline double purity(const DensityMatrix& rho) { return 0.5 * (1.0 + norm_squared(rho.bloch())); }

// <psi|rho|psi> = (1 + r . r_psi)/2 for a pure target.
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& pure_target) {
    const Vec3 rt = pure_target.bloch();
    if (std::abs(norm(rt) - 1.0) > 1e-6) {
        throw std::invalid_argument("fidelity: target state must be pure (normalized)");
    }
    return 0.5 * (1.0 + dot(rho.bloch(), rt));
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
    return 0.5 * norm(a.bloch() - b.bloch());
}

}  // namespace nucspin
