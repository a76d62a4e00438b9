#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "nucspin/density_matrix.hpp"
#include "nucspin/readout.hpp"
#include "nucspin/rng.hpp"
#include "nucspin/spin_dynamics.hpp"

namespace nucspin {

enum class BasisLabel { X, Y, Z };

inline Vec3 basis_axis(BasisLabel b) {
    switch (b) {
        case BasisLabel::X: return {1.0, 0.0, 0.0};
        case BasisLabel::Y: return {0.0, 1.0, 0.0};
        case BasisLabel::Z: return {0.0, 0.0, 1.0};
    }
    throw std::logic_error("basis_axis: bad label");
}

inline const char* basis_name(BasisLabel b) {
    switch (b) {
        case BasisLabel::X: return "X";
        case BasisLabel::Y: return "Y";
        case BasisLabel::Z: return "Z";
    }
    return "?";
}

// Measurement setting: rotation prefix applied before the z readout so the
// ideal click probability becomes (1 - r_b)/2 along the intended axis.
struct MeasurementBasis {
    BasisLabel label = BasisLabel::Z;
    PulseSequence prefix;
};

struct MeasurementRecord {
    BasisLabel basis = BasisLabel::Z;
    long shots = 0;
    long clicks = 0;

    void validate() const {
        if (shots < 1) throw std::invalid_argument("MeasurementRecord: shots must be >= 1");
        if (clicks < 0 || clicks > shots) {
            throw std::invalid_argument("MeasurementRecord: clicks outside [0, shots]");
        }
    }
};

// Z: no prefix. X: pi/2 at phase -pi/2 (axis -y) maps x onto z. Y: pi/2 at
// phase 0 (axis +x) maps y onto z.
inline std::array<MeasurementBasis, 3> standard_bases(double rabi_freq) {
    if (!(rabi_freq > 0.0)) throw std::invalid_argument("standard_bases: need rabi_freq > 0");
    std::array<MeasurementBasis, 3> bases;
    bases[0] = {BasisLabel::X, {pi_half_pulse(rabi_freq, -0.5 * kPi)}};
    bases[1] = {BasisLabel::Y, {pi_half_pulse(rabi_freq, 0.0)}};
    bases[2] = {BasisLabel::Z, {}};
    return bases;
}

// raw: reconstruct the click frequencies as-is (readout error propagates into
// the matrix). unfolded: include (eta, eps_up) in the measurement map.
enum class LikelihoodMode { raw, unfolded };

namespace detail {

struct EffectiveMap {
    double eta = 1.0;
    double eps = 0.0;
};

inline EffectiveMap effective_map(const ReadoutParams& rp, LikelihoodMode mode) {
    if (mode == LikelihoodMode::raw) return {1.0, 0.0};
    rp.validate();
    return {detection_efficiency(rp), rp.eps_up};
}

// Click probability for a state r measured along axis b: the readout map
// applied to p_b = (1 - r.b)/2.
inline double click_model(const Vec3& r, BasisLabel b, const EffectiveMap& m) {
    const double p = 0.5 * (1.0 - dot(r, basis_axis(b)));
    return p * m.eta + (1.0 - p) * m.eps;
}

// Binomial log-likelihood with the lim x ln x = 0 convention for degenerate
// counts; -inf when a nonzero count meets zero probability.
inline double log_likelihood(const Vec3& r, std::span<const MeasurementRecord> records,
                             const EffectiveMap& m) {
    double llh = 0.0;
    for (const MeasurementRecord& rec : records) {
        const double f = click_model(r, rec.basis, m);
        const double n1 = static_cast<double>(rec.clicks);
        const double n0 = static_cast<double>(rec.shots - rec.clicks);
        if (n1 > 0.0) {
            if (f <= 0.0) return -std::numeric_limits<double>::infinity();
            llh += n1 * std::log(f);
        }
        if (n0 > 0.0) {
            if (f >= 1.0) return -std::numeric_limits<double>::infinity();
            llh += n0 * std::log1p(-f);
        }
    }
    return llh;
}

// 2x2 complex Hermitian operators for the RrhoR iteration.
struct Mat2 {
    std::complex<double> a{}, b{}, c{}, d{};  // [[a, b], [c, d]] in (up, down)

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Mat2 from_bloch_operator(double w_id, const Vec3& v) {
        // w_id * I + v . sigma
        return {w_id + v.z, {v.x, -v.y}, {v.x, v.y}, w_id - v.z};
    }
    static Mat2 density(const Vec3& r) { return from_bloch_operator(0.5, 0.5 * r); }

    Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
    Mat2 scaled(double s) const { return {s * a, s * b, s * c, s * d}; }
    double trace_real() const { return (a + d).real(); }
    Vec3 bloch() const {
        return {(b + c).real(), (c - b).imag(), (a - d).real()};
    }
};

// Projector onto the click outcome along axis b folded through the readout
// map: E = eta * Pi_b + eps * (I - Pi_b) with Pi_b = (I - sigma_b)/2.
inline Mat2 click_effect(BasisLabel b, const EffectiveMap& m) {
    const Vec3 ax = basis_axis(b);
    // Pi_b = (I - sigma_b)/2 -> w_id 0.5, vector -ax/2
    const Mat2 pi = Mat2::from_bloch_operator(0.5, -0.5 * ax);
    const Mat2 ipi = Mat2::from_bloch_operator(0.5, 0.5 * ax);
    return pi.scaled(m.eta) + ipi.scaled(m.eps);
}

}  // namespace detail

struct LinearInversionResult {
    Vec3 r;
    bool physical = false;
};

// Inverts click frequencies through the affine readout map, then r_b = 1 - 2 p_b.
inline LinearInversionResult linear_inversion(std::span<const MeasurementRecord> records,
                                              const ReadoutParams& rp,
                                              LikelihoodMode mode = LikelihoodMode::raw) {
    const detail::EffectiveMap m = detail::effective_map(rp, mode);
    if (std::abs(m.eta - m.eps) < 1e-12) {
        throw std::runtime_error("linear_inversion: readout map is non-invertible (eta == eps_up)");
    }
    bool seen[3] = {false, false, false};
    Vec3 r{};
    for (const MeasurementRecord& rec : records) {
        rec.validate();
        const int idx = static_cast<int>(rec.basis);
        if (seen[idx]) throw std::invalid_argument("linear_inversion: duplicate basis record");
        seen[idx] = true;
        const double f = static_cast<double>(rec.clicks) / static_cast<double>(rec.shots);
        const double p = (f - m.eps) / (m.eta - m.eps);
        const double rb = 1.0 - 2.0 * p;
        const Vec3 ax = basis_axis(rec.basis);
        r = r + rb * ax;
    }
    if (!(seen[0] && seen[1] && seen[2])) {
        throw std::invalid_argument("linear_inversion: need one record per basis");
    }
    return {r, norm(r) <= 1.0};
}

struct MleOptions {
    LikelihoodMode mode = LikelihoodMode::raw;
    long max_iterations = 100000;
    double llh_tol = 1e-12;
};

struct MleResult {
    DensityMatrix rho;
    double log_likelihood = 0.0;
    bool converged = false;
    long iterations = 0;
};

// Maximum-likelihood reconstruction by the RrhoR fixed-point iteration with
// step dilution 0.5 on non-increase; stops when the log-likelihood improves
// by less than llh_tol or at the iteration cap (reported, never silent).
inline MleResult mle_reconstruct(std::span<const MeasurementRecord> records,
                                 const ReadoutParams& rp, const MleOptions& opts = {}) {
    if (records.empty()) throw std::invalid_argument("mle_reconstruct: no records");
    bool seen[3] = {false, false, false};
    double n_total = 0.0;
    for (const MeasurementRecord& rec : records) {
        rec.validate();
        seen[static_cast<int>(rec.basis)] = true;
        n_total += static_cast<double>(rec.shots);
    }
    if (!(seen[0] && seen[1] && seen[2])) {
        throw std::invalid_argument("mle_reconstruct: need all three standard bases");
    }
    const detail::EffectiveMap m = detail::effective_map(rp, opts.mode);

    Vec3 r{0.0, 0.0, 0.0};  // maximally mixed start, interior of the ball
    double llh = detail::log_likelihood(r, records, m);
    MleResult result;

    auto build_r_operator = [&](const Vec3& state) {
        detail::Mat2 acc{};
        for (const MeasurementRecord& rec : records) {
            const double f = detail::click_model(state, rec.basis, m);
            const detail::Mat2 e_click = detail::click_effect(rec.basis, m);
            const detail::Mat2 e_noclick = detail::Mat2::identity() + e_click.scaled(-1.0);
            const double n1 = static_cast<double>(rec.clicks);
            const double n0 = static_cast<double>(rec.shots - rec.clicks);
            if (n1 > 0.0 && f > 0.0) acc = acc + e_click.scaled(n1 / f);
            if (n0 > 0.0 && f < 1.0) acc = acc + e_noclick.scaled(n0 / (1.0 - f));
        }
        return acc.scaled(1.0 / n_total);
    };
    auto apply = [&](const detail::Mat2& op, const Vec3& state) {
        const detail::Mat2 rho = detail::Mat2::density(state);
        detail::Mat2 next = op * rho * op;
        const double tr = next.trace_real();
        Vec3 rn = next.scaled(1.0 / tr).bloch();
        const double nn = norm(rn);
        if (nn > 1.0) rn = (1.0 / nn) * rn;  // clip fp overshoot at the boundary
        return rn;
    };

    for (long iter = 0; iter < opts.max_iterations; ++iter) {
        const detail::Mat2 rop = build_r_operator(r);
        Vec3 candidate = apply(rop, r);
        double cand_llh = detail::log_likelihood(candidate, records, m);
        if (!(cand_llh > llh)) {
            // dilute: T = (I + alpha R)/(1 + alpha)
            double alpha = 0.5;
            bool improved = false;
            while (alpha > 1e-12) {
                const detail::Mat2 diluted =
                    (detail::Mat2::identity() + rop.scaled(alpha)).scaled(1.0 / (1.0 + alpha));
                candidate = apply(diluted, r);
                cand_llh = detail::log_likelihood(candidate, records, m);
                if (cand_llh > llh) {
                    improved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!improved) {  // numerical fixed point
                result.converged = true;
                result.iterations = iter;
                break;
            }
        }
        const double gain = cand_llh - llh;
        r = candidate;
        llh = cand_llh;
        result.iterations = iter + 1;
        if (gain < opts.llh_tol) {
            result.converged = true;
            break;
        }
    }
    result.rho = DensityMatrix::from_bloch(r);
    result.log_likelihood = llh;
    return result;
}

inline double log_likelihood_of(const DensityMatrix& rho,
                                std::span<const MeasurementRecord> records,
                                const ReadoutParams& rp, LikelihoodMode mode) {
    return detail::log_likelihood(rho.bloch(), records, detail::effective_map(rp, mode));
}

// Parametric bootstrap resample: counts drawn from Binomial(N_b, n_b/N_b)
// with a stream derived from (seed, resample index, basis), so results do not
// depend on evaluation order.
inline std::vector<MeasurementRecord> bootstrap_resample_records(
    std::span<const MeasurementRecord> records, std::uint64_t seed, long resample_index) {
    rng::Stream stream = rng::Stream(seed).child(rng::StreamTag::bootstrap).child(
        static_cast<std::uint64_t>(resample_index));
    std::vector<MeasurementRecord> out;
    out.reserve(records.size());
    for (std::size_t b = 0; b < records.size(); ++b) {
        const MeasurementRecord& rec = records[b];
        const double f = static_cast<double>(rec.clicks) / static_cast<double>(rec.shots);
        rng::Stream s = stream.child(b);
        out.push_back({rec.basis, rec.shots, s.binomial(rec.shots, f)});
    }
    return out;
}

struct BootstrapErrors {
    double sigma_purity = 0.0;
    double sigma_fidelity = 0.0;
    long skipped = 0;
};

// Sample standard deviations of purity and fidelity across MLE reruns on
// resampled counts. Non-converged resamples are skipped and counted; more
// than 1% skips is an error.
inline BootstrapErrors bootstrap_errors(std::span<const MeasurementRecord> records,
                                        const ReadoutParams& rp, const DensityMatrix& target,
                                        long n_resamples, std::uint64_t seed,
                                        const MleOptions& opts = {}) {
    if (n_resamples < 2) throw std::invalid_argument("bootstrap_errors: need >= 2 resamples");
    std::vector<double> purities, fidelities;
    purities.reserve(n_resamples);
    fidelities.reserve(n_resamples);
    long skipped = 0;
    for (long i = 0; i < n_resamples; ++i) {
        const std::vector<MeasurementRecord> resampled =
            bootstrap_resample_records(records, seed, i);
        const MleResult mle = mle_reconstruct(resampled, rp, opts);
        if (!mle.converged) {
            ++skipped;
            continue;
        }
        purities.push_back(purity(mle.rho));
        fidelities.push_back(fidelity(mle.rho, target));
    }
    if (skipped * 100 > n_resamples) {
        throw std::runtime_error("bootstrap_errors: more than 1% of resamples failed to converge");
    }
    auto stddev = [](const std::vector<double>& v) {
        const double n = static_cast<double>(v.size());
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= n;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return std::sqrt(ss / (n - 1.0));
    };
    return {stddev(purities), stddev(fidelities), skipped};
}

struct TomographyOptions {
    LikelihoodMode mode = LikelihoodMode::raw;
    long n_resamples = 1000;
    std::uint64_t bootstrap_seed = 1;
    MleOptions mle;

    TomographyOptions() { mle.mode = mode; }
};

struct TomographyResult {
    LinearInversionResult linear;
    DensityMatrix rho_mle;
    double log_likelihood = 0.0;
    bool mle_converged = false;
    long mle_iterations = 0;
    double purity = 0.0;
    double fidelity = 0.0;
    double sigma_purity = 0.0;
    double sigma_fidelity = 0.0;
    long n_resamples = 0;
    long bootstrap_skips = 0;
};

inline TomographyResult tomography_report(std::span<const MeasurementRecord> records,
                                          const ReadoutParams& rp, const DensityMatrix& target,
                                          TomographyOptions opts = {}) {
    opts.mle.mode = opts.mode;
    TomographyResult out;
    out.linear = linear_inversion(records, rp, opts.mode);
    const MleResult mle = mle_reconstruct(records, rp, opts.mle);
    out.rho_mle = mle.rho;
    out.log_likelihood = mle.log_likelihood;
    out.mle_converged = mle.converged;
    out.mle_iterations = mle.iterations;
    out.purity = purity(mle.rho);
    out.fidelity = fidelity(mle.rho, target);
    const BootstrapErrors be =
        bootstrap_errors(records, rp, target, opts.n_resamples, opts.bootstrap_seed, opts.mle);
    out.sigma_purity = be.sigma_purity;
    out.sigma_fidelity = be.sigma_fidelity;
    out.n_resamples = opts.n_resamples;
    out.bootstrap_skips = be.skipped;
    return out;
}

}  // namespace nucspin
