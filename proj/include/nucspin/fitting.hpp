#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nucspin/math.hpp"

namespace nucspin {

// Ordered (t, y) samples with optional per-point standard deviations.
struct Dataset {
    std::vector<double> t;
    std::vector<double> y;
    std::vector<double> sigma;  // empty for unweighted fits

    void validate() const {
        if (t.size() != y.size()) throw std::invalid_argument("Dataset: t/y size mismatch");
        if (!sigma.empty() && sigma.size() != t.size()) {
            throw std::invalid_argument("Dataset: sigma size mismatch");
        }
        for (std::size_t i = 1; i < t.size(); ++i) {
            if (!(t[i] > t[i - 1])) {
                throw std::invalid_argument("Dataset: t must be strictly increasing");
            }
        }
        for (double s : sigma) {
            if (!(s > 0.0)) throw std::invalid_argument("Dataset: sigma values must be > 0");
        }
    }

    double span() const { return t.empty() ? 0.0 : t.back() - t.front(); }
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> params;
    std::vector<double> std_errors;  // empty when curvature is singular
    std::vector<double> covariance;  // row-major p x p, empty when singular
    double residual_norm = 0.0;      // sqrt(sum of squared weighted residuals)
    bool converged = false;
    int iterations = 0;
    bool singular = false;

    double param(const std::string& name) const { return params.at(index_of(name)); }
    double std_error(const std::string& name) const { return std_errors.at(index_of(name)); }

  private:
    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return i;
        }
        throw std::out_of_range("FitResult: no parameter named " + name);
    }
};

using ModelFn = std::function<double(double, std::span<const double>)>;

struct FitOptions {
    int max_iterations = 500;
    double cost_tol = 1e-12;   // relative cost change
    double grad_tol = 1e-10;   // infinity norm of the gradient
    std::function<void(int, double)> on_accept;  // (iteration, cost) after accepted steps
};

namespace detail {

// Gaussian elimination with partial pivoting for the small normal systems.
// Returns false when the matrix is numerically singular.
inline bool solve_dense(std::vector<double> a, std::vector<double> b, std::size_t n,
                        std::vector<double>& x) {
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return false;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t row = col + 1; row < n; ++row) {
            if (std::abs(a[row * n + col]) > std::abs(a[pivot * n + col])) pivot = row;
        }
        if (std::abs(a[pivot * n + col]) < 1e-14 * scale) return false;
        if (pivot != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a[col * n + k], a[pivot * n + k]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t row = col + 1; row < n; ++row) {
            const double factor = a[row * n + col] / a[col * n + col];
            for (std::size_t k = col; k < n; ++k) a[row * n + k] -= factor * a[col * n + k];
            b[row] -= factor * b[col];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i * n + k] * x[k];
        x[i] = s / a[i * n + i];
    }
    return true;
}

inline bool invert_dense(const std::vector<double>& a, std::size_t n, std::vector<double>& inv) {
    inv.assign(n * n, 0.0);
    for (std::size_t col = 0; col < n; ++col) {
        std::vector<double> e(n, 0.0);
        e[col] = 1.0;
        std::vector<double> x;
        if (!solve_dense(a, e, n, x)) return false;
        for (std::size_t row = 0; row < n; ++row) inv[row * n + col] = x[row];
    }
    return true;
}

}  // namespace detail

// Damped (Levenberg-Marquardt) least squares with numeric central-difference
// derivatives, step max(1e-7, 1e-7|theta|). Damping is raised on cost
// increase and lowered on success; accepted iterations never increase the
// cost. Standard errors come from the inverse curvature at the optimum scaled
// by the residual variance.
inline FitResult least_squares(const ModelFn& model, const Dataset& data,
                               std::vector<double> theta0, std::vector<std::string> names,
                               const FitOptions& opts = {}) {
    data.validate();
    const std::size_t n = data.t.size();
    const std::size_t p = theta0.size();
    if (p == 0) throw std::invalid_argument("least_squares: no parameters");
    if (names.size() != p) throw std::invalid_argument("least_squares: name/parameter mismatch");
    if (n < p) throw std::invalid_argument("least_squares: fewer points than parameters");

    auto weight = [&](std::size_t i) { return data.sigma.empty() ? 1.0 : 1.0 / data.sigma[i]; };
    auto residuals = [&](std::span<const double> theta, std::vector<double>& r) {
        r.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = (model(data.t[i], theta) - data.y[i]) * weight(i);
        }
    };
    auto cost_of = [&](std::span<const double> theta) {
        std::vector<double> r;
        residuals(theta, r);
        double c = 0.0;
        for (double v : r) c += v * v;
        return c;
    };
    auto jacobian = [&](const std::vector<double>& theta, std::vector<double>& jac) {
        jac.assign(n * p, 0.0);
        std::vector<double> th = theta;
        for (std::size_t j = 0; j < p; ++j) {
            const double h = std::max(1e-7, 1e-7 * std::abs(theta[j]));
            th[j] = theta[j] + h;
            std::vector<double> hi(n);
            for (std::size_t i = 0; i < n; ++i) hi[i] = model(data.t[i], th);
            th[j] = theta[j] - h;
            for (std::size_t i = 0; i < n; ++i) {
                jac[i * p + j] = (hi[i] - model(data.t[i], th)) / (2.0 * h) * weight(i);
            }
            th[j] = theta[j];
        }
    };

    std::vector<double> theta = std::move(theta0);
    double cost = cost_of(theta);
    double lambda = 1e-6;  // near-Gauss-Newton start; rejections raise it fast
    FitResult result;
    result.names = std::move(names);
    result.iterations = 0;

    std::vector<double> jac, r, grad(p), jtj(p * p), damped, delta;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        jacobian(theta, jac);
        residuals(theta, r);
        double grad_inf = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            double g = 0.0;
            for (std::size_t i = 0; i < n; ++i) g += jac[i * p + j] * r[i];
            grad[j] = g;
            grad_inf = std::max(grad_inf, std::abs(g));
        }
        if (grad_inf <= opts.grad_tol) {
            result.converged = true;
            break;
        }
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = a; b < p; ++b) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) s += jac[i * p + a] * jac[i * p + b];
                jtj[a * p + b] = s;
                jtj[b * p + a] = s;
            }
        }

        bool accepted = false;
        double cost_drop = 0.0;
        while (lambda <= 1e12) {
            damped = jtj;
            for (std::size_t j = 0; j < p; ++j) {
                damped[j * p + j] += lambda * std::max(jtj[j * p + j], 1e-30);
            }
            std::vector<double> neg_grad(p);
            for (std::size_t j = 0; j < p; ++j) neg_grad[j] = -grad[j];
            if (!detail::solve_dense(damped, neg_grad, p, delta)) {
                lambda *= 10.0;
                continue;
            }
            std::vector<double> trial(p);
            for (std::size_t j = 0; j < p; ++j) trial[j] = theta[j] + delta[j];
            const double trial_cost = cost_of(trial);
            if (trial_cost < cost && std::isfinite(trial_cost)) {
                cost_drop = cost - trial_cost;
                theta = std::move(trial);
                cost = trial_cost;
                lambda = std::max(lambda * 0.1, 1e-12);
                ++result.iterations;
                if (opts.on_accept) opts.on_accept(result.iterations, cost);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // Damping exhausted: no descent direction improves the cost.
            result.converged = true;
            break;
        }
        if (cost_drop <= opts.cost_tol * std::max(cost, 1.0)) {
            result.converged = true;
            break;
        }
    }

    result.params = theta;
    result.residual_norm = std::sqrt(cost);

    jacobian(theta, jac);
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = a; b < p; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += jac[i * p + a] * jac[i * p + b];
            jtj[a * p + b] = s;
            jtj[b * p + a] = s;
        }
    }
    std::vector<double> inv;
    if (!detail::invert_dense(jtj, p, inv)) {
        result.singular = true;
        return result;
    }
    const double s2 = (n > p) ? cost / static_cast<double>(n - p) : 0.0;
    result.covariance.resize(p * p);
    result.std_errors.resize(p);
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < p; ++b) result.covariance[a * p + b] = inv[a * p + b] * s2;
        result.std_errors[a] = std::sqrt(std::max(result.covariance[a * p + a], 0.0));
    }
    return result;
}

// sigma = sqrt(y(1-y)/N) binomial weights, floored so degenerate fractions
// (y = 0 or 1) keep a usable finite weight.
inline std::vector<double> binomial_sigmas(const std::vector<double>& y,
                                           const std::vector<double>& shots) {
    if (y.size() != shots.size()) throw std::invalid_argument("binomial_sigmas: size mismatch");
    std::vector<double> s(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(shots[i] > 0.0)) throw std::invalid_argument("binomial_sigmas: shots must be > 0");
        const double var = std::max(y[i] * (1.0 - y[i]), 0.25 / shots[i]);
        s[i] = std::sqrt(var / shots[i]);
    }
    return s;
}

// --- sinusoid fit: y = C + A cos(2 pi f t + phi), A >= 0 ------------------

namespace detail {

// Linear solve for (C, P, Q) at fixed frequency, model C + P cos - Q sin.
inline double sinusoid_linear_cost(const Dataset& data, double freq, double& c_out,
                                   double& p_out, double& q_out) {
    const std::size_t n = data.t.size();
    std::vector<double> a(9, 0.0), b(3, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = data.sigma.empty() ? 1.0 : 1.0 / data.sigma[i];
        const double c = std::cos(kTwoPi * freq * data.t[i]) * w;
        const double s = -std::sin(kTwoPi * freq * data.t[i]) * w;
        const double one = w;
        const double yv = data.y[i] * w;
        const double basis[3] = {one, c, s};
        for (int ii = 0; ii < 3; ++ii) {
            for (int jj = 0; jj < 3; ++jj) a[ii * 3 + jj] += basis[ii] * basis[jj];
            b[ii] += basis[ii] * yv;
        }
    }
    std::vector<double> x;
    if (!solve_dense(a, b, 3, x)) return std::numeric_limits<double>::infinity();
    c_out = x[0];
    p_out = x[1];
    q_out = x[2];
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = data.sigma.empty() ? 1.0 : 1.0 / data.sigma[i];
        const double m = x[0] + x[1] * std::cos(kTwoPi * freq * data.t[i]) -
                         x[2] * std::sin(kTwoPi * freq * data.t[i]);
        const double r = (m - data.y[i]) * w;
        cost += r * r;
    }
    return cost;
}

}  // namespace detail

// Fits y = C + A cos(2 pi f t + phi). Internally parameterized as
// (P, Q, f, C) with P = A cos phi, Q = A sin phi so A >= 0 by construction.
// Frequency initialized from the hint or from a 200-point coarse grid over
// [0.25, 4] cycles across the data span.
inline FitResult fit_sinusoid(const Dataset& data, std::optional<double> freq_hint = {}) {
    data.validate();
    if (data.t.size() < 8) throw std::invalid_argument("fit_sinusoid: need at least 8 points");
    const double span = data.span();
    if (!(span > 0.0)) throw std::invalid_argument("fit_sinusoid: zero time span");

    double f0 = 0.0, c0 = 0.0, p0 = 0.0, q0 = 0.0;
    if (freq_hint && *freq_hint > 0.0) {
        f0 = *freq_hint;
        detail::sinusoid_linear_cost(data, f0, c0, p0, q0);
    } else {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 200; ++i) {
            const double f = (0.25 + (4.0 - 0.25) * i / 199.0) / span;
            double c, p, q;
            const double cost = detail::sinusoid_linear_cost(data, f, c, p, q);
            if (cost < best) {
                best = cost;
                f0 = f;
                c0 = c;
                p0 = p;
                q0 = q;
            }
        }
        if (!std::isfinite(best)) {
            throw std::runtime_error("fit_sinusoid: frequency grid scan found no minimum");
        }
    }

    const ModelFn model = [](double t, std::span<const double> th) {
        return th[3] + th[0] * std::cos(kTwoPi * th[2] * t) - th[1] * std::sin(kTwoPi * th[2] * t);
    };
    FitResult inner = least_squares(model, data, {p0, q0, f0, c0}, {"P", "Q", "f", "C"});

    double pp = inner.params[0], qq = inner.params[1], ff = inner.params[2], cc = inner.params[3];
    if (ff < 0.0) {  // negative frequency is the same curve with Q negated
        ff = -ff;
        qq = -qq;
        if (!inner.covariance.empty()) {
            for (int k = 0; k < 4; ++k) {
                inner.covariance[1 * 4 + k] *= -1.0;
                inner.covariance[k * 4 + 1] *= -1.0;
                inner.covariance[2 * 4 + k] *= -1.0;
                inner.covariance[k * 4 + 2] *= -1.0;
            }
        }
    }
    const double amp = std::hypot(pp, qq);
    const double phi = std::atan2(qq, pp);

    FitResult out;
    out.names = {"A", "f", "phi", "C"};
    out.params = {amp, ff, phi, cc};
    out.residual_norm = inner.residual_norm;
    out.converged = inner.converged;
    out.iterations = inner.iterations;
    out.singular = inner.singular;
    if (!inner.singular && amp > 0.0) {
        // Delta method: (P, Q, f, C) -> (A, f, phi, C).
        const double g[16] = {pp / amp,        qq / amp,        0, 0,
                              0,               0,               1, 0,
                              -qq / (amp * amp), pp / (amp * amp), 0, 0,
                              0,               0,               0, 1};
        out.covariance.assign(16, 0.0);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                double s = 0.0;
                for (int a = 0; a < 4; ++a) {
                    for (int b = 0; b < 4; ++b) {
                        s += g[i * 4 + a] * inner.covariance[a * 4 + b] * g[j * 4 + b];
                    }
                }
                out.covariance[i * 4 + j] = s;
            }
        }
        out.std_errors.resize(4);
        for (int i = 0; i < 4; ++i) {
            out.std_errors[i] = std::sqrt(std::max(out.covariance[i * 4 + i], 0.0));
        }
    } else if (!inner.singular) {
        out.singular = true;  // zero amplitude: phase/amplitude errors undefined
    }
    return out;
}

// Fringe amplitude significance: amplitude at least two standard errors.
inline bool amplitude_significant(const FitResult& sinusoid_fit) {
    if (sinusoid_fit.singular || sinusoid_fit.std_errors.empty()) return false;
    return sinusoid_fit.param("A") >= 2.0 * sinusoid_fit.std_error("A");
}

struct VisibilityResult {
    double value = 0.0;
    bool saturated = false;
};

// (y_max - y_min)/(y_max + y_min) = A/C of a fitted sinusoid. A saturated
// fringe (C <= A) returns 1 with the flag set.
inline VisibilityResult visibility(const FitResult& sinusoid_fit) {
    const double a = sinusoid_fit.param("A");
    const double c = sinusoid_fit.param("C");
    if (a < 0.0) throw std::invalid_argument("visibility: negative amplitude");
    if (a == 0.0) return {0.0, false};
    if (c <= a) return {1.0, true};
    return {a / c, false};
}

// --- exponential fit -------------------------------------------------------

enum class ExponentialVariant { plain, offset };

// plain:  y = y0 exp(-t/tau)
// offset: y = y_inf + (y0 - y_inf) exp(-t/tau)
// tau > 0 enforced by log-parameterization; initial tau from a log-linear
// regression, falling back to a grid over [span/100, 10 span].
inline FitResult fit_exponential(const Dataset& data,
                                 ExponentialVariant variant = ExponentialVariant::plain) {
    data.validate();
    if (data.t.size() < 4) throw std::invalid_argument("fit_exponential: need at least 4 points");
    const double span = data.span();
    if (!(span > 0.0)) throw std::invalid_argument("fit_exponential: zero time span");
    const bool offset = variant == ExponentialVariant::offset;

    const double base = offset ? *std::min_element(data.y.begin(), data.y.end()) : 0.0;
    double tau0 = 0.0, amp0 = 0.0;
    {
        // log-linear regression on points with y - base > 0
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int m = 0;
        for (std::size_t i = 0; i < data.t.size(); ++i) {
            const double z = data.y[i] - base;
            if (z > 0.0) {
                const double ly = std::log(z);
                sx += data.t[i];
                sy += ly;
                sxx += data.t[i] * data.t[i];
                sxy += data.t[i] * ly;
                ++m;
            }
        }
        if (m >= 2) {
            const double denom = m * sxx - sx * sx;
            if (denom > 0.0) {
                const double slope = (m * sxy - sx * sy) / denom;
                if (slope < 0.0) {
                    tau0 = -1.0 / slope;
                    amp0 = std::exp((sy - slope * sx) / m);
                }
            }
        }
    }
    double yinf0 = base;
    if (!(tau0 > 0.0)) {
        // grid fallback over tau in [span/100, 10 span]
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 60; ++i) {
            const double tau = (span / 100.0) * std::pow(1000.0, i / 59.0);
            // linear solve for amplitude (and offset)
            const std::size_t n = data.t.size();
            double a00 = 0, a01 = 0, a11 = 0, b0 = 0, b1 = 0;
            for (std::size_t k = 0; k < n; ++k) {
                const double w = data.sigma.empty() ? 1.0 : 1.0 / data.sigma[k];
                const double e = std::exp(-data.t[k] / tau) * w;
                const double one = offset ? w : 0.0;
                a00 += e * e;
                a01 += e * one;
                a11 += one * one;
                b0 += e * data.y[k] * w;
                b1 += one * data.y[k] * w;
            }
            double amp, yinf = 0.0;
            if (offset) {
                const double det = a00 * a11 - a01 * a01;
                if (std::abs(det) < 1e-30) continue;
                amp = (b0 * a11 - b1 * a01) / det;
                yinf = (a00 * b1 - a01 * b0) / det;
            } else {
                if (a00 <= 0.0) continue;
                amp = b0 / a00;
            }
            double cost = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double w = data.sigma.empty() ? 1.0 : 1.0 / data.sigma[k];
                const double r = (yinf + amp * std::exp(-data.t[k] / tau) - data.y[k]) * w;
                cost += r * r;
            }
            if (cost < best) {
                best = cost;
                tau0 = tau;
                amp0 = amp;
                yinf0 = yinf;
            }
        }
        if (!(tau0 > 0.0)) tau0 = span;  // last resort for fully degenerate data
    }

    FitResult inner;
    if (offset) {
        const ModelFn model = [](double t, std::span<const double> th) {
            return th[2] + (th[0] - th[2]) * std::exp(-t * std::exp(-th[1]));
        };
        inner = least_squares(model, data, {amp0 + yinf0, std::log(tau0), yinf0},
                              {"y0", "u", "y_inf"});
    } else {
        const ModelFn model = [](double t, std::span<const double> th) {
            return th[0] * std::exp(-t * std::exp(-th[1]));
        };
        inner = least_squares(model, data, {amp0, std::log(tau0)}, {"y0", "u"});
    }

    FitResult out;
    out.names = offset ? std::vector<std::string>{"y0", "tau", "y_inf"}
                       : std::vector<std::string>{"y0", "tau"};
    const double tau = std::exp(inner.params[1]);
    out.params = inner.params;
    out.params[1] = tau;
    out.residual_norm = inner.residual_norm;
    out.converged = inner.converged;
    out.iterations = inner.iterations;
    out.singular = inner.singular;
    if (!inner.singular) {
        const std::size_t p = inner.params.size();
        out.covariance = inner.covariance;
        for (std::size_t k = 0; k < p; ++k) {  // u -> tau row/column scaling
            out.covariance[1 * p + k] *= tau;
            out.covariance[k * p + 1] *= tau;
        }
        out.std_errors.resize(p);
        for (std::size_t k = 0; k < p; ++k) {
            out.std_errors[k] = std::sqrt(std::max(out.covariance[k * p + k], 0.0));
        }
    }
    return out;
}

}  // namespace nucspin
