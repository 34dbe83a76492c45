#pragma once

// Scalar risk math: smoothing kernels, the smoothed hinge Upsilon, the
// modified chi-squared divergence and its conjugate, the weighted KDE and
// the kernel CVaR functional.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace drtruss {

using Vec = Eigen::VectorXd;

enum class KernelKind { uniform, triangular };

inline std::string to_string(KernelKind k) { return k == KernelKind::uniform ? "uniform" : "triangular"; }

inline KernelKind kernel_from_string(const std::string& s) {
    if (s == "uniform") return KernelKind::uniform;
    if (s == "triangular") return KernelKind::triangular;
    throw std::invalid_argument("unknown kernel '" + s + "'");
}

struct Kernel {
    KernelKind kind = KernelKind::uniform;
    double h = 1.0;  // bandwidth, J

    void check() const {
        if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("kernel bandwidth must be positive");
    }
};

/// Standardized kernel density k(y); both kernels are supported on [-1, 1].
inline double kernel_value(KernelKind kind, double y) {
    const double a = std::abs(y);
    if (a > 1.0) return 0.0;
    return kind == KernelKind::uniform ? 0.5 : 1.0 - a;
}

/// G_k(u), G~_k(u) and psi_k(u) = u G_k(u) - G~_k(u).
struct KernelComponents {
    double cdf = 0.0;
    double partial_moment = 0.0;
    double psi = 0.0;
};

inline KernelComponents kernel_components(KernelKind kind, double u) {
    KernelComponents r;
    if (u <= -1.0) {
        r.cdf = 0.0;
        r.partial_moment = 0.0;
    } else if (u >= 1.0) {
        r.cdf = 1.0;
        r.partial_moment = 0.0;
    } else if (kind == KernelKind::uniform) {
        r.cdf = 0.5 * (u + 1.0);
        r.partial_moment = 0.25 * (u * u - 1.0);
    } else if (u <= 0.0) {
        r.cdf = 0.5 * (u + 1.0) * (u + 1.0);
        r.partial_moment = u * u / 2.0 + u * u * u / 3.0 - 1.0 / 6.0;
    } else {
        r.cdf = 1.0 - 0.5 * (1.0 - u) * (1.0 - u);
        r.partial_moment = -1.0 / 6.0 + u * u / 2.0 - u * u * u / 3.0;
    }
    r.psi = u * r.cdf - r.partial_moment;
    return r;
}

/// Components evaluated at u = c / h.
inline KernelComponents upsilon_components(const Kernel& k, double c) { return kernel_components(k.kind, c / k.h); }

/// Smoothed hinge Upsilon_k(c) = h psi_k(c/h), in closed form.
inline double upsilon(const Kernel& k, double c) {
    const double h = k.h;
    if (c <= -h) return 0.0;
    if (c >= h) return c;
    if (k.kind == KernelKind::uniform) return (c + h) * (c + h) / (4.0 * h);
    if (c < 0.0) return (c + h) * (c + h) * (c + h) / (6.0 * h * h);
    return (h - c) * (h - c) * (h - c) / (6.0 * h * h) + c;
}

/// dUpsilon/dc = G_k(c/h).
inline double upsilon_derivative(const Kernel& k, double c) { return kernel_components(k.kind, c / k.h).cdf; }

// ---------------------------------------------------------------------------
// Divergence

/// Modified chi-squared: phi(t) = (t-1)^2 on t >= 0, +inf otherwise.
struct ModifiedChiSquared {
    static double phi(double t) {
        if (t < 0.0) return std::numeric_limits<double>::infinity();
        return (t - 1.0) * (t - 1.0);
    }
    /// lim_{t->inf} phi(t)/t
    static double recession() { return std::numeric_limits<double>::infinity(); }
    static double conjugate(double s) {
        const double p = std::max(s + 2.0, 0.0);
        return 0.25 * p * p - 1.0;
    }
};

inline double phi_star(double s) { return ModifiedChiSquared::conjugate(s); }

/// I_phi(w, w0) = sum_i w0_i phi(w_i / w0_i), with 0 phi(a/0) = a * recession and 0 phi(0/0) = 0.
template <class Div = ModifiedChiSquared>
double phi_divergence(const Vec& w, const Vec& w0) {
    if (w.size() != w0.size()) throw std::invalid_argument("phi_divergence: dimension mismatch");
    double total = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w0[i] > 0.0) {
            total += w0[i] * Div::phi(w[i] / w0[i]);
        } else if (w[i] != 0.0) {
            total += w[i] > 0.0 ? w[i] * Div::recession() : std::numeric_limits<double>::infinity();
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Risk specification

struct RiskSpec {
    Kernel kernel;
    double gamma = 0.95;
    double tau = 0.0;
    Vec w0;  // center weights

    void check(Eigen::Index n) const {
        kernel.check();
        if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
        if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::invalid_argument("tau must be nonnegative");
        if (w0.size() != n) throw std::invalid_argument("w0 has wrong length");
        if (w0.minCoeff() < 0.0 || std::abs(w0.sum() - 1.0) > 1e-12)
            throw std::invalid_argument("w0 must lie in the simplex");
    }

    static Vec uniform_weights(Eigen::Index n) { return Vec::Constant(n, 1.0 / static_cast<double>(n)); }
};

// ---------------------------------------------------------------------------
// Weighted KDE on the loss axis

/// p(y) = (1/h) sum_i w_i k((y - f_i)/h)
inline double kde_pdf(const Vec& values, const Vec& w, const Kernel& k, double y) {
    if (values.size() != w.size()) throw std::invalid_argument("kde_pdf: dimension mismatch");
    double p = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) p += w[i] * kernel_value(k.kind, (y - values[i]) / k.h);
    return p / k.h;
}

inline double kde_cdf(const Vec& values, const Vec& w, const Kernel& k, double y) {
    if (values.size() != w.size()) throw std::invalid_argument("kde_cdf: dimension mismatch");
    double p = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) p += w[i] * kernel_components(k.kind, (y - values[i]) / k.h).cdf;
    return p;
}

/// F(alpha) = alpha + 1/(1-gamma) sum_i w_i Upsilon(f_i - alpha)
inline double cvar_functional(const Vec& values, const Vec& w, const Kernel& k, double gamma, double alpha) {
    if (values.size() != w.size()) throw std::invalid_argument("cvar_functional: dimension mismatch");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) acc += w[i] * upsilon(k, values[i] - alpha);
    return alpha + acc / (1.0 - gamma);
}

}  // namespace drtruss
