#pragma once

// Low-dimensional reference computations used to check the conic models:
// worst-case expectations over the chi-squared weight ball (primal and dual),
// worst-case kernel CVaR, KDE tail quadrature and post-solve validation.

#include "drtruss/risk_kernels.hpp"
#include "drtruss/sampling.hpp"
#include "drtruss/truss_model.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace drtruss {

// ---------------------------------------------------------------------------
// Projections

/// Euclidean projection onto {w >= 0, sum w = 1}.
inline Vec project_simplex(const Vec& p) {
    const Eigen::Index n = p.size();
    std::vector<double> u(p.data(), p.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, theta = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        css += u[k];
        const double t = (css - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) theta = t;
    }
    return (p.array() - theta).max(0.0).matrix();
}

/// Euclidean projection onto the ellipsoid sum (w_i - c_i)^2 / c_i <= tau (c > 0).
inline Vec project_chi2_ball(const Vec& p, const Vec& c, double tau) {
    const Vec d = p - c;
    auto div = [&](double mu) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            const double r = c[i] / (c[i] + 2.0 * mu);
            s += r * r * d[i] * d[i] / c[i];
        }
        return s;
    };
    if (div(0.0) <= tau) return p;
    double lo = 0.0, hi = 1.0;
    while (div(hi) > tau) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-300; ++it) {
        const double mid = 0.5 * (lo + hi);
        (div(mid) > tau ? lo : hi) = mid;
    }
    Vec w(p.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) w[i] = c[i] + c[i] / (c[i] + 2.0 * hi) * d[i];
    return w;
}

/// Dykstra's alternating projections onto simplex and ball.
inline Vec project_weight_set(const Vec& p, const Vec& w0, double tau, double tol = 1e-12, int max_iter = 10000) {
    Vec x = p, P = Vec::Zero(p.size()), Q = Vec::Zero(p.size());
    for (int it = 0; it < max_iter; ++it) {
        const Vec y = project_chi2_ball(x + P, w0, tau);
        P = x + P - y;
        const Vec xn = project_simplex(y + Q);
        Q = y + Q - xn;
        const double change = (xn - x).lpNorm<Eigen::Infinity>();
        x = xn;
        if (change < tol) break;
    }
    return x;
}

// ---------------------------------------------------------------------------
// Worst-case expectation

struct WorstCaseResult {
    double value = 0.0;
    Vec weights;
};

namespace detail {

// KKT point for a given support S: w_i = w0_i t_i with t_i = 1 + a (f_i - eta) on S and 0
// elsewhere, the simplex and divergence constraints tight. Returns the largest sign violation
// (t < 0 on S, t > 0 off S) relative to 1 + a range; the point is optimal when it is zero.
inline double kkt_on_support(const Vec& f, const Vec& w0, double tau, const std::vector<char>& in, Vec& w) {
    const double inf = std::numeric_limits<double>::infinity();
    double W = 0.0, F = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i)
        if (in[i]) {
            W += w0[i];
            F += w0[i] * f[i];
        }
    if (!(W > 0.0)) return inf;
    const double mu = F / W;
    double V = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i)
        if (in[i]) V += w0[i] * (f[i] - mu) * (f[i] - mu);
    const double slack = tau - (1.0 - W) / W;
    if (slack < 0.0) return inf;
    w = Vec::Zero(f.size());
    if (V <= 0.0) {
        // Constant on S: optimal only if nothing outside S is larger.
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            if (in[i])
                w[i] = w0[i] / W;
            else if (f[i] > mu)
                return inf;
        }
        return 0.0;
    }
    const double a = std::sqrt(slack / V);
    const double eta = mu - (1.0 - W) / (a * W);
    const double scale = 1.0 + a * (f.maxCoeff() - f.minCoeff());
    double viol = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double t = 1.0 + a * (f[i] - eta);
        if (in[i]) {
            viol = std::max(viol, -t);
            w[i] = w0[i] * std::max(t, 0.0);
        } else {
            viol = std::max(viol, t);
        }
    }
    return viol / scale;
}

}  // namespace detail

/// max_w sum w_i f_i over the simplex intersected with the modified chi-squared ball of radius tau.
/// The maximizer is supported on an upper set of f (ties enter together); each candidate set
/// has a closed-form KKT point, and the first one with consistent signs is optimal.
inline WorstCaseResult worst_case_expectation_primal(const Vec& f, const Vec& w0, double tau) {
    const Eigen::Index n = f.size();
    if (w0.size() != n) throw std::invalid_argument("worst_case_expectation_primal: dimension mismatch");
    WorstCaseResult r;
    if (tau <= 0.0 || n == 1 || f.maxCoeff() == f.minCoeff()) {
        r.weights = w0;
        r.value = w0.dot(f);
        return r;
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return f[a] > f[b]; });
    std::vector<char> in(static_cast<std::size_t>(n), 0);
    double best_viol = std::numeric_limits<double>::infinity();
    Vec w;
    for (Eigen::Index k = 0; k < n; ++k) {
        in[order[k]] = 1;
        if (k + 1 < n && f[order[k + 1]] == f[order[k]]) continue;  // ties enter together
        if (w0[order[k]] == 0.0) continue;
        const double viol = detail::kkt_on_support(f, w0, tau, in, w);
        if (viol < best_viol) {
            best_viol = viol;
            r.weights = w;
        }
        if (viol <= 1e-12) break;
    }
    r.value = r.weights.dot(f);
    return r;
}

/// min over lambda > 0, eta of  tau lambda + eta + lambda sum w0_i phi*((f_i - eta)/lambda),
/// by golden-section search on log(lambda) around an inner golden-section search on eta.
inline double worst_case_expectation_dual(const Vec& f, const Vec& w0, double tau) {
    if (w0.size() != f.size()) throw std::invalid_argument("worst_case_expectation_dual: dimension mismatch");
    const double fmin = f.minCoeff(), fmax = f.maxCoeff();
    if (tau <= 0.0) return w0.dot(f);
    if (fmax == fmin) return fmax;

    auto d = [&](double lambda, double eta) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < f.size(); ++i) s += w0[i] * phi_star((f[i] - eta) / lambda);
        return tau * lambda + eta + lambda * s;
    };
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    auto golden = [g](auto&& fn, double a, double b, int iters) {
        double c = b - g * (b - a), e = a + g * (b - a);
        double fc = fn(c), fe = fn(e);
        for (int it = 0; it < iters; ++it) {
            if (fc <= fe) {
                b = e;
                e = c;
                fe = fc;
                c = b - g * (b - a);
                fc = fn(c);
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + g * (b - a);
                fe = fn(e);
            }
        }
        return std::min(fc, fe);
    };
    auto inner = [&](double loglam) {
        const double lambda = std::exp(loglam);
        return golden([&](double eta) { return d(lambda, eta); }, fmin, fmax, 160);
    };
    const double R = fmax - fmin;
    const double lo = std::log(1e-10 * R), hi = std::log(1e6 * R / std::sqrt(tau));
    const double best = golden(inner, lo, hi, 160);
    // As lambda -> 0 with eta = max f the dual tends to max f (the vertex value).
    return std::min(best, fmax);
}

// ---------------------------------------------------------------------------
// CVaR

struct CvarResult {
    double value = 0.0;
    double alpha = 0.0;
    Vec weights;  // worst-case weights at alpha
};

/// min over alpha of alpha + 1/(1-gamma) WorstExp(Upsilon(f - alpha)), by ternary search on
/// [min f - 2h, max f + 2h] followed by golden-section polish of the final bracket.
inline CvarResult worst_case_cvar(const Vec& values, const RiskSpec& risk) {
    risk.check(values.size());
    const Kernel& k = risk.kernel;
    auto F = [&](double alpha, Vec* wout = nullptr) {
        Vec u(values.size());
        for (Eigen::Index i = 0; i < values.size(); ++i) u[i] = upsilon(k, values[i] - alpha);
        auto wc = worst_case_expectation_primal(u, risk.w0, risk.tau);
        if (wout) *wout = wc.weights;
        return alpha + wc.value / (1.0 - risk.gamma);
    };
    double a = values.minCoeff() - 2.0 * k.h, b = values.maxCoeff() + 2.0 * k.h;
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    for (int it = 0; it < 300 && b - a > 1e-13 * scale; ++it) {
        const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
        if (F(m1) <= F(m2))
            b = m2;
        else
            a = m1;
    }
    // Local polish: F is convex, so the best of a small grid on the final bracket is kept.
    CvarResult r;
    r.alpha = 0.5 * (a + b);
    r.value = F(r.alpha, &r.weights);
    for (double t : {a, b}) {
        Vec w;
        const double v = F(t, &w);
        if (v < r.value) {
            r.value = v;
            r.alpha = t;
            r.weights = w;
        }
    }
    return r;
}

/// Worst-case expectation of the values themselves.
inline WorstCaseResult worst_case_mean(const Vec& values, const RiskSpec& risk) {
    return worst_case_expectation_primal(values, risk.w0, risk.tau);
}

/// CVaR of the weighted KDE by tail quadrature: VaR from bisection on the KDE CDF, then
/// CVaR = VaR + 1/(1-gamma) * integral_{VaR}^{inf} (y - VaR) p(y) dy by adaptive Gauss-Kronrod.
inline double kde_cvar_by_quadrature(const Vec& values, const Vec& w, const Kernel& k, double gamma) {
    double lo = values.minCoeff() - k.h, hi = values.maxCoeff() + k.h;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (kde_cdf(values, w, k, mid) < gamma ? lo : hi) = mid;
    }
    const double var = 0.5 * (lo + hi);
    // Split at every kink of the piecewise polynomial density so each panel is smooth.
    std::vector<double> knots{var};
    for (Eigen::Index i = 0; i < values.size(); ++i)
        for (double off : {-k.h, 0.0, k.h}) {
            const double t = values[i] + off;
            if (t > var) knots.push_back(t);
        }
    std::sort(knots.begin(), knots.end());
    double tail = 0.0;
    using boost::math::quadrature::gauss_kronrod;
    for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
        if (knots[s + 1] <= knots[s]) continue;
        tail += gauss_kronrod<double, 31>::integrate(
            [&](double y) { return (y - var) * kde_pdf(values, w, k, y); }, knots[s], knots[s + 1], 15, 1e-14);
    }
    return var + tail / (1.0 - gamma);
}

/// Empirical CVaR of a weighted discrete distribution: min_alpha alpha + E[(f - alpha)^+]/(1-gamma),
/// evaluated at the gamma-quantile after sorting.
inline double discrete_cvar(const Vec& values, const Vec& w, double gamma) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    double cum = 0.0, var = values[order.back()];
    for (auto i : order) {
        cum += w[i];
        if (cum >= gamma - 1e-15) {
            var = values[i];
            break;
        }
    }
    double tail = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) tail += w[i] * std::max(values[i] - var, 0.0);
    return var + tail / (1.0 - gamma);
}

// ---------------------------------------------------------------------------
// Post-solve validation

struct ValidationCheck {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    Vec worst_weights;
    Vec compliances;  // J, per sample
    double worst_mean = 0.0;
    double worst_cvar = 0.0;
    double cvar_alpha = 0.0;
    std::vector<std::string> warnings;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
    }

    void add(std::string name, double measured, double tol) {
        checks.push_back({std::move(name), measured, tol, std::abs(measured) <= tol});
    }

    std::string to_string() const {
        std::string out;
        char buf[256];
        for (const auto& c : checks) {
            std::snprintf(buf, sizeof buf, "%-28s measured=% .6e tol=%.3e %s\n", c.name.c_str(), c.measured, c.tolerance,
                          c.pass ? "PASS" : "FAIL");
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "worst_mean_J=%.12g\nworst_cvar_J=%.12g\ncvar_alpha_J=%.12g\n", worst_mean,
                      worst_cvar, cvar_alpha);
        out += buf;
        if (worst_weights.size()) {
            std::snprintf(buf, sizeof buf, "min_worst_weight=%.6e\n", worst_weights.minCoeff());
            out += buf;
        }
        for (const auto& w : warnings) out += "warning: " + w + "\n";
        out += passed() ? "result: PASS\n" : "result: FAIL\n";
        return out;
    }
};

/// Per-sample compliances (J) of a design.
inline Vec sample_compliances(const TrussModel& model, const LoadSampleSet& samples, const Design& x) {
    Vec c(samples.n());
    for (int i = 0; i < samples.n(); ++i)
        c[i] = compliance(model, x, load_vector(model, samples.loaded_dofs, samples.samples[i]));
    return c;
}

/// Recomputes compliances by linear solves and the worst-case mean / CVaR by the oracles above.
/// `objective` is the solver's worst-case mean (NaN to skip that comparison); `nu` may be +inf.
inline ValidationReport validate_solution(const TrussModel& model, const LoadSampleSet& samples, const RiskSpec& risk,
                                          double nu, const Design& x, double objective) {
    ValidationReport rep;
    const double vol = model.lengths.dot(x.x);
    rep.add("volume_excess_rel", std::max(vol / model.volume_cap - 1.0, 0.0), 1e-8);
    rep.add("negative_area_rel", std::max(-x.x.minCoeff(), 0.0) / std::max(x.x.cwiseAbs().maxCoeff(), 1e-300), 1e-9);

    rep.compliances = sample_compliances(model, samples, x);
    if (!rep.compliances.allFinite()) {
        rep.add("finite_compliance", std::numeric_limits<double>::infinity(), 0.0);
        return rep;
    }
    const auto wm = worst_case_mean(rep.compliances, risk);
    rep.worst_mean = wm.value;
    rep.worst_weights = wm.weights;
    const auto cv = worst_case_cvar(rep.compliances, risk);
    rep.worst_cvar = cv.value;
    rep.cvar_alpha = cv.alpha;

    if (!std::isnan(objective))
        rep.add("worst_mean_vs_objective", rep.worst_mean - objective, 1e-5 * (1.0 + std::abs(objective)));
    if (std::isfinite(nu)) rep.add("cvar_excess_over_nu", std::max(rep.worst_cvar - nu, 0.0), 1e-5 * (1.0 + std::abs(nu)));
    if (risk.tau > 0.0 && wm.weights.minCoeff() <= 1e-9)
        rep.warnings.push_back("worst-case weights touch the simplex boundary; the strict-interior assumption is not met");
    return rep;
}

}  // namespace drtruss
