#pragma once

// Property sweeps shared by `drtruss verify` and the acceptance runner: conic
// blocks against closed forms, primal against dual worst-case oracles, and the
// member-cone compliance against linear solves.

#include "drtruss/formulations.hpp"

#include <chrono>
#include <functional>
#include <random>
#include <string>

namespace drtruss {

struct CheckResult {
    std::string name;
    bool pass = false;
    double max_error = 0.0;  // in the units of the tolerance
    double tolerance = 0.0;
    int cases = 0;
    double seconds = 0.0;
    std::string detail;
};

struct CheckTolerances {
    double upsilon = 1e-6;     // absolute, times max(1, h)
    double conjugate = 1e-7;   // absolute
    double oracle = 1e-6;      // relative
    double compliance = 1e-6;  // relative
    double single_bar = 1e-9;  // relative
    double anchor = 1e-8;      // absolute
    double quadrature = 1e-6;  // absolute
};

namespace detail {

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

inline void note_worst(CheckResult& r, double err, const std::string& where) {
    if (!(err <= r.max_error)) {  // NaN counts as worst
        r.max_error = std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
        r.detail = where;
    }
}

// Block checks compare against closed forms to 1e-7..1e-9, below the default solver gap.
inline conic::SolverSettings tightened(conic::SolverSettings st, double tol = 1e-10) {
    st.tol_gap = std::min(st.tol_gap, tol);
    st.tol_feas = std::min(st.tol_feas, tol);
    return st;
}

}  // namespace detail

using UpsilonFn = std::function<double(const Kernel&, double)>;

/// Standalone Upsilon programs at `count` random c in [-3h, 3h] for each h, both kernels.
inline CheckResult check_upsilon_blocks(int count, std::vector<double> hs, double tol, std::uint64_t seed,
                                        const conic::SolverSettings& st = {}, UpsilonFn closed = nullptr) {
    if (!closed) closed = [](const Kernel& k, double c) { return upsilon(k, c); };
    detail::Stopwatch sw;
    CheckResult r{"upsilon_blocks"};
    r.tolerance = tol;
    std::mt19937_64 rng(seed);
    for (auto kind : {KernelKind::uniform, KernelKind::triangular})
        for (double h : hs) {
            std::uniform_real_distribution<double> U(-3.0 * h, 3.0 * h);
            const Kernel k{kind, h};
            for (int t = 0; t < count; ++t) {
                const double c = U(rng);
                const auto sol = conic::solve(build_upsilon_program(k, c), st);
                const double err = sol.optimal() ? std::abs(sol.objective - closed(k, c)) / std::max(1.0, h)
                                                 : std::numeric_limits<double>::infinity();
                detail::note_worst(r, err, to_string(kind) + " h=" + std::to_string(h) + " c=" + std::to_string(c) +
                                               " status=" + conic::to_string(sol.status));
                ++r.cases;
            }
        }
    r.pass = r.max_error <= tol;
    r.seconds = sw.seconds();
    return r;
}

/// Conjugate block, plain and shifted, at lambda = 1 for `count` random y in [-10, 10].
inline CheckResult check_conjugate_block(int count, double tol, std::uint64_t seed, const conic::SolverSettings& st = {}) {
    detail::Stopwatch sw;
    CheckResult r{"conjugate_block"};
    r.tolerance = tol;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    const auto tight = detail::tightened(st);
    for (int t = 0; t < count; ++t) {
        const double y = U(rng);
        for (bool shifted : {false, true}) {
            const auto sol = conic::solve(build_conjugate_program(y, shifted), tight);
            const double err =
                sol.optimal() ? std::abs(sol.objective - phi_star(y)) : std::numeric_limits<double>::infinity();
            detail::note_worst(r, err, (shifted ? "shifted y=" : "y=") + std::to_string(y));
            ++r.cases;
        }
    }
    r.pass = r.max_error <= tol;
    r.seconds = sw.seconds();
    return r;
}

/// Primal support enumeration against the dual golden-section search on random instances
/// (n <= 8, tau in (0, 0.9], uniform w0), plus the two-point closed form.
inline CheckResult check_oracle_agreement(int count, double tol, std::uint64_t seed) {
    detail::Stopwatch sw;
    CheckResult r{"oracle_agreement"};
    r.tolerance = tol;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> nd(2, 8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int t = 0; t < count; ++t) {
        const int n = nd(rng);
        const double tau = 0.9 * (1.0 - U(rng));
        Vec f(n);
        for (int i = 0; i < n; ++i) f[i] = 1e3 * U(rng);
        const Vec w0 = RiskSpec::uniform_weights(n);
        const double p = worst_case_expectation_primal(f, w0, tau).value;
        const double d = worst_case_expectation_dual(f, w0, tau);
        detail::note_worst(r, std::abs(p - d) / std::max(1.0, std::abs(d)),
                           "n=" + std::to_string(n) + " tau=" + std::to_string(tau));
        ++r.cases;
    }
    Vec f(2);
    f << 0.0, 1.0;
    const double exact = (1.0 + std::sqrt(0.5)) / 2.0;
    const Vec w0 = RiskSpec::uniform_weights(2);
    detail::note_worst(r, std::abs(worst_case_expectation_primal(f, w0, 0.5).value - exact), "two-point primal");
    detail::note_worst(r, std::abs(worst_case_expectation_dual(f, w0, 0.5) - exact), "two-point dual");
    r.cases += 2;
    r.pass = r.max_error <= tol;
    r.seconds = sw.seconds();
    return r;
}

/// Small random grid truss with m <= max_members, left column supported.
inline TrussModel random_small_truss(std::mt19937_64& rng, int max_members = 20) {
    std::uniform_int_distribution<int> dim(2, 4), lev(1, 2);
    for (;;) {
        const int nx = dim(rng), ny = dim(rng), level = lev(rng);
        std::vector<int> fixed;
        for (int j = 0; j < ny; ++j) fixed.push_back(j * nx);
        try {
            auto t = build_grid_ground_structure(nx, ny, 1.0, fixed, level, 20e9, 1e-5);
            if (t.num_members() <= max_members) return t;
        } catch (const std::invalid_argument&) {
        }
    }
}

/// Member-cone program at fixed random feasible designs against linear-solve compliance, plus the
/// single-bar case 100 kN / 100 mm^2 / 1 m / 20 GPa = 5000 J.
inline CheckResult check_compliance_blocks(int count, double tol, double tol_single, std::uint64_t seed,
                                           const conic::SolverSettings& st = {}) {
    detail::Stopwatch sw;
    CheckResult r{"compliance_blocks"};
    r.tolerance = tol;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.1, 1.0), N(-1.0, 1.0);
    for (int t = 0; t < count; ++t) {
        const auto model = random_small_truss(rng);
        Design x{Eigen::VectorXd(model.num_members())};
        for (int j = 0; j < model.num_members(); ++j) x.x[j] = U(rng);
        x.x *= U(rng) * model.volume_cap / model.lengths.dot(x.x);  // inside X
        Eigen::VectorXd xi(model.num_dofs());
        for (int k = 0; k < xi.size(); ++k) xi[k] = 1e5 * N(rng);
        const double c = compliance(model, x, xi);
        const auto inst = build_compliance_at(model, x, xi);
        const auto sol = conic::solve(inst.program, st);
        const double err = sol.optimal() ? std::abs(inst.objective_si(sol) - c) / c : std::numeric_limits<double>::infinity();
        detail::note_worst(r, err, model.name + " m=" + std::to_string(model.num_members()));
        ++r.cases;
    }
    const auto tight = detail::tightened(st);
    const auto bar = build_single_bar(1.0, 20e9, 100e-6);
    const Eigen::VectorXd xi = Eigen::VectorXd::Constant(1, 100e3);
    const auto inst = build_compliance_at(bar, Design{Eigen::VectorXd::Constant(1, 100e-6)}, xi);
    const auto sol = conic::solve(inst.program, tight);
    const double e1 = sol.optimal() ? std::abs(inst.objective_si(sol) - 5000.0) / 5000.0 : 1.0;
    const auto inst2 = build_compliance_min(bar, xi);
    const auto sol2 = conic::solve(inst2.program, tight);
    const double e2 = sol2.optimal() ? std::abs(inst2.objective_si(sol2) - 5000.0) / 5000.0 : 1.0;
    const bool single_ok = e1 <= tol_single && e2 <= tol_single;
    if (!single_ok) {
        char buf[64];
        std::snprintf(buf, sizeof buf, " single-bar error %.3e", std::max(e1, e2));
        r.detail += buf;
    }
    ++r.cases;
    r.pass = r.max_error <= tol && single_ok;
    r.seconds = sw.seconds();
    return r;
}

/// Single-sample smoothed CVaR at f = 0, h = 10, gamma = 0.95: uniform 9.5 (analytic) and the
/// triangular ternary-search value against tail quadrature of the triangular density.
inline CheckResult check_cvar_anchors(double tol_uniform, double tol_quad, CvarResult* uni = nullptr,
                                      CvarResult* tri = nullptr, double* tri_quad = nullptr) {
    detail::Stopwatch sw;
    CheckResult r{"cvar_anchors"};
    r.tolerance = tol_uniform;
    const Vec f = Vec::Zero(1), w = Vec::Ones(1);
    RiskSpec ru{Kernel{KernelKind::uniform, 10.0}, 0.95, 0.0, w};
    RiskSpec rt{Kernel{KernelKind::triangular, 10.0}, 0.95, 0.0, w};
    const auto cu = worst_case_cvar(f, ru);
    const auto ct = worst_case_cvar(f, rt);
    const double q = kde_cvar_by_quadrature(f, w, rt.kernel, 0.95);
    const double eu = std::abs(cu.value - 9.5), et = std::abs(ct.value - q);
    r.max_error = eu;
    r.pass = eu <= tol_uniform && et <= tol_quad;
    r.cases = 2;
    char buf[160];
    std::snprintf(buf, sizeof buf, "uniform %.12f, triangular %.14f vs quadrature %.14f", cu.value, ct.value, q);
    r.detail = buf;
    if (uni) *uni = cu;
    if (tri) *tri = ct;
    if (tri_quad) *tri_quad = q;
    r.seconds = sw.seconds();
    return r;
}

inline std::vector<CheckResult> run_property_suite(const CheckTolerances& tol, std::uint64_t seed, int scale = 1,
                                                   const conic::SolverSettings& st = {}) {
    std::vector<CheckResult> out;
    out.push_back(check_upsilon_blocks(100 * scale, {1.0, 10.0, 30.0}, tol.upsilon, seed, st));
    out.push_back(check_conjugate_block(100 * scale, tol.conjugate, seed + 1, st));
    out.push_back(check_oracle_agreement(10 * scale, tol.oracle, seed + 2));
    out.push_back(check_compliance_blocks(5 * scale, tol.compliance, tol.single_bar, seed + 3, st));
    out.push_back(check_cvar_anchors(tol.anchor, tol.quadrature));
    return out;
}

inline std::string format_check(const CheckResult& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-18s %s cases=%d max_err=%.3e tol=%.1e time=%.2fs%s%s", r.name.c_str(),
                  r.pass ? "PASS" : "FAIL", r.cases, r.max_error, r.tolerance, r.seconds, r.detail.empty() ? "" : "  ",
                  r.detail.c_str());
    return buf;
}

}  // namespace drtruss
