// Acceptance runner. Prints one PASS/FAIL line per criterion; `acceptance 3 6` runs a subset.
// Exit status is the number of failed criteria (capped at 100).

#include "drtruss/experiment.hpp"
#include "drtruss/property_checks.hpp"

#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>

using namespace drtruss;

namespace {

struct Line {
    bool pass = false;
    std::string text;
};

Line line(bool pass, const char* fmt, auto... args) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return {pass, buf};
}

double since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig two_bar_config() {
    ExperimentConfig c;
    c.truss.generator = "two_bar";
    c.truss.E_GPa = 20;
    c.truss.Vbar_mm3 = 1000;
    GaussianComponent g{Eigen::Vector2d(100.0, 0.0), Eigen::Matrix2d()};
    g.cov << 150.0, 50.0, 50.0, 100.0;
    c.samples.mixture = {{g}, {50}};
    c.samples.seed = 1;
    c.kernel = KernelKind::uniform;
    c.h_J = 10;
    c.gamma = 0.95;
    c.tau = 0.3;
    c.sweep.nu_count = 20;
    c.threads = 4;
    c.timing = false;
    return c;
}

ExperimentConfig grid_config(int n) {
    ExperimentConfig c;
    c.truss = {.generator = "grid", .nx = 6, .ny = 5, .level = 5, .spacing_m = 1.0, .fixed_nodes = {0, 24},
               .E_GPa = 20, .Vbar_mm3 = 20000, .load_node = 29};
    Eigen::Matrix2d cov = Eigen::Vector2d(100.0, 150.0).asDiagonal();
    c.samples.mixture = {{{Eigen::Vector2d(90.0, 10.0), cov}, {Eigen::Vector2d(-10.0, 40.0), cov}}, {n / 2, n - n / 2}};
    c.samples.seed = 1;
    c.h_J = 30;
    c.gamma = 0.95;
    c.tau = 0.3;
    c.solver.tol_feas = 1e-8;
    c.solver.tol_gap = 1e-8;
    return c;
}

Line from_check(const CheckResult& r, const char* what, double extra_limit_s = 0.0) {
    bool pass = r.pass;
    std::string limit;
    if (extra_limit_s > 0.0) {
        pass &= r.seconds <= extra_limit_s;
        limit = " limit=" + fmt_g(extra_limit_s, 3) + "s";
    }
    return line(pass, "%s: cases=%d max_err=%.3e tol=%.1e time=%.2fs%s%s%s", what, r.cases, r.max_error, r.tolerance,
                r.seconds, limit.c_str(), r.detail.empty() ? "" : "  worst: ", r.detail.c_str());
}

// 1-5: property sweeps at full size
Line criterion1() {
    return from_check(check_upsilon_blocks(1000, {1.0, 10.0, 30.0}, 1e-6, 101), "Upsilon blocks vs closed form", 60.0);
}
Line criterion2() { return from_check(check_conjugate_block(1000, 1e-7, 102), "conjugate block vs closed form"); }
Line criterion3() { return from_check(check_oracle_agreement(100, 1e-6, 103), "primal vs dual worst-case oracle"); }
Line criterion4() {
    return from_check(check_compliance_blocks(50, 1e-6, 1e-9, 104), "member cones vs linear-solve compliance");
}
Line criterion5() {
    const auto r = check_cvar_anchors(1e-8, 1e-6);
    return line(r.pass, "single-sample CVaR anchors: %s", r.detail.c_str());
}

struct TwoBarRun {
    Front front;
    std::string pareto_csv, designs_csv, samples_csv;
    double seconds = 0.0;
};

TwoBarRun run_two_bar(int threads) {
    const auto t0 = std::chrono::steady_clock::now();
    auto c = two_bar_config();
    const auto model = make_model(c.truss);
    const auto s = make_samples(c, model);
    const auto r = make_risk(c, s.n());
    TwoBarRun out;
    out.front = run_front(model, s, r, c.sweep, c.solver, threads);
    out.seconds = since(t0);
    std::ostringstream p, d, sm;
    write_pareto_csv(p, out.front, false);
    for (const auto& pt : out.front.points) write_design_csv(d, pt.design);
    write_samples_csv(sm, s);
    out.pareto_csv = p.str();
    out.designs_csv = d.str();
    out.samples_csv = sm.str();
    return out;
}

Line criterion6() {
    const auto run = run_two_bar(4);
    const auto& pts = run.front.points;
    const auto model = make_model(two_bar_config().truss);
    int invalid = 0, failed = 0;
    double worst_rise = 0.0, worst_volume = 0.0, worst_area_drop = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        failed += p.status != conic::SolveStatus::optimal;
        invalid += !p.valid;
        worst_volume = std::max(worst_volume, 1.0 - model.lengths.dot(p.design.x) / model.volume_cap);
        if (i == 0) continue;
        // nu increases with i: the mean must not rise, the lower area must not grow
        worst_rise = std::max(worst_rise, (p.worst_mean - pts[i - 1].worst_mean) / (1.0 + std::abs(pts[i - 1].worst_mean)));
        worst_area_drop = std::max(worst_area_drop, (p.design.x[1] - pts[i - 1].design.x[1]) / pts[i - 1].design.x[1]);
    }
    const bool pass = pts.size() == 20 && run.seconds < 300.0 && failed == 0 && invalid == 0 && worst_rise <= 1e-7 &&
                      worst_volume <= 1e-6 && worst_area_drop <= 0.0;
    return line(pass,
                "two-bar front: %zu points in %.2fs (limit 300s), non-optimal=%d, invalid=%d, max mean rise=%.2e "
                "(tol 1e-7), max volume slack=%.2e (tol 1e-6), lower area %.4f -> %.4f mm^2 as nu decreases, max "
                "reversal=%.2e",
                pts.size(), run.seconds, failed, invalid, worst_rise, worst_volume, pts.back().design.x[1] * 1e6, pts.front().design.x[1] * 1e6, worst_area_drop);
}

// 7: orderings at one bound that every variant can meet
Line criterion7() {
    const auto base = two_bar_config();
    const auto model = make_model(base.truss);
    const auto s = make_samples(base, model);
    struct Variant {
        KernelKind kind;
        double tau, gamma;
    };
    std::vector<Variant> vs;
    for (auto kind : {KernelKind::uniform, KernelKind::triangular}) {
        for (double tau : {0.3, 0.4, 0.5}) vs.push_back({kind, tau, 0.95});
        for (double g : {0.90, 0.99}) vs.push_back({kind, 0.3, g});
    }
    auto risk = [&](const Variant& v) {
        auto c = base;
        c.kernel = v.kind;
        c.gamma = v.gamma;
        return make_risk(c, s.n(), v.tau);
    };
    std::vector<double> lo(vs.size()), obj(vs.size());
    parallel_for(static_cast<int>(vs.size()), 4, [&](int i) {
        lo[i] = solve_min_cvar(model, s, risk(vs[i]), base.solver).worst_cvar;
    });
    const double nu = *std::max_element(lo.begin(), lo.end()) * 1.001;
    std::vector<conic::SolveStatus> st(vs.size());
    parallel_for(static_cast<int>(vs.size()), 4, [&](int i) {
        const auto p = solve_point(model, s, risk(vs[i]), nu, base.solver);
        obj[i] = p.worst_mean;
        st[i] = p.status;
    });
    auto idx = [&](KernelKind k, double tau, double g) {
        for (std::size_t i = 0; i < vs.size(); ++i)
            if (vs[i].kind == k && vs[i].tau == tau && vs[i].gamma == g) return i;
        return vs.size();
    };
    double worst = 0.0, kernel_gap = -1e300;
    auto ordered = [&](std::size_t a, std::size_t b) {  // obj[a] <= obj[b]
        worst = std::max(worst, (obj[a] - obj[b]) / (1.0 + std::abs(obj[b])));
    };
    for (auto k : {KernelKind::uniform, KernelKind::triangular}) {
        ordered(idx(k, 0.3, 0.95), idx(k, 0.4, 0.95));
        ordered(idx(k, 0.4, 0.95), idx(k, 0.5, 0.95));
        ordered(idx(k, 0.3, 0.90), idx(k, 0.3, 0.95));
        ordered(idx(k, 0.3, 0.95), idx(k, 0.3, 0.99));
    }
    for (const auto& v : vs)
        if (v.kind == KernelKind::uniform)
            kernel_gap = std::max(kernel_gap, obj[idx(KernelKind::triangular, v.tau, v.gamma)] - obj[idx(v.kind, v.tau, v.gamma)]);
    const bool solved = std::all_of(st.begin(), st.end(), [](auto x) { return x == conic::SolveStatus::optimal; });
    const double u3 = obj[idx(KernelKind::uniform, 0.3, 0.95)], u5 = obj[idx(KernelKind::uniform, 0.5, 0.95)];
    return line(solved && worst <= 1e-7 && kernel_gap <= 1e-6,
                "orderings at nu=%.6g J over %zu variants: max monotonicity violation=%.2e (tol 1e-7), max "
                "triangular-uniform=%.3e J (tol 1e-6); uniform mean tau .3 -> .5: %.6g -> %.6g J",
                nu, vs.size(), worst, kernel_gap, u3, u5);
}

// 8: small radius against the radius-zero programs, with the CVaR bound active and without it
Line criterion8() {
    const auto c = two_bar_config();
    const auto model = make_model(c.truss);
    const auto s = make_samples(c, model);
    const auto r0 = make_risk(c, s.n(), 0.0), r1 = make_risk(c, s.n(), 1e-6);
    const double nu = solve_min_cvar(model, s, r1, c.solver).worst_cvar * 1.001;
    const auto p0 = solve_point(model, s, r0, nu, c.solver);
    const auto p1 = solve_point(model, s, r1, nu, c.solver);
    const auto m0 = solve_min_mean(model, s, r0, c.solver);
    const auto m1 = solve_min_mean(model, s, r1, c.solver);
    for (const auto* p : {&p0, &p1, &m0, &m1})
        if (p->status != conic::SolveStatus::optimal)
            return line(false, "tau continuity: solve failed (%s)", conic::to_string(p->status));
    const double gap = std::abs(p1.worst_mean - p0.worst_mean), tol = 1e-4 * (1.0 + std::abs(p0.worst_mean));
    const double gap_m = std::abs(m1.worst_mean - m0.worst_mean), tol_m = 1e-4 * (1.0 + std::abs(m0.worst_mean));
    // first-order size of the unconstrained gap: the worst-case mean over a radius-tau ball
    // exceeds the nominal mean by sqrt(tau * Var_w0(f)) for small tau
    const Vec f = sample_compliances(model, s, m0.design);
    const Vec& w = r0.w0;
    const double mean = w.dot(f), var = w.dot((f.array() - mean).square().matrix());
    return line(gap <= tol && gap_m <= tol_m,
                "tau continuity, tau=1e-6 vs tau=0: bound nu=%.6g J active: %.9g vs %.9g, gap=%.4g J tol=%.4g J; "
                "unbounded: %.9g vs %.9g, gap=%.4g J tol=%.4g J, predicted sqrt(tau*Var)=%.4g J",
                nu, p1.worst_mean, p0.worst_mean, gap, tol, m1.worst_mean, m0.worst_mean, gap_m, tol_m,
                std::sqrt(1e-6 * var));
}

// 9: grid ground structure, n = 30, both kernels, one bound inside the front each
Line criterion9() {
    const auto t0 = std::chrono::steady_clock::now();
    std::string parts;
    bool pass = true;
    int m = 0;
    for (auto kind : {KernelKind::uniform, KernelKind::triangular}) {
        auto c = grid_config(30);
        c.kernel = kind;
        const auto model = make_model(c.truss);
        m = model.num_members();
        const auto s = make_samples(c, model);
        const auto r = make_risk(c, s.n());
        ParetoPoint ends[2];
        parallel_for(2, 2, [&](int i) {
            ends[i] = i == 0 ? solve_min_cvar(model, s, r, c.solver) : solve_min_mean(model, s, r, c.solver);
        });
        const double nu = 0.5 * (ends[0].worst_cvar + ends[1].worst_cvar);
        const auto p = solve_point(model, s, r, nu, c.solver);
        const auto inst = build_mean_cvar(model, s, r, nu);
        pass &= ends[0].status == conic::SolveStatus::optimal && ends[1].status == conic::SolveStatus::optimal && p.valid;
        char buf[256];
        std::snprintf(buf, sizeof buf, " %s: %ld vars, nu=%.6g J, %s in %d iters %.1fs, valid=%s;", to_string(kind).c_str(),
                      static_cast<long>(inst.program.num_variables()), nu, conic::to_string(p.status), p.iterations,
                      p.time_s, p.valid ? "yes" : "no");
        parts += buf;
    }
    const double secs = since(t0);
    pass &= m >= 200 && secs < 600.0;
    return line(pass, "grid m=%d n=30 tol 1e-8:%s total %.1fs incl. endpoint solves (limit 600s)", m, parts.c_str(), secs);
}

// 10: repeat the two-bar run with a different worker count and compare bytes
Line criterion10() {
    const auto a = run_two_bar(1), b = run_two_bar(4), c = run_two_bar(4);
    const bool same = a.pareto_csv == b.pareto_csv && b.pareto_csv == c.pareto_csv && a.designs_csv == b.designs_csv &&
                      b.designs_csv == c.designs_csv && a.samples_csv == b.samples_csv && b.samples_csv == c.samples_csv;
    return line(same, "determinism: samples, pareto and %zu design CSVs (%zu bytes) identical over 3 runs (1 and 4 threads)",
                a.front.points.size(), a.pareto_csv.size() + a.designs_csv.size() + a.samples_csv.size());
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, Line (*)()> all{{1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
                                        {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8},
                                        {9, criterion9}, {10, criterion10}};
    std::set<int> pick;
    for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& [k, fn] : all) {
        if (!pick.empty() && !pick.count(k)) continue;
        Line l;
        try {
            l = fn();
        } catch (const std::exception& e) {
            l = line(false, "exception: %s", e.what());
        }
        std::printf("criterion %2d: %s  %s\n", k, l.pass ? "PASS" : "FAIL", l.text.c_str());
        std::fflush(stdout);
        failed += !l.pass;
    }
    return std::min(failed, 100);
}
