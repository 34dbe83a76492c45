#pragma once

// Experiment drivers: model and sample setup from a config, single solves,
// Pareto sweeps over the CVaR bound, runtime benchmarks, and their CSV/SVG
// outputs. Nothing here parses files; see tools/ for the YAML front end.

#include "drtruss/formulations.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace drtruss {

struct TrussConfig {
    std::string generator = "two_bar";  // two_bar | single_bar | grid | file
    std::string file;
    int nx = 6, ny = 5, level = 5;
    double spacing_m = 1.0;
    std::vector<int> fixed_nodes{0, 24};
    double length_m = 1.0;
    double E_GPa = 20.0;
    double Vbar_mm3 = 1000.0;
    int load_node = -1;  // -1: generator default (free node / top-right node)
};

struct SampleConfig {
    std::string file;  // read instead of drawing when set
    std::uint64_t seed = 1;
    MixtureSpec mixture;
};

struct SweepConfig {
    int nu_count = 20;
    std::optional<double> nu_min_J, nu_max_J;  // auto when empty
    std::optional<double> nu_J;                // single solve
    std::vector<double> tau_values;            // extra fronts; empty: risk tau only
};

struct BenchCase {
    int nx = 6, ny = 5, level = 5;
};

struct BenchConfig {
    std::vector<BenchCase> grids;
    std::vector<int> sample_counts;
    std::vector<KernelKind> kernels{KernelKind::uniform, KernelKind::triangular};
    double timeout_s = 3600.0;
};

struct ExperimentConfig {
    std::string name = "experiment";
    TrussConfig truss;
    SampleConfig samples;
    KernelKind kernel = KernelKind::uniform;
    double h_J = 10.0, gamma = 0.95, tau = 0.3;
    SweepConfig sweep;
    BenchConfig bench;
    conic::SolverSettings solver;
    std::string output_dir = "out";
    int threads = 1;
    bool timing = true;  // false: time columns are written as 0 so reruns compare byte for byte
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Setup

inline TrussModel make_model(const TrussConfig& c) {
    const double E = c.E_GPa * 1e9, V = c.Vbar_mm3 * 1e-9;
    if (c.generator == "two_bar") return build_two_bar(E, V);
    if (c.generator == "single_bar") return build_single_bar(c.length_m, E, V);
    if (c.generator == "grid") return build_grid_ground_structure(c.nx, c.ny, c.spacing_m, c.fixed_nodes, c.level, E, V);
    if (c.generator == "file") return load_truss(c.file);
    throw ConfigError("unknown truss generator '" + c.generator + "'");
}

/// Free dofs of the loaded node. Defaults: node 0 for the two-bar truss, the last node otherwise.
inline std::vector<int> loaded_dofs(const TrussModel& t, const TrussConfig& c) {
    int node = c.load_node;
    if (node < 0) node = c.generator == "two_bar" ? 0 : t.num_nodes() - 1;
    if (node >= t.num_nodes()) throw ConfigError("load node out of range");
    auto d = t.node_dofs(node);
    if (d.empty()) throw ConfigError("load node has no free dofs");
    return d;
}

inline LoadSampleSet make_samples(const ExperimentConfig& cfg, const TrussModel& t) {
    LoadSampleSet s = cfg.samples.file.empty() ? sample_mixture(cfg.samples.mixture, cfg.samples.seed)
                                               : load_samples_csv(cfg.samples.file);
    s.loaded_dofs = loaded_dofs(t, cfg.truss);
    if (s.dim() != static_cast<int>(s.loaded_dofs.size()))
        throw ConfigError("samples have " + std::to_string(s.dim()) + " components but the load node has " +
                          std::to_string(s.loaded_dofs.size()) + " free dofs");
    return s;
}

inline RiskSpec make_risk(const ExperimentConfig& cfg, int n, std::optional<double> tau = {}) {
    RiskSpec r{Kernel{cfg.kernel, cfg.h_J}, cfg.gamma, tau.value_or(cfg.tau), RiskSpec::uniform_weights(n)};
    r.check(n);
    return r;
}

// ---------------------------------------------------------------------------
// Points

struct ParetoPoint {
    double nu = 0.0;  // J; +inf for the unconstrained endpoint
    double worst_mean = 0.0, worst_cvar = 0.0, alpha = 0.0;
    Design design;
    int iterations = 0;
    double time_s = 0.0;
    bool valid = false;
    conic::SolveStatus status = conic::SolveStatus::numerical_failure;
    ValidationReport report;
    std::vector<std::string> warnings;
};

inline ParetoPoint point_from(const ProblemInstance& inst, const conic::Solution& sol, const TrussModel& model,
                              const LoadSampleSet& s, const RiskSpec& r, double nu) {
    ParetoPoint p;
    p.nu = nu;
    p.status = sol.status;
    p.iterations = sol.iterations;
    p.time_s = sol.solve_time_s;
    p.warnings = inst.warnings;
    if (!sol.optimal()) return p;
    auto e = extract_design(inst, sol, model, s, r);
    p.design = e.design;
    p.worst_mean = e.worst_mean;
    p.worst_cvar = e.worst_cvar;
    p.alpha = std::isnan(e.alpha) ? e.report.cvar_alpha : e.alpha;
    p.report = std::move(e.report);
    p.valid = p.report.passed();
    return p;
}

inline ParetoPoint solve_point(const TrussModel& model, const LoadSampleSet& s, const RiskSpec& r, double nu,
                               const conic::SolverSettings& st) {
    const auto inst = build_mean_cvar(model, s, r, nu);
    return point_from(inst, conic::solve(inst.program, st), model, s, r, nu);
}

inline ParetoPoint solve_min_cvar(const TrussModel& model, const LoadSampleSet& s, const RiskSpec& r,
                                  const conic::SolverSettings& st) {
    const auto inst = build_min_worstcase_cvar(model, s, r);
    const auto sol = conic::solve(inst.program, st);
    auto p = point_from(inst, sol, model, s, r, std::numeric_limits<double>::quiet_NaN());
    p.nu = p.worst_cvar;
    return p;
}

inline ParetoPoint solve_min_mean(const TrussModel& model, const LoadSampleSet& s, const RiskSpec& r,
                                  const conic::SolverSettings& st) {
    const auto inst = build_min_worstcase_mean(model, s, r);
    return point_from(inst, conic::solve(inst.program, st), model, s, r, std::numeric_limits<double>::infinity());
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Results go to fixed slots, so the
/// output does not depend on scheduling.
inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i; (i = next++) < count;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lk(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// Fronts

struct Front {
    double tau = 0.0;
    double nu_min = 0.0, nu_max = 0.0;
    ParetoPoint min_cvar, min_mean;
    std::vector<ParetoPoint> points;  // sorted by nu

    std::optional<double> first_failure() const {
        for (const auto& p : points)
            if (p.status != conic::SolveStatus::optimal) return p.nu;
        return std::nullopt;
    }
};

struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Relative offset of the automatic lower end of the sweep above the minimum worst-case CVaR.
/// At the minimum itself the bound admits a single design and no strictly feasible point.
inline constexpr double kNuMinOffset = 1e-5;

inline Front run_front(const TrussModel& model, const LoadSampleSet& s, const RiskSpec& r, const SweepConfig& sw,
                       const conic::SolverSettings& st, int threads) {
    Front f;
    f.tau = r.tau;
    ParetoPoint ends[2];
    parallel_for(2, threads, [&](int i) {
        ends[i] = i == 0 ? solve_min_cvar(model, s, r, st) : solve_min_mean(model, s, r, st);
    });
    f.min_cvar = std::move(ends[0]);
    f.min_mean = std::move(ends[1]);
    if (f.min_cvar.status != conic::SolveStatus::optimal)
        throw SolverFailure(std::string("minimum worst-case CVaR solve failed: ") + conic::to_string(f.min_cvar.status));
    if (f.min_mean.status != conic::SolveStatus::optimal)
        throw SolverFailure(std::string("minimum worst-case mean solve failed: ") + conic::to_string(f.min_mean.status));
    f.nu_min = sw.nu_min_J.value_or(f.min_cvar.worst_cvar * (1.0 + kNuMinOffset));
    f.nu_max = sw.nu_max_J.value_or(f.min_mean.worst_cvar);
    if (!(f.nu_max > f.nu_min)) f.nu_max = f.nu_min;
    const int count = std::max(1, sw.nu_count);
    f.points.resize(static_cast<std::size_t>(count));
    parallel_for(count, threads, [&](int i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        const double nu = i == count - 1 ? f.nu_max : f.nu_min + t * (f.nu_max - f.nu_min);
        f.points[static_cast<std::size_t>(i)] = solve_point(model, s, r, nu, st);
    });
    std::stable_sort(f.points.begin(), f.points.end(), [](const auto& a, const auto& b) { return a.nu < b.nu; });
    return f;
}

// ---------------------------------------------------------------------------
// Output

inline std::string fmt_g(double v, int digits = 17) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

/// File tag for a bound: 9 significant digits, no sign or exponent surprises in names.
inline std::string nu_tag(double nu) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", nu);
    return buf;
}

inline void write_pareto_csv(std::ostream& os, const Front& f, bool timing) {
    os << "nu_J,worst_mean_J,worst_cvar_J,alpha_J,iters,time_s,valid\n";
    for (const auto& p : f.points)
        os << fmt_g(p.nu) << ',' << fmt_g(p.worst_mean) << ',' << fmt_g(p.worst_cvar) << ',' << fmt_g(p.alpha) << ','
           << p.iterations << ',' << (timing ? fmt_g(p.time_s, 6) : "0") << ',' << (p.valid ? "true" : "false")
           << '\n';
}

/// Worst-case mean against worst-case CVaR, one polyline per front.
inline void write_front_svg(std::ostream& os, const std::vector<Front>& fronts) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& f : fronts)
        for (const auto& p : f.points) {
            if (p.status != conic::SolveStatus::optimal) continue;
            x0 = std::min(x0, p.worst_cvar);
            x1 = std::max(x1, p.worst_cvar);
            y0 = std::min(y0, p.worst_mean);
            y1 = std::max(y1, p.worst_mean);
        }
    if (!(x1 >= x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 <= 0) x1 = x0 + 1;
    if (y1 - y0 <= 0) y1 = y0 + 1;
    const double W = 560, H = 420, L = 90, R = 20, T = 20, B = 60;
    auto X = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
    auto Y = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"black", "#c0392b", "#2471a3", "#1e8449", "#7d3c98"};
    char buf[320];
    std::snprintf(buf, sizeof buf, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\">\n", W, H);
    os << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<polyline points=\"%.1f,%.1f %.1f,%.1f %.1f,%.1f\" fill=\"none\" stroke=\"black\"/>\n", L, T, L,
                  H - B, W - R, H - B);
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"middle\">worst-case CVaR [J] (%.6g .. "
                  "%.6g)</text>\n",
                  (L + W - R) / 2, H - 20, x0, x1);
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"14\" y=\"%.1f\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
                  "%.1f)\">worst-case mean [J] (%.6g .. %.6g)</text>\n",
                  (T + H - B) / 2, (T + H - B) / 2, y0, y1);
    os << buf;
    for (std::size_t k = 0; k < fronts.size(); ++k) {
        const char* c = colors[k % 5];
        os << "<polyline fill=\"none\" stroke=\"" << c << "\" points=\"";
        for (const auto& p : fronts[k].points)
            if (p.status == conic::SolveStatus::optimal) {
                std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(p.worst_cvar), Y(p.worst_mean));
                os << buf;
            }
        os << "\"/>\n";
        for (const auto& p : fronts[k].points)
            if (p.status == conic::SolveStatus::optimal) {
                std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"white\" stroke=\"%s\"/>\n",
                              X(p.worst_cvar), Y(p.worst_mean), c);
                os << buf;
            }
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" fill=\"%s\">tau = %g</text>\n",
                      W - R - 90, T + 16.0 * (k + 1), c, fronts[k].tau);
        os << buf;
    }
    os << "</svg>\n";
}

inline void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fn) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    fn(f);
}

/// design_<nu>.csv, design_<nu>.svg and validation_<nu>.txt for one point.
inline void write_point_files(const std::filesystem::path& dir, const TrussModel& model, const ParetoPoint& p) {
    const std::string tag = nu_tag(p.nu);
    if (p.status == conic::SolveStatus::optimal) {
        write_file(dir / ("design_" + tag + ".csv"), [&](std::ostream& os) { write_design_csv(os, p.design); });
        write_file(dir / ("design_" + tag + ".svg"), [&](std::ostream& os) { write_design_svg(os, model, p.design); });
    }
    write_file(dir / ("validation_" + tag + ".txt"), [&](std::ostream& os) {
        os << "nu_J=" << fmt_g(p.nu) << "\nstatus=" << conic::to_string(p.status) << '\n' << p.report.to_string();
        for (const auto& w : p.warnings) os << "warning: " << w << '\n';
    });
}

// ---------------------------------------------------------------------------
// Bench

struct BenchRow {
    std::string kernel;
    int m = 0, d = 0, n = 0;
    long variables = 0, eq_rows = 0, cone_rows = 0;
    int iterations = 0;
    double time_s = 0.0;
    std::string status;
    double objective = 0.0;
};

/// One CVaR-bounded solve per (grid, n, kernel). The bound is the worst-case CVaR of the uniform
/// design, which is feasible and strictly inside for any instance where that design is not optimal.
inline std::vector<BenchRow> run_bench(const ExperimentConfig& cfg, const std::function<void(const BenchRow&)>& progress = {}) {
    std::vector<BenchRow> rows;
    for (const auto& g : cfg.bench.grids)
        for (int n : cfg.bench.sample_counts)
            for (auto kind : cfg.bench.kernels) {
                TrussConfig tc = cfg.truss;
                tc.generator = "grid";
                tc.nx = g.nx;
                tc.ny = g.ny;
                tc.level = g.level;
                const auto model = make_model(tc);
                ExperimentConfig c = cfg;
                c.truss = tc;
                c.kernel = kind;
                // scale the mixture counts to n, keeping proportions
                auto& counts = c.samples.mixture.counts;
                const int total = c.samples.mixture.total();
                int acc = 0;
                for (std::size_t k = 0; k < counts.size(); ++k) {
                    const int v = k + 1 == counts.size() ? n - acc : n * counts[k] / std::max(total, 1);
                    counts[k] = v;
                    acc += v;
                }
                c.samples.file.clear();
                const auto s = make_samples(c, model);
                const auto r = make_risk(c, s.n());
                const Vec comp = sample_compliances(model, s, Design{model.uniform_design()});
                const double nu = worst_case_cvar(comp, r).value;
                const auto inst = build_mean_cvar(model, s, r, nu);
                auto st = cfg.solver;
                st.time_limit_s = cfg.bench.timeout_s;
                const auto sol = conic::solve(inst.program, st);
                BenchRow row{to_string(kind), model.num_members(), model.num_dofs(), s.n(),
                             static_cast<long>(inst.program.objective.size()),
                             static_cast<long>(inst.program.eq_rhs.size()),
                             static_cast<long>(inst.program.cone_rhs.size()), sol.iterations, sol.solve_time_s,
                             sol.timed_out ? "timeout" : conic::to_string(sol.status), inst.objective_si(sol)};
                rows.push_back(row);
                if (progress) progress(row);
            }
    return rows;
}

inline void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows, bool timing) {
    os << "kernel,m,d,n,variables,eq_rows,cone_rows,iters,time_s,status,objective_J\n";
    for (const auto& r : rows)
        os << r.kernel << ',' << r.m << ',' << r.d << ',' << r.n << ',' << r.variables << ',' << r.eq_rows << ','
           << r.cone_rows << ',' << r.iterations << ',' << (timing ? fmt_g(r.time_s, 6) : "0") << ',' << r.status
           << ',' << fmt_g(r.objective) << '\n';
}

}  // namespace drtruss
