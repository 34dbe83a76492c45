// drtruss: sample generation, single solves, Pareto sweeps, benchmarks and the
// property suite, driven by a YAML config.

#include "config.hpp"
#include "drtruss/property_checks.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace drtruss;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, config_error = 2, solver_failure = 3, validation_failure = 4 };

struct Overrides {
    std::string config, out;
    std::optional<int> threads;
    std::optional<double> tol_feas, tol_gap, nu;
    std::optional<std::uint64_t> seed;
    bool no_timing = false;
};

void add_common(CLI::App* sub, Overrides& o, bool needs_config = true) {
    auto* c = sub->add_option("--config", o.config, "YAML experiment config");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides output_dir)");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--tol-feas", o.tol_feas, "solver feasibility tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--tol-gap", o.tol_gap, "solver relative gap tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "sample seed");
    sub->add_flag("--no-timing", o.no_timing, "write 0 for wall times so reruns are byte-identical");
}

ExperimentConfig configure(const Overrides& o) {
    ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : cli::load_config(o.config);
    if (!o.out.empty()) c.output_dir = o.out;
    if (o.threads) c.threads = *o.threads;
    if (o.tol_feas) c.solver.tol_feas = *o.tol_feas;
    if (o.tol_gap) c.solver.tol_gap = *o.tol_gap;
    if (o.seed) c.samples.seed = *o.seed;
    if (o.nu) c.sweep.nu_J = *o.nu;
    c.timing = !o.no_timing;
    return c;
}

fs::path prepare_dir(const std::string& d) {
    fs::path p(d);
    fs::create_directories(p);
    return p;
}

void print_point(const char* label, const ParetoPoint& p) {
    std::fprintf(stderr, "%s nu=%.9g status=%s mean=%.9g cvar=%.9g iters=%d valid=%s\n", label, p.nu,
                 conic::to_string(p.status), p.worst_mean, p.worst_cvar, p.iterations, p.valid ? "yes" : "no");
}

int cmd_gen_samples(const ExperimentConfig& c) {
    if (c.samples.mixture.components.empty()) throw ConfigError("gen-samples needs samples.components");
    const auto s = sample_mixture(c.samples.mixture, c.samples.seed);
    const auto dir = prepare_dir(c.output_dir);
    write_file(dir / "samples.csv", [&](std::ostream& os) { write_samples_csv(os, s); });
    write_file(dir / "samples_spec.yaml", [&](std::ostream& os) { os << cli::echo_samples_spec(c); });
    std::fprintf(stderr, "wrote %d samples to %s\n", s.n(), (dir / "samples.csv").c_str());
    return ok;
}

int cmd_solve(const ExperimentConfig& c) {
    if (!c.sweep.nu_J) throw ConfigError("solve needs sweep.nu_J or --nu");
    const auto model = make_model(c.truss);
    const auto s = make_samples(c, model);
    const auto r = make_risk(c, s.n());
    const auto p = solve_point(model, s, r, *c.sweep.nu_J, c.solver);
    for (const auto& w : p.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    const auto dir = prepare_dir(c.output_dir);
    write_point_files(dir, model, p);
    print_point("solve", p);
    if (p.status != conic::SolveStatus::optimal) {
        const auto lo = solve_min_cvar(model, s, r, c.solver);
        std::fprintf(stderr, "bound nu=%.9g J not solved (%s); minimum worst-case CVaR is %.9g J\n", p.nu,
                     conic::to_string(p.status), lo.worst_cvar);
        return solver_failure;
    }
    std::cout << "nu_J,worst_mean_J,worst_cvar_J,alpha_J,iters,time_s,valid\n"
              << fmt_g(p.nu) << ',' << fmt_g(p.worst_mean) << ',' << fmt_g(p.worst_cvar) << ',' << fmt_g(p.alpha)
              << ',' << p.iterations << ',' << (c.timing ? fmt_g(p.time_s, 6) : "0") << ','
              << (p.valid ? "true" : "false") << '\n';
    return p.valid ? ok : validation_failure;
}

std::string tau_dir(double tau) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "tau_%g", tau);
    return buf;
}

int cmd_pareto(const ExperimentConfig& c) {
    const auto model = make_model(c.truss);
    const auto s = make_samples(c, model);
    auto taus = c.sweep.tau_values;
    if (taus.empty()) taus.push_back(c.tau);
    const auto root = prepare_dir(c.output_dir);
    std::vector<Front> fronts;
    int code = ok;
    for (double tau : taus) {
        const auto r = make_risk(c, s.n(), tau);
        const auto dir = taus.size() == 1 ? root : prepare_dir((root / tau_dir(tau)).string());
        Front f;
        try {
            f = run_front(model, s, r, c.sweep, c.solver, c.threads);
        } catch (const SolverFailure& e) {
            std::fprintf(stderr, "tau=%g: %s\n", tau, e.what());
            return solver_failure;
        }
        std::fprintf(stderr, "tau=%g: nu in [%.9g, %.9g]\n", tau, f.nu_min, f.nu_max);
        for (const auto& p : f.points) {
            print_point("  point", p);
            write_point_files(dir, model, p);
        }
        write_file(dir / "pareto.csv", [&](std::ostream& os) { write_pareto_csv(os, f, c.timing); });
        if (const auto bad = f.first_failure()) {
            std::fprintf(stderr, "tau=%g: sweep aborted, no solution at nu=%.9g J\n", tau, *bad);
            return solver_failure;
        }
        for (const auto& p : f.points)
            if (!p.valid) code = validation_failure;
        fronts.push_back(std::move(f));
    }
    write_file(root / "front.svg", [&](std::ostream& os) { write_front_svg(os, fronts); });
    if (code != ok) std::fprintf(stderr, "some points failed validation (valid=false in pareto.csv)\n");
    return code;
}

int cmd_bench(const ExperimentConfig& c) {
    if (c.bench.grids.empty() || c.bench.sample_counts.empty())
        throw ConfigError("bench needs bench.grids and bench.sample_counts");
    if (c.samples.mixture.components.empty()) throw ConfigError("bench draws samples; give samples.components");
    const auto dir = prepare_dir(c.output_dir);
    const auto rows = run_bench(c, [](const BenchRow& r) {
        std::fprintf(stderr, "%-10s m=%d n=%d vars=%ld iters=%d time=%.2fs %s\n", r.kernel.c_str(), r.m, r.n,
                     r.variables, r.iterations, r.time_s, r.status.c_str());
    });
    write_file(dir / "bench.csv", [&](std::ostream& os) { write_bench_csv(os, rows, c.timing); });
    return ok;
}

struct VerifyOptions {
    int scale = 1;
    CheckTolerances tol;
    bool mutate_upsilon = false;
};

int cmd_verify(const ExperimentConfig& c, const VerifyOptions& v, std::uint64_t seed) {
    std::vector<CheckResult> results;
    if (v.mutate_upsilon) {
        // fixture: a sign slip inside the kernel support must not survive the sweep
        UpsilonFn bad = [](const Kernel& k, double x) { return std::abs(x) < k.h ? upsilon(k, -x) : upsilon(k, x); };
        results.push_back(check_upsilon_blocks(100 * v.scale, {1.0, 10.0, 30.0}, v.tol.upsilon, seed, c.solver, bad));
    } else {
        results = run_property_suite(v.tol, seed, v.scale, c.solver);
    }
    bool all = true;
    for (const auto& r : results) {
        std::cout << format_check(r) << '\n';
        all &= r.pass;
    }
    std::cout << (all ? "verify: all checks passed\n" : "verify: FAILED\n");
    return all ? ok : validation_failure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributionally robust mean-CVaR truss design"};
    app.require_subcommand(1);
    Overrides o;
    VerifyOptions v;

    auto* gen = app.add_subcommand("gen-samples", "draw load samples from the configured mixture");
    add_common(gen, o);
    auto* solve = app.add_subcommand("solve", "solve at one CVaR bound");
    add_common(solve, o);
    solve->add_option("--nu", o.nu, "CVaR bound [J] (overrides sweep.nu_J)");
    auto* pareto = app.add_subcommand("pareto", "sweep the CVaR bound and write the front");
    add_common(pareto, o);
    auto* bench = app.add_subcommand("bench", "runtime over grid sizes and sample counts");
    add_common(bench, o);
    auto* verify = app.add_subcommand("verify", "property suite: conic blocks, oracles, compliance");
    add_common(verify, o, false);
    verify->add_option("--scale", v.scale, "multiplies the number of random cases")->check(CLI::PositiveNumber);
    verify->add_option("--tol-upsilon", v.tol.upsilon, "Upsilon block tolerance, times max(1, h)");
    verify->add_option("--tol-conjugate", v.tol.conjugate, "conjugate block tolerance");
    verify->add_option("--tol-oracle", v.tol.oracle, "primal/dual oracle relative tolerance");
    verify->add_option("--tol-compliance", v.tol.compliance, "compliance relative tolerance");
    verify->add_flag("--mutate-upsilon", v.mutate_upsilon, "check against a deliberately broken closed form");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : config_error;
    }

    try {
        const auto c = configure(o);
        if (*gen) return cmd_gen_samples(c);
        if (*solve) return cmd_solve(c);
        if (*pareto) return cmd_pareto(c);
        if (*bench) return cmd_bench(c);
        if (*verify) return cmd_verify(c, v, o.seed.value_or(1));
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return config_error;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return config_error;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return solver_failure;
    }
    return ok;
}
