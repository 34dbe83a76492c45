#include "drtruss/formulations.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace drtruss;

namespace {

LoadSampleSet two_bar_samples(int n, std::uint64_t seed) {
    GaussianComponent g{Eigen::Vector2d(100.0, 0.0), Eigen::Matrix2d()};
    g.cov << 150.0, 50.0, 50.0, 100.0;
    auto s = sample_gaussian(g, n, seed);
    s.loaded_dofs = {0, 1};
    return s;
}

RiskSpec spec(KernelKind kind, double tau, int n, double gamma = 0.95) {
    return RiskSpec{Kernel{kind, 10.0}, gamma, tau, RiskSpec::uniform_weights(n)};
}

}  // namespace

TEST(Formulations, UpsilonProgramMatchesClosedForm) {
    std::mt19937_64 rng(4);
    for (auto kind : {KernelKind::uniform, KernelKind::triangular})
        for (double h : {1.0, 30.0}) {
            std::uniform_real_distribution<double> U(-3 * h, 3 * h);
            for (int t = 0; t < 20; ++t) {
                const Kernel k{kind, h};
                const double c = U(rng);
                const auto sol = conic::solve(build_upsilon_program(k, c));
                ASSERT_TRUE(sol.optimal());
                EXPECT_NEAR(sol.objective, upsilon(k, c), 1e-6 * std::max(1.0, h)) << to_string(kind) << " c=" << c;
            }
        }
}

TEST(Formulations, ConjugateProgramMatchesClosedForm) {
    for (double y = -10.0; y <= 10.0; y += 0.7) {
        for (bool shifted : {false, true}) {
            const auto sol = conic::solve(build_conjugate_program(y, shifted));
            ASSERT_TRUE(sol.optimal());
            EXPECT_NEAR(sol.objective, phi_star(y), 1e-7) << y << (shifted ? " shifted" : "");
        }
    }
}

TEST(Formulations, SingleBarCompliance) {
    const auto t = build_single_bar(1.0, 20e9, 100e-6);  // 100 mm^2 over 1 m
    const Eigen::VectorXd xi = Eigen::VectorXd::Constant(1, 100e3);
    const auto inst = build_compliance_min(t, xi);
    const auto sol = conic::solve(inst.program);
    ASSERT_TRUE(sol.optimal());
    EXPECT_NEAR(inst.objective_si(sol), 5000.0, 5000.0 * 1e-9);
    EXPECT_NEAR(inst.values("x", sol.primal)[0], 100e-6, 1e-12);
    EXPECT_NEAR(inst.values("q", sol.primal)[0], 100e3, 1e-3);
}

TEST(Formulations, ComplianceAtFixedDesignMatchesLinearSolve) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(0.2, 1.0), N(-1.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        const auto model = build_grid_ground_structure(3, 2, 1.0, {0, 3}, 1 + t % 2, 20e9, 1e-5);
        Design x{Eigen::VectorXd(model.num_members())};
        for (int j = 0; j < model.num_members(); ++j) x.x[j] = 1e-6 * U(rng);
        Eigen::VectorXd xi(model.num_dofs());
        for (int k = 0; k < xi.size(); ++k) xi[k] = 1e4 * N(rng);
        const auto inst = build_compliance_at(model, x, xi);
        const auto sol = conic::solve(inst.program);
        ASSERT_TRUE(sol.optimal());
        const double c = compliance(model, x, xi);
        EXPECT_NEAR(inst.objective_si(sol), c, 1e-6 * c);
    }
}

TEST(Formulations, TwoBarSingleLoadOptimum) {
    // Statically determinate: member forces are fixed by equilibrium, and the optimal areas are
    // proportional to |q_j|, giving (sum_j l_j |q_j|)^2 / (E Vbar).
    const auto t = build_two_bar();
    const Eigen::Vector2d xi(100e3, 20e3);
    const Eigen::Vector2d q = t.beta.fullPivLu().solve(xi);
    const double exact = std::pow(t.lengths.dot(q.cwiseAbs()), 2) / (t.young_modulus * t.volume_cap);
    const auto inst = build_compliance_min(t, xi);
    const auto sol = conic::solve(inst.program);
    ASSERT_TRUE(sol.optimal());
    EXPECT_NEAR(inst.objective_si(sol), exact, 1e-7 * exact);
    const Vec x = inst.values("x", sol.primal);
    // areas are pinned only to about sqrt(gap) since the objective is flat to first order
    EXPECT_NEAR(x[0] / x[1], std::abs(q[0] / q[1]), 1e-3 * std::abs(q[0] / q[1]));
}

TEST(Formulations, VariableMapCoversEveryVariableOnce) {
    const auto model = build_two_bar();
    const auto s = two_bar_samples(5, 1);
    for (auto kind : {KernelKind::uniform, KernelKind::triangular}) {
        const auto inst = build_dro_mean_cvar(model, s, spec(kind, 0.3, 5), 2e6);
        std::set<conic::Index> seen;
        std::size_t total = 0;
        for (const auto& [name, sl] : inst.var_map) {
            total += sl.idx.size();
            seen.insert(sl.idx.begin(), sl.idx.end());
        }
        EXPECT_EQ(total, seen.size());
        EXPECT_EQ(static_cast<conic::Index>(seen.size()), inst.program.objective.size());
        EXPECT_EQ(inst.var_map.at("x").idx.size(), 2u);
        EXPECT_EQ(inst.var_map.at("b").idx.size(), 10u);
        EXPECT_EQ(inst.var_map.at("v1").idx.size(), 5u);
        EXPECT_TRUE(inst.has("lambda1"));
    }
    const auto t0 = build_dro_mean_cvar_tau0(model, s, spec(KernelKind::uniform, 0.0, 5), 2e6);
    EXPECT_FALSE(t0.has("lambda1"));
    EXPECT_FALSE(t0.has("v2"));
    EXPECT_THROW(build_dro_mean_cvar(model, s, spec(KernelKind::uniform, 0.0, 5), 2e6), std::invalid_argument);
}

TEST(Formulations, RiskProgramsAgreeWithOracles) {
    const auto model = build_two_bar();
    const auto s = two_bar_samples(20, 3);
    for (auto kind : {KernelKind::uniform, KernelKind::triangular})
        for (double tau : {0.0, 0.3}) {
            const auto r = spec(kind, tau, 20);
            const auto pc = build_min_worstcase_cvar(model, s, r);
            const auto sc = conic::solve(pc.program);
            ASSERT_TRUE(sc.optimal());
            const auto ec = extract_design(pc, sc, model, s, r);
            EXPECT_NEAR(ec.objective, ec.worst_cvar, 1e-6 * ec.worst_cvar);

            const auto pm = build_min_worstcase_mean(model, s, r);
            const auto sm = conic::solve(pm.program);
            ASSERT_TRUE(sm.optimal());
            const auto em = extract_design(pm, sm, model, s, r);
            EXPECT_TRUE(em.report.passed()) << em.report.to_string();
            EXPECT_GE(em.worst_cvar, ec.worst_cvar * (1 - 1e-7));

            const double nu = 0.5 * (ec.worst_cvar + em.worst_cvar);
            const auto p = build_mean_cvar(model, s, r, nu);
            const auto so = conic::solve(p.program);
            ASSERT_TRUE(so.optimal());
            const auto e = extract_design(p, so, model, s, r);
            EXPECT_TRUE(e.report.passed()) << e.report.to_string();
            EXPECT_GE(e.objective, em.objective * (1 - 1e-7));
            EXPECT_LE(e.objective, ec.report.worst_mean * (1 + 1e-7));
            EXPECT_NEAR(model.lengths.dot(e.design.x), model.volume_cap, 1e-6 * model.volume_cap);
        }
}

TEST(Formulations, BoundBelowTheMinimumIsInfeasible) {
    const auto model = build_two_bar();
    const auto s = two_bar_samples(10, 2);
    const auto r = spec(KernelKind::uniform, 0.3, 10);
    const auto pc = build_min_worstcase_cvar(model, s, r);
    const auto sc = conic::solve(pc.program);
    ASSERT_TRUE(sc.optimal());
    const auto p = build_dro_mean_cvar(model, s, r, 0.9 * pc.objective_si(sc));
    EXPECT_EQ(conic::solve(p.program).status, conic::SolveStatus::primal_infeasible);
}

TEST(Formulations, BoundaryWarning) {
    const auto model = build_two_bar();
    const auto s = two_bar_samples(50, 1);
    EXPECT_FALSE(build_dro_mean_cvar(model, s, spec(KernelKind::uniform, 0.3, 50), 2e6).warnings.empty());
    EXPECT_TRUE(build_dro_mean_cvar(model, s, spec(KernelKind::uniform, 0.01, 50), 2e6).warnings.empty());
}
