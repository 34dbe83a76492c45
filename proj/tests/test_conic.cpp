#include "drtruss/conic/cbf.hpp"
#include "drtruss/conic/program.hpp"
#include "drtruss/conic/solver.hpp"
#include "drtruss/conic/validate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace drtruss::conic;

namespace {

// Random SOCP with a planted primal-dual optimal pair, so the optimal value is known exactly.
struct Planted {
    ConeProgram prog;
    double optimum;
};

Planted planted_socp(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_int_distribution<int> nvar(2, 30);
    const int n = nvar(rng);
    const int p = std::uniform_int_distribution<int>(0, n / 3)(rng);

    std::vector<Cone> cones;
    Index m = 0;
    while (m < n + 2) {
        if (U(rng) < 0.0) {
            const Index d = std::uniform_int_distribution<int>(1, 4)(rng);
            cones.push_back({ConeKind::nonnegative, d});
            m += d;
        } else {
            const Index d = std::uniform_int_distribution<int>(2, 5)(rng);
            cones.push_back({ConeKind::second_order, d});
            m += d;
        }
    }

    Vector s = Vector::Zero(m), z = Vector::Zero(m);
    Index off = 0;
    for (const auto& c : cones) {
        if (c.kind == ConeKind::nonnegative) {
            for (Index i = off; i < off + c.dim; ++i) {
                if (U(rng) < 0.0)
                    s[i] = 0.5 + std::abs(U(rng));
                else
                    z[i] = 0.5 + std::abs(U(rng));
            }
        } else {
            const double pick = U(rng);
            Vector u(c.dim - 1);
            for (Index i = 0; i < u.size(); ++i) u[i] = U(rng);
            u.normalize();
            const double a = 0.5 + std::abs(U(rng)), b = 0.5 + std::abs(U(rng));
            if (pick < -0.3) {
                s[off] = a;
                s.segment(off + 1, c.dim - 1) = a * u;
                z[off] = b;
                z.segment(off + 1, c.dim - 1) = -b * u;
            } else if (pick < 0.3) {
                s[off] = 2.0 * a;
                s.segment(off + 1, c.dim - 1) = a * u;
            } else {
                z[off] = 2.0 * b;
                z.segment(off + 1, c.dim - 1) = b * u;
            }
        }
        off += c.dim;
    }

    Eigen::MatrixXd A(p, n), G(m, n);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < n; ++j) A(i, j) = U(rng);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) G(i, j) = U(rng);
    Vector x(n), y(p);
    for (Index j = 0; j < n; ++j) x[j] = U(rng);
    for (Index i = 0; i < p; ++i) y[i] = U(rng);

    Planted out;
    out.prog.objective = -A.transpose() * y - G.transpose() * z;
    out.prog.eq_matrix = A.sparseView();
    out.prog.eq_rhs = A * x;
    out.prog.cone_matrix = G.sparseView();
    out.prog.cone_rhs = G * x + s;
    out.prog.cones = cones;
    out.optimum = out.prog.objective.dot(x);
    return out;
}

}  // namespace

TEST(ConicSolver, NormEpigraph) {
    ProgramBuilder b;
    auto t = b.add_variable("t");
    b.minimize(t);
    b.add_soc({AffineExpr(t), AffineExpr(3.0), AffineExpr(4.0)});
    const auto sol = solve(b.build());
    ASSERT_EQ(sol.status, SolveStatus::optimal);
    EXPECT_NEAR(sol.objective, 5.0, 1e-7);
}

TEST(ConicSolver, DegenerateLp) {
    ProgramBuilder b;
    auto x = b.add_variable("x");
    b.minimize(x);
    b.add_nonneg(x);
    b.add_equality(x - 7.0);
    const auto sol = solve(b.build());
    ASSERT_EQ(sol.status, SolveStatus::optimal);
    EXPECT_NEAR(sol.objective, 7.0, 1e-7);
}

TEST(ConicSolver, UniformSmoothedHingeAtZero) {
    const double h = 10.0, c = 0.0;
    ProgramBuilder b;
    auto ca = b.add_variable("c_a");
    auto cq = b.add_variable("c_q");
    auto s = b.add_variable("s");
    b.minimize(ca + s);
    b.add_rotated_soc(AffineExpr(s), AffineExpr(h), {AffineExpr(cq)});
    b.add_nonneg(ca + cq - (c + h));
    b.add_nonneg(ca);
    b.add_nonneg(cq);
    b.add_nonneg(2.0 * h - AffineExpr(cq));
    const auto sol = solve(b.build());
    ASSERT_EQ(sol.status, SolveStatus::optimal);
    EXPECT_NEAR(sol.objective, 2.5, 1e-7);
}

TEST(ConicSolver, PrimalInfeasible) {
    ProgramBuilder b;
    auto x = b.add_variable("x");
    b.minimize(x);
    b.add_nonneg(x - 1.0);
    b.add_nonneg(-AffineExpr(x));
    const auto p = b.build();
    const auto sol = solve(p);
    ASSERT_EQ(sol.status, SolveStatus::primal_infeasible);
    const Vector r = p.cone_matrix.transpose() * sol.cone_dual;
    EXPECT_LT(r.norm(), 1e-6);
    EXPECT_NEAR(p.cone_rhs.dot(sol.cone_dual), -1.0, 1e-9);
}

TEST(ConicSolver, DualInfeasible) {
    ProgramBuilder b;
    auto x = b.add_variable("x");
    auto y = b.add_variable("y");
    b.minimize(-1.0 * x);
    b.add_nonneg(x);
    b.add_nonneg(y - x);
    const auto p = b.build();
    const auto sol = solve(p);
    ASSERT_EQ(sol.status, SolveStatus::dual_infeasible);
    EXPECT_NEAR(p.objective.dot(sol.primal), -1.0, 1e-9);
}

TEST(ConicSolver, RandomPlantedAgreesWithOracle) {
    std::mt19937_64 rng(20240611);
    SolverSettings st;
    for (int trial = 0; trial < 100; ++trial) {
        const auto P = planted_socp(rng);
        const auto sol = solve(P.prog, st);
        ASSERT_EQ(sol.status, SolveStatus::optimal) << "trial " << trial;
        EXPECT_NEAR(sol.objective, P.optimum, 1e-5 * std::max(1.0, std::abs(P.optimum))) << "trial " << trial;
        // Weak duality and complementarity at the returned point.
        EXPECT_GE(sol.objective - sol.dual_objective, -st.tol_gap * (1.0 + std::abs(sol.objective)));
        EXPECT_LE(sol.slack.dot(sol.cone_dual), st.tol_gap * (1.0 + std::abs(sol.objective)));
        EXPECT_LE(max_constraint_violation(P.prog, sol.primal), 1e-6);
    }
}

TEST(ConicSolver, WarmStartIsSelfConsistent) {
    std::mt19937_64 rng(7);
    SolverSettings st;
    for (int trial = 0; trial < 20; ++trial) {
        const auto P = planted_socp(rng);
        const auto first = solve(P.prog, st);
        ASSERT_TRUE(first.optimal());
        WarmStart ws{first.primal, first.eq_dual, first.slack, first.cone_dual};
        const auto second = solve(P.prog, st, &ws);
        ASSERT_TRUE(second.optimal());
        EXPECT_LE(std::abs(second.objective - first.objective), st.tol_gap * std::max(1.0, std::abs(first.objective)));
    }
}

TEST(ConicSolver, Deterministic) {
    std::mt19937_64 rng(99);
    const auto P = planted_socp(rng);
    const auto a = solve(P.prog);
    const auto b = solve(P.prog);
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_EQ(a.objective, b.objective);
    EXPECT_TRUE(a.primal == b.primal);
}

TEST(ConicSolver, MaxIterReturnsBestIterate) {
    std::mt19937_64 rng(3);
    const auto P = planted_socp(rng);
    SolverSettings st;
    st.max_iter = 2;
    const auto sol = solve(P.prog, st);
    EXPECT_EQ(sol.status, SolveStatus::max_iter);
    EXPECT_EQ(sol.primal.size(), P.prog.num_variables());
}

TEST(ConicValidate, WellFormedIsEmpty) {
    ProgramBuilder b;
    auto t = b.add_variable("t");
    auto u = b.add_variable("u");
    b.minimize(t);
    b.add_soc({AffineExpr(t), u - 3.0, AffineExpr(4.0) + u});
    EXPECT_TRUE(validate(b.build()).empty());
}

TEST(ConicValidate, ConeDimensionMismatch) {
    ProgramBuilder b;
    auto t = b.add_variable("t");
    b.minimize(t);
    b.add_nonneg(t);
    auto p = b.build();
    p.cones.push_back({ConeKind::nonnegative, 2});
    const auto rep = validate(p);
    EXPECT_TRUE(rep.has_errors());
    EXPECT_NE(rep.to_string().find("cone dimensions"), std::string::npos);
}

TEST(ConicValidate, UnboundedFreeVariable) {
    ProgramBuilder b;
    auto t = b.add_variable("t");
    auto u = b.add_variable("u");
    b.minimize(t - 2.0 * AffineExpr(u));
    b.add_nonneg(t);
    const auto rep = validate(b.build());
    EXPECT_FALSE(rep.has_errors());
    EXPECT_NE(rep.to_string().find("unbounded"), std::string::npos);
    EXPECT_NE(rep.to_string().find("u"), std::string::npos);
}

TEST(ConicCbf, RoundTripIsExact) {
    std::mt19937_64 rng(11);
    const auto P = planted_socp(rng);
    const std::string text = to_cbf(P.prog);
    const auto q = from_cbf(text);
    EXPECT_EQ(to_cbf(q), text);
    EXPECT_TRUE(Eigen::MatrixXd(q.cone_matrix).isApprox(Eigen::MatrixXd(P.prog.cone_matrix), 0.0));
    EXPECT_TRUE(q.cone_rhs == P.prog.cone_rhs);
    EXPECT_TRUE(q.objective == P.prog.objective);
    const auto a = solve(P.prog), b = solve(q);
    EXPECT_EQ(a.objective, b.objective);
}
