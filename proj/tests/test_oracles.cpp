#include "drtruss/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace drtruss;

namespace {

// Slow reference: projected ascent with Dykstra projections onto the weight set.
double ascent_reference(const Vec& f, const Vec& w0, double tau) {
    Vec w = w0;
    const double step = 1.0 / std::max(f.maxCoeff() - f.minCoeff(), 1e-300);
    for (int it = 0; it < 3000; ++it) w = project_weight_set(w + step * f, w0, tau, 1e-14, 20000);
    return w.dot(f);
}

}  // namespace

TEST(Oracles, Projections) {
    Vec p(3);
    p << 0.9, 0.6, -0.2;
    const Vec s = project_simplex(p);
    EXPECT_NEAR(s.sum(), 1.0, 1e-15);
    EXPECT_NEAR(s[0], 0.65, 1e-15);
    EXPECT_EQ(s[2], 0.0);
    const Vec w0 = RiskSpec::uniform_weights(3);
    const Vec q = project_weight_set(p, w0, 0.1);
    EXPECT_NEAR(q.sum(), 1.0, 1e-10);
    EXPECT_LE(phi_divergence(q, w0), 0.1 + 1e-10);
}

TEST(Oracles, PrimalMatchesDualOnRandomInstances) {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> nd(2, 8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        const int n = nd(rng);
        const double tau = 0.9 * (1.0 - U(rng));  // (0, 0.9]
        Vec f(n);
        for (int i = 0; i < n; ++i) f[i] = 100.0 * U(rng) - 20.0;
        const Vec w0 = RiskSpec::uniform_weights(n);
        const auto p = worst_case_expectation_primal(f, w0, tau);
        const double d = worst_case_expectation_dual(f, w0, tau);
        EXPECT_NEAR(p.value, d, 1e-6 * std::max(1.0, std::abs(d))) << "n=" << n << " tau=" << tau;
        EXPECT_NEAR(p.weights.sum(), 1.0, 1e-12);
        EXPECT_GE(p.weights.minCoeff(), 0.0);
        EXPECT_LE(phi_divergence(p.weights, w0), tau + 1e-10);
    }
}

TEST(Oracles, PrimalMatchesAscentReference) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        const int n = 6;
        Vec f(n), w0(n);
        for (int i = 0; i < n; ++i) {
            f[i] = U(rng);
            w0[i] = 0.5 + U(rng);
        }
        w0 /= w0.sum();
        const double tau = 0.05 + 0.5 * U(rng);
        EXPECT_NEAR(worst_case_expectation_primal(f, w0, tau).value, ascent_reference(f, w0, tau), 1e-7);
    }
}

TEST(Oracles, TwoPointClosedForm) {
    Vec f(2);
    f << 0.0, 1.0;
    const Vec w0 = RiskSpec::uniform_weights(2);
    const double exact = (1.0 + std::sqrt(0.5)) / 2.0;
    EXPECT_NEAR(worst_case_expectation_primal(f, w0, 0.5).value, exact, 1e-14);
    EXPECT_NEAR(worst_case_expectation_dual(f, w0, 0.5), exact, 1e-9);
}

TEST(Oracles, LargeRadiusReachesTheMaximum) {
    Vec f(4);
    f << 3.0, -1.0, 7.0, 2.0;
    const Vec w0 = RiskSpec::uniform_weights(4);
    for (double tau : {3.0, 5.0}) {  // tau >= n - 1: the vertex is inside the ball
        EXPECT_DOUBLE_EQ(worst_case_expectation_primal(f, w0, tau).value, 7.0);
        EXPECT_NEAR(worst_case_expectation_dual(f, w0, tau), 7.0, 1e-8);
    }
    EXPECT_LT(worst_case_expectation_primal(f, w0, 2.9).value, 7.0);
    EXPECT_DOUBLE_EQ(worst_case_expectation_primal(f, w0, 0.0).value, w0.dot(f));
}

TEST(Oracles, TiesAndDegenerateValues) {
    Vec f(5);
    f << 2.0, 2.0, 1.0, 0.0, 2.0;
    const Vec w0 = RiskSpec::uniform_weights(5);
    EXPECT_NEAR(worst_case_expectation_primal(f, w0, 0.1).value, worst_case_expectation_dual(f, w0, 0.1), 1e-8);
    EXPECT_DOUBLE_EQ(worst_case_expectation_primal(f, w0, 1.0).value, 2.0);  // (1 - 3/5)/(3/5) = 2/3 <= 1
    EXPECT_DOUBLE_EQ(worst_case_expectation_primal(Vec::Constant(3, 4.0), RiskSpec::uniform_weights(3), 0.2).value, 4.0);
}

TEST(Oracles, WorstCaseExpectationGrowsWithRadius) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Vec f(10);
    for (int i = 0; i < 10; ++i) f[i] = U(rng);
    const Vec w0 = RiskSpec::uniform_weights(10);
    double prev = w0.dot(f);
    for (double tau = 0.01; tau < 12.0; tau *= 1.5) {
        const double v = worst_case_expectation_primal(f, w0, tau).value;
        EXPECT_GE(v, prev - 1e-14);
        prev = v;
    }
    EXPECT_DOUBLE_EQ(prev, f.maxCoeff());
}

TEST(Oracles, KernelCvarAnchors) {
    const Vec f = Vec::Zero(1), w = Vec::Ones(1);
    EXPECT_NEAR(kde_cvar_by_quadrature(f, w, Kernel{KernelKind::uniform, 10.0}, 0.95), 9.5, 1e-10);
    EXPECT_NEAR(kde_cvar_by_quadrature(f, w, Kernel{KernelKind::triangular, 10.0}, 0.95), 7.89181489322108, 1e-9);
    RiskSpec r{Kernel{KernelKind::triangular, 10.0}, 0.95, 0.0, w};
    EXPECT_NEAR(worst_case_cvar(f, r).value, 7.89181489322108, 1e-8);
    r.kernel.kind = KernelKind::uniform;
    EXPECT_NEAR(worst_case_cvar(f, r).value, 9.5, 1e-8);
}

TEST(Oracles, KernelCvarMatchesQuadratureOnSamples) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> N(100.0, 15.0);
    Vec f(30);
    for (int i = 0; i < 30; ++i) f[i] = N(rng);
    const Vec w = RiskSpec::uniform_weights(30);
    for (auto kind : {KernelKind::uniform, KernelKind::triangular})
        for (double gamma : {0.9, 0.95}) {
            RiskSpec r{Kernel{kind, 5.0}, gamma, 0.0, w};
            EXPECT_NEAR(worst_case_cvar(f, r).value, kde_cvar_by_quadrature(f, w, r.kernel, gamma), 1e-7);
        }
}

TEST(Oracles, KernelCvarApproachesDiscreteCvar) {
    Vec f(20);
    for (int i = 0; i < 20; ++i) f[i] = i * i;
    const Vec w = RiskSpec::uniform_weights(20);
    const double d = discrete_cvar(f, w, 0.9);
    EXPECT_NEAR(d, (324.0 + 361.0) / 2.0, 1e-12);
    for (auto kind : {KernelKind::uniform, KernelKind::triangular}) {
        RiskSpec r{Kernel{kind, 1e-4}, 0.9, 0.0, w};
        EXPECT_NEAR(worst_case_cvar(f, r).value, d, 1e-3);
    }
}

TEST(Oracles, ValidationReport) {
    const auto t = build_single_bar(1.0, 20e9, 1e-4);
    LoadSampleSet s;
    s.loaded_dofs = {0};
    for (double v : {90.0, 100.0, 110.0}) s.samples.push_back(Eigen::VectorXd::Constant(1, v));
    RiskSpec r{Kernel{KernelKind::uniform, 10.0}, 0.9, 0.1, RiskSpec::uniform_weights(3)};
    const Design x{Eigen::VectorXd::Constant(1, 1e-4)};
    const auto rep = validate_solution(t, s, r, 1e9, x, std::numeric_limits<double>::quiet_NaN());
    EXPECT_TRUE(rep.passed()) << rep.to_string();
    EXPECT_NEAR(rep.compliances[1], 5000.0, 1e-8);
    const auto bad = validate_solution(t, s, r, 1.0, Design{Eigen::VectorXd::Constant(1, 2e-4)}, 0.0);
    EXPECT_FALSE(bad.passed());
}
