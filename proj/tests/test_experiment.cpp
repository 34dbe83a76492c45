#include "drtruss/experiment.hpp"
#include "drtruss/property_checks.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace drtruss;

namespace {

ExperimentConfig two_bar_config(int n) {
    ExperimentConfig c;
    c.truss.generator = "two_bar";
    GaussianComponent g{Eigen::Vector2d(100.0, 0.0), Eigen::Matrix2d()};
    g.cov << 150.0, 50.0, 50.0, 100.0;
    c.samples.mixture.components = {g};
    c.samples.mixture.counts = {n};
    c.samples.seed = 1;
    c.sweep.nu_count = 4;
    return c;
}

}  // namespace

TEST(Experiment, VariableCounts) {
    const auto cfg = two_bar_config(7);
    const auto model = make_model(cfg.truss);
    const auto s = make_samples(cfg, model);
    const long m = model.num_members(), n = s.n();
    for (auto kind : {KernelKind::uniform, KernelKind::triangular}) {
        auto c = cfg;
        c.kernel = kind;
        const auto inst = build_mean_cvar(model, s, make_risk(c, s.n()), 1e7);
        const long per_sample = kind == KernelKind::uniform ? 9 : 14;
        EXPECT_EQ(inst.program.num_variables(), m + 5 + per_sample * n + 2 * n * m) << to_string(kind);
    }
}

TEST(Experiment, UpsilonMutationIsCaught) {
    const auto ok = check_upsilon_blocks(10, {10.0}, 1e-6, 5);
    EXPECT_TRUE(ok.pass) << format_check(ok);
    // sign slip in the middle branch of the closed form
    UpsilonFn bad = [](const Kernel& k, double c) {
        return std::abs(c) < k.h ? upsilon(k, -c) : upsilon(k, c);
    };
    const auto r = check_upsilon_blocks(10, {10.0}, 1e-6, 5, {}, bad);
    EXPECT_FALSE(r.pass) << format_check(r);
}

TEST(Experiment, SmallChecksPass) {
    for (const auto& r : {check_conjugate_block(10, 1e-7, 2), check_oracle_agreement(10, 1e-6, 3),
                          check_compliance_blocks(3, 1e-6, 1e-9, 4), check_cvar_anchors(1e-8, 1e-6)})
        EXPECT_TRUE(r.pass) << format_check(r);
}

TEST(Experiment, FrontIsDeterministicAndOrdered) {
    const auto cfg = two_bar_config(12);
    const auto model = make_model(cfg.truss);
    const auto s = make_samples(cfg, model);
    const auto r = make_risk(cfg, s.n());
    const auto a = run_front(model, s, r, cfg.sweep, cfg.solver, 1);
    const auto b = run_front(model, s, r, cfg.sweep, cfg.solver, 3);
    std::ostringstream ca, cb;
    write_pareto_csv(ca, a, false);
    write_pareto_csv(cb, b, false);
    EXPECT_EQ(ca.str(), cb.str());
    ASSERT_EQ(a.points.size(), 4u);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        EXPECT_TRUE(a.points[i].valid) << a.points[i].report.to_string();
        EXPECT_LE(a.points[i].worst_cvar, a.points[i].nu * (1 + 1e-6));
        if (i) EXPECT_LE(a.points[i].worst_mean, a.points[i - 1].worst_mean * (1 + 1e-7));
    }
    EXPECT_FALSE(a.first_failure());
}

TEST(Experiment, LoadDofMismatchIsAConfigError) {
    auto cfg = two_bar_config(3);
    cfg.truss.load_node = 1;  // supported node
    const auto model = make_model(cfg.truss);
    EXPECT_THROW(make_samples(cfg, model), ConfigError);
    cfg.truss.generator = "hexagon";
    EXPECT_THROW(make_model(cfg.truss), ConfigError);
}
