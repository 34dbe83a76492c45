#pragma once

// Conic models for truss compliance under sampled loads.
//
// Scaling. Program variables are dimensionless: areas are divided by
// A = Vbar / sum(l), member forces by F = max_i |xi_i|, and every energy-like
// quantity (b, alpha, eta, iota, y, z, lambda) by S = mean compliance of the
// uniform design. Kernel auxiliaries are additionally measured in units of the
// bandwidth, so their cones read the same for every h. Each var_map slice
// stores the factor that converts program values back to SI.
//
// Variable order: globals (x, alpha, lambda1, lambda2, eta1, eta2) first,
// then one contiguous block per sample: b_i (m), q_i (m), iota1, iota2, u1,
// u2, v1, v2, kernel auxiliaries.

#include "drtruss/conic/program.hpp"
#include "drtruss/conic/solver.hpp"
#include "drtruss/oracles.hpp"
#include "drtruss/risk_kernels.hpp"
#include "drtruss/sampling.hpp"
#include "drtruss/truss_model.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace drtruss {

using conic::AffineExpr;
using conic::Var;

enum class Variant { compliance_min, mean_cvar, mean_cvar_tau0, min_cvar, min_cvar_tau0, min_mean, min_mean_tau0 };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::compliance_min: return "compliance_min";
        case Variant::mean_cvar: return "mean_cvar";
        case Variant::mean_cvar_tau0: return "mean_cvar_tau0";
        case Variant::min_cvar: return "min_cvar";
        case Variant::min_cvar_tau0: return "min_cvar_tau0";
        case Variant::min_mean: return "min_mean";
        case Variant::min_mean_tau0: return "min_mean_tau0";
    }
    return "?";
}

struct Slice {
    std::vector<conic::Index> idx;
    double unit = 1.0;  // SI value = unit * program value
};

struct Scaling {
    double area = 1.0;    // m^2
    double force = 1.0;   // N
    double energy = 1.0;  // J
};

struct InstanceMeta {
    std::string model;
    Variant variant = Variant::compliance_min;
    KernelKind kernel = KernelKind::uniform;
    double h = 0.0, gamma = 0.0, tau = 0.0;
    double nu = std::numeric_limits<double>::infinity();
    int n = 1, m = 0;
};

struct ProblemInstance {
    conic::ConeProgram program;
    std::map<std::string, Slice> var_map;
    Scaling scale;
    InstanceMeta meta;
    double objective_unit = 1.0;  // SI objective = unit * program objective
    std::vector<std::string> warnings;

    double objective_si(const conic::Solution& s) const { return objective_unit * s.objective; }

    Vec values(const std::string& name, const conic::Vector& primal) const {
        const auto& sl = var_map.at(name);
        Vec v(static_cast<Eigen::Index>(sl.idx.size()));
        for (std::size_t k = 0; k < sl.idx.size(); ++k) v[static_cast<Eigen::Index>(k)] = sl.unit * primal[sl.idx[k]];
        return v;
    }
    bool has(const std::string& name) const { return var_map.count(name) != 0; }
};

namespace detail {

class Assembly {
public:
    Assembly(const TrussModel& model, std::vector<Eigen::VectorXd> loads, Variant variant)
        : model_(model), loads_(std::move(loads)) {
        inst_.meta.model = model.name;
        inst_.meta.variant = variant;
        inst_.meta.m = model.num_members();
        inst_.meta.n = static_cast<int>(loads_.size());
        auto& sc = inst_.scale;
        sc.area = model.volume_cap / model.lengths.sum();
        double fmax = 0.0, csum = 0.0;
        const Design uni{model.uniform_design()};
        for (const auto& xi : loads_) {
            fmax = std::max(fmax, xi.norm());
            csum += compliance(model, uni, xi);
        }
        sc.force = fmax > 0.0 ? fmax : 1.0;
        const double cmean = csum / static_cast<double>(loads_.size());
        sc.energy = std::isfinite(cmean) && cmean > 0.0 ? cmean : 1.0;
        inst_.objective_unit = sc.energy;
    }

    Var add(const std::string& slice, double unit, const std::string& label) {
        const Var v = b_.add_variable(label);
        auto& sl = inst_.var_map[slice];
        sl.idx.push_back(v.index);
        sl.unit = unit;
        return v;
    }

    double energy_unit() const { return inst_.scale.energy; }
    conic::ProgramBuilder& builder() { return b_; }
    ProblemInstance& instance() { return inst_; }

    /// Areas and the volume budget, or areas pinned to `fixed` (m^2) when given.
    void add_design(const Eigen::VectorXd* fixed = nullptr) {
        const int m = model_.num_members();
        const double L = model_.lengths.sum();
        AffineExpr vol(1.0);
        for (int j = 0; j < m; ++j) {
            x_.push_back(add("x", inst_.scale.area, "x[" + std::to_string(j) + "]"));
            if (fixed) {
                b_.add_equality(x_.back() - (*fixed)[j] / inst_.scale.area);
                continue;
            }
            b_.add_nonneg(x_.back());
            vol -= (model_.lengths[j] / L) * AffineExpr(x_.back());
        }
        if (!fixed) b_.add_nonneg(vol);
    }

    /// Member cones and equilibrium for load case i; returns sum_j 2 b_ij (scaled compliance).
    AffineExpr add_members(int i) {
        const auto& sc = inst_.scale;
        const int m = model_.num_members(), d = model_.num_dofs();
        const std::string tag = "[" + std::to_string(i) + "]";
        std::vector<Var> bv, qv;
        for (int j = 0; j < m; ++j) bv.push_back(add("b", sc.energy, "b" + tag + "[" + std::to_string(j) + "]"));
        for (int j = 0; j < m; ++j) qv.push_back(add("q", sc.force, "q" + tag + "[" + std::to_string(j) + "]"));
        AffineExpr pi;
        for (int j = 0; j < m; ++j) {
            const double kappa =
                std::sqrt(2.0 * model_.lengths[j] / (model_.young_modulus * sc.area * sc.energy)) * sc.force;
            b_.add_rotated_soc(bv[j], x_[j], {kappa * AffineExpr(qv[j])});
            pi += 2.0 * AffineExpr(bv[j]);
        }
        const Eigen::VectorXd& xi = loads_[static_cast<std::size_t>(i)];
        for (int k = 0; k < d; ++k) {
            AffineExpr eq(-xi[k] / sc.force);
            for (int j = 0; j < m; ++j)
                if (model_.beta(k, j) != 0.0) eq += model_.beta(k, j) * AffineExpr(qv[j]);
            b_.add_equality(eq);
        }
        return pi;
    }

    ProblemInstance finish() {
        inst_.program = b_.build();
        return std::move(inst_);
    }

private:
    const TrussModel& model_;
    std::vector<Eigen::VectorXd> loads_;
    conic::ProgramBuilder b_;
    ProblemInstance inst_;
    std::vector<Var> x_;
};

}  // namespace detail

/// Epigraph of Upsilon_k(c) for an affine argument c, with bandwidth h in the units of c.
/// Auxiliaries are measured in units of h; `add(slice, unit, label)` creates each one, where
/// `h_si` is the bandwidth in J (for the var_map unit factors). Returns an expression that
/// bounds Upsilon(c) from above and is tight at the optimum.
template <class AddVar>
AffineExpr add_upsilon_block(conic::ProgramBuilder& b, KernelKind kind, double h, const AffineExpr& c, double h_si,
                             AddVar&& add, const std::string& tag) {
    if (kind == KernelKind::uniform) {
        const Var ca = add("c_a", h_si, "c_a" + tag);
        const Var cq = add("c_q", h_si, "c_q" + tag);
        const Var s = add("s", h_si, "s" + tag);
        b.add_rotated_soc(s, AffineExpr(1.0), {AffineExpr(cq)});
        b.add_nonneg(h * (ca + cq) - h - c);
        b.add_nonneg(ca);
        b.add_nonneg(cq);
        b.add_nonneg(2.0 - AffineExpr(cq));
        return h * (ca + s);
    }
    const Var cc1 = add("c_c1", h_si, "c_c1" + tag);
    const Var cc2 = add("c_c2", h_si, "c_c2" + tag);
    const Var ca = add("c_a", h_si, "c_a" + tag);
    const Var s1 = add("s1", h_si * h_si * h_si, "s1" + tag);
    const Var s2 = add("s2", h_si * h_si * h_si, "s2" + tag);
    const Var s3 = add("s3", h_si, "s3" + tag);
    const Var r1 = add("r1", h_si * h_si, "r1" + tag);
    const Var r2 = add("r2", h_si * h_si, "r2" + tag);
    b.add_rotated_soc(s1, cc1, {2.0 * AffineExpr(r1)});
    b.add_rotated_soc(r1, AffineExpr(0.25), {AffineExpr(cc1)});
    b.add_rotated_soc(s2, cc2, {2.0 * AffineExpr(r2)});
    b.add_rotated_soc(r2, AffineExpr(0.25), {AffineExpr(cc2)});
    b.add_nonneg(s3 + cc2 - 5.0 / 6.0);
    b.add_nonneg(h * (ca + cc1 - cc2) - c);
    b.add_nonneg(cc1);
    b.add_nonneg(1.0 - AffineExpr(cc1));
    b.add_nonneg(cc2);
    b.add_nonneg(1.0 - AffineExpr(cc2));
    b.add_nonneg(ca);
    return h * (ca + (1.0 / 6.0) * (s1 + s2) + s3);
}

/// z + lambda >= ||(z - lambda, y)||, y >= iota + 2 lambda, y >= 0.
/// At the optimum z = lambda phi*(iota/lambda) + lambda; the extra lambda is why the
/// programs carry (tau - 1) lambda instead of tau lambda.
inline void add_conjugate_block(conic::ProgramBuilder& b, const AffineExpr& lambda, const AffineExpr& iota, Var y,
                                Var z) {
    b.add_rotated_soc(z, lambda, {AffineExpr(y)});
    b.add_nonneg(y - iota - 2.0 * lambda);
    b.add_nonneg(y);
}

/// Same block with y = 2 lambda + u and z = lambda + u + v: 4 v lambda >= u^2, u >= iota.
/// Returns u + v, so z - lambda comes out without forming z. For small tau the multiplier
/// grows like tau^(-1/2) and the plain block loses the difference (tau - 1) lambda + z.
inline AffineExpr add_conjugate_block_shifted(conic::ProgramBuilder& b, const AffineExpr& lambda,
                                              const AffineExpr& iota, Var u, Var v) {
    b.add_rotated_soc(v, lambda, {AffineExpr(u)});
    b.add_nonneg(u - iota);
    return u + v;
}

/// Standalone program whose optimal value is Upsilon_k(c) (c and h in J).
inline conic::ConeProgram build_upsilon_program(const Kernel& k, double c) {
    k.check();
    conic::ProgramBuilder b;
    auto add = [&](const std::string&, double, const std::string& label) { return b.add_variable(label); };
    b.minimize(add_upsilon_block(b, k.kind, k.h, AffineExpr(c), k.h, add, ""));
    return b.build();
}

/// Standalone program whose optimal value is phi*(y): the conjugate block at lambda = 1 with
/// objective z - lambda. `shifted` builds the form used inside the risk programs.
inline conic::ConeProgram build_conjugate_program(double y, bool shifted = false) {
    conic::ProgramBuilder b;
    const Var a = b.add_variable("a");
    const Var z = b.add_variable("z");
    if (shifted) {
        b.minimize(add_conjugate_block_shifted(b, AffineExpr(1.0), AffineExpr(y), a, z));
    } else {
        add_conjugate_block(b, AffineExpr(1.0), AffineExpr(y), a, z);
        b.minimize(z - 1.0);
    }
    return b.build();
}

namespace detail {

struct RiskBlocks {
    bool mean = false;            // worst-case mean terms
    bool cvar = false;            // CVaR terms
    bool cvar_objective = false;  // minimize CVaR instead of constraining it
    double nu = std::numeric_limits<double>::infinity();
};

inline std::vector<Eigen::VectorXd> sample_loads(const TrussModel& model, const LoadSampleSet& samples) {
    if (samples.n() < 1) throw std::invalid_argument("no load samples");
    std::vector<Eigen::VectorXd> loads;
    for (const auto& s : samples.samples) loads.push_back(load_vector(model, samples.loaded_dofs, s));
    return loads;
}

inline ProblemInstance build_risk_program(const TrussModel& model, const LoadSampleSet& samples, const RiskSpec& risk,
                                          Variant variant, const RiskBlocks& rb) {
    const int n = samples.n();
    risk.check(n);
    Assembly A(model, sample_loads(model, samples), variant);
    auto& inst = A.instance();
    inst.meta.kernel = risk.kernel.kind;
    inst.meta.h = risk.kernel.h;
    inst.meta.gamma = risk.gamma;
    inst.meta.tau = risk.tau;
    inst.meta.nu = rb.nu;
    auto& b = A.builder();
    const double S = A.energy_unit();
    const double hs = risk.kernel.h / S;
    const bool robust = risk.tau > 0.0;
    auto add = [&](const std::string& slice, double unit, const std::string& label) { return A.add(slice, unit, label); };

    A.add_design();
    Var alpha{}, lam1{}, lam2{}, eta1{}, eta2{};
    if (rb.cvar) alpha = A.add("alpha", S, "alpha");
    if (robust && rb.cvar) lam1 = A.add("lambda1", S, "lambda1");
    if (robust && rb.mean) lam2 = A.add("lambda2", S, "lambda2");
    if (robust && rb.cvar) eta1 = A.add("eta1", S, "eta1");
    if (robust && rb.mean) eta2 = A.add("eta2", S, "eta2");
    if (robust && rb.cvar) b.add_nonneg(lam1);
    if (robust && rb.mean) b.add_nonneg(lam2);

    AffineExpr mean_sum, cvar_sum;
    for (int i = 0; i < n; ++i) {
        const std::string tag = "[" + std::to_string(i) + "]";
        const double w = risk.w0[i];
        const AffineExpr pi = A.add_members(i);
        if (robust) {
            Var iota1{}, iota2{}, u1{}, u2{}, v1{}, v2{};
            if (rb.cvar) iota1 = A.add("iota1", S, "iota1" + tag);
            if (rb.mean) iota2 = A.add("iota2", S, "iota2" + tag);
            if (rb.cvar) u1 = A.add("u1", S, "u1" + tag);
            if (rb.mean) u2 = A.add("u2", S, "u2" + tag);
            if (rb.cvar) v1 = A.add("v1", S, "v1" + tag);
            if (rb.mean) v2 = A.add("v2", S, "v2" + tag);
            if (rb.mean) {
                b.add_nonneg(iota2 - pi + eta2);
                mean_sum += w * add_conjugate_block_shifted(b, lam2, iota2, u2, v2);
            }
            if (rb.cvar) {
                const AffineExpr ups = add_upsilon_block(b, risk.kernel.kind, hs, pi - alpha, risk.kernel.h, add, tag);
                b.add_nonneg(iota1 - ups + eta1);
                cvar_sum += w * add_conjugate_block_shifted(b, lam1, iota1, u1, v1);
            }
        } else {
            if (rb.mean) mean_sum += w * pi;
            if (rb.cvar) cvar_sum += w * add_upsilon_block(b, risk.kernel.kind, hs, pi - alpha, risk.kernel.h, add, tag);
        }
    }

    // Worst-case expectations of the compliance and of the smoothed excess. The shifted blocks
    // return z - lambda and w0 sums to one, so the lambda coefficient is tau.
    AffineExpr mean_term = mean_sum, cvar_term = cvar_sum;
    if (robust && rb.mean) mean_term = risk.tau * AffineExpr(lam2) + eta2 + mean_sum;
    if (robust && rb.cvar) cvar_term = risk.tau * AffineExpr(lam1) + eta1 + cvar_sum;

    if (rb.cvar_objective) {
        b.minimize(alpha + (1.0 / (1.0 - risk.gamma)) * cvar_term);
    } else {
        if (rb.cvar) b.add_nonneg((1.0 - risk.gamma) * (rb.nu / S - AffineExpr(alpha)) - cvar_term);
        b.minimize(mean_term);
    }

    if (robust) {
        const double bound = (risk.w0.array() / (1.0 - risk.w0.array())).minCoeff();
        if (risk.tau >= bound)
            inst.warnings.push_back("tau >= min_i w0_i/(1 - w0_i): the weight set reaches the simplex boundary");
    }
    return A.finish();
}

}  // namespace detail

/// Minimum compliance for a single load (N): min sum 2 b_j over member cones, equilibrium and X.
inline ProblemInstance build_compliance_min(const TrussModel& model, const Eigen::VectorXd& load) {
    if (load.size() != model.num_dofs()) throw std::invalid_argument("load has wrong length");
    detail::Assembly A(model, {load}, Variant::compliance_min);
    A.add_design();
    A.builder().minimize(A.add_members(0));
    return A.finish();
}

/// The member-cone program with the areas held at x (all positive); its value is the compliance.
inline ProblemInstance build_compliance_at(const TrussModel& model, const Design& x, const Eigen::VectorXd& load) {
    if (load.size() != model.num_dofs()) throw std::invalid_argument("load has wrong length");
    if (x.x.size() != model.num_members() || !(x.x.minCoeff() > 0.0))
        throw std::invalid_argument("fixed design needs m positive areas");
    detail::Assembly A(model, {load}, Variant::compliance_min);
    A.add_design(&x.x);
    A.builder().minimize(A.add_members(0));
    return A.finish();
}

/// Worst-case mean minimization under a worst-case CVaR bound nu (J), tau > 0.
inline ProblemInstance build_dro_mean_cvar(const TrussModel& model, const LoadSampleSet& samples, const RiskSpec& risk,
                                           double nu) {
    if (!(risk.tau > 0.0)) throw std::invalid_argument("build_dro_mean_cvar needs tau > 0; use the tau = 0 builder");
    if (!std::isfinite(nu)) throw std::invalid_argument("nu must be finite");
    return detail::build_risk_program(model, samples, risk, Variant::mean_cvar, {true, true, false, nu});
}

/// The tau = 0 specialization: nominal weights, no dual multipliers.
inline ProblemInstance build_dro_mean_cvar_tau0(const TrussModel& model, const LoadSampleSet& samples,
                                                const RiskSpec& risk, double nu) {
    if (risk.tau != 0.0) throw std::invalid_argument("build_dro_mean_cvar_tau0 needs tau = 0");
    if (!std::isfinite(nu)) throw std::invalid_argument("nu must be finite");
    return detail::build_risk_program(model, samples, risk, Variant::mean_cvar_tau0, {true, true, false, nu});
}

/// Dispatches on tau.
inline ProblemInstance build_mean_cvar(const TrussModel& model, const LoadSampleSet& samples, const RiskSpec& risk,
                                       double nu) {
    return risk.tau > 0.0 ? build_dro_mean_cvar(model, samples, risk, nu)
                          : build_dro_mean_cvar_tau0(model, samples, risk, nu);
}

/// min over x, alpha of alpha + 1/(1-gamma) * worst-case expectation of Upsilon(pi_i - alpha).
inline ProblemInstance build_min_worstcase_cvar(const TrussModel& model, const LoadSampleSet& samples,
                                                const RiskSpec& risk) {
    const Variant v = risk.tau > 0.0 ? Variant::min_cvar : Variant::min_cvar_tau0;
    return detail::build_risk_program(model, samples, risk, v, {false, true, true});
}

/// Worst-case mean minimization without a CVaR bound (nu = +inf).
inline ProblemInstance build_min_worstcase_mean(const TrussModel& model, const LoadSampleSet& samples,
                                                const RiskSpec& risk) {
    const Variant v = risk.tau > 0.0 ? Variant::min_mean : Variant::min_mean_tau0;
    return detail::build_risk_program(model, samples, risk, v, {true, false, false});
}

// ---------------------------------------------------------------------------
// Extraction

struct Extracted {
    Design design;
    double alpha = std::numeric_limits<double>::quiet_NaN();  // J
    double objective = 0.0;                                  // J
    double worst_mean = 0.0;                                 // J
    double worst_cvar = 0.0;                                 // J, recomputed by the oracles
    ValidationReport report;
};

/// Reads the design through var_map and re-derives worst-case mean and CVaR from linear-solve
/// compliances. Throws unless the solve is optimal.
inline Extracted extract_design(const ProblemInstance& inst, const conic::Solution& sol, const TrussModel& model,
                                const LoadSampleSet& samples, const RiskSpec& risk) {
    if (!sol.optimal())
        throw std::runtime_error(std::string("cannot extract a design from a ") + conic::to_string(sol.status) +
                                 " solve");
    Extracted e;
    e.design.x = inst.values("x", sol.primal).cwiseMax(0.0);
    if (inst.has("alpha")) e.alpha = inst.values("alpha", sol.primal)[0];
    e.objective = inst.objective_si(sol);
    const bool mean_objective = inst.meta.variant == Variant::mean_cvar ||
                                inst.meta.variant == Variant::mean_cvar_tau0 ||
                                inst.meta.variant == Variant::min_mean || inst.meta.variant == Variant::min_mean_tau0;
    e.report = validate_solution(model, samples, risk, inst.meta.nu, e.design,
                                 mean_objective ? e.objective : std::numeric_limits<double>::quiet_NaN());
    e.worst_mean = mean_objective ? e.objective : e.report.worst_mean;
    e.worst_cvar = e.report.worst_cvar;
    return e;
}

}  // namespace drtruss
