#pragma once

// Primal-dual interior-point method for  min c'x  s.t.  Ax = b, Gx + s = h, s in K.
//
// The homogeneous self-dual embedding is iterated with Nesterov-Todd scaling and
// Mehrotra predictor-corrector steps. Each Newton system is reduced to the
// quasi-definite KKT matrix (in the scaled cone variable W dz)
//
//     [ dI       A'    G'W^{-1} ]
//     [ A       -dI    0        ]
//     [ W^{-1}G  0    -I        ]
//
// factored by a sparse LDL' with a fixed ordering and dynamic pivot
// regularization, followed by iterative refinement against the unregularized
// matrix.

#include "drtruss/conic/cones.hpp"
#include "drtruss/conic/ldl.hpp"
#include "drtruss/conic/program.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace drtruss::conic {

enum class SolveStatus { optimal, primal_infeasible, dual_infeasible, max_iter, numerical_failure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::primal_infeasible: return "primal_infeasible";
        case SolveStatus::dual_infeasible: return "dual_infeasible";
        case SolveStatus::max_iter: return "max_iter";
        case SolveStatus::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

struct SolverSettings {
    double tol_feas = 1e-8;
    double tol_gap = 1e-8;
    double tol_infeas = 1e-8;
    int max_iter = 200;
    double static_reg = 1e-9;
    int refine_steps = 2;
    double step_fraction = 0.99;
    int equil_iters = 3;
    double time_limit_s = 0.0;  // <= 0 disables the limit
    bool verbose = false;
};

/**
 * Solver output. For optimal and max_iter/numerical_failure the vectors hold the
 * (best) iterate. For primal_infeasible, (eq_dual, cone_dual) is a certificate with
 * A'y + G'z = 0, z in K, b'y + h'z = -1. For dual_infeasible, primal is a ray with
 * Ax = 0, -Gx in K, c'x = -1.
 */
struct Solution {
    SolveStatus status = SolveStatus::numerical_failure;
    Vector primal;
    Vector eq_dual;
    Vector cone_dual;
    Vector slack;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double dual_objective = std::numeric_limits<double>::quiet_NaN();
    double gap = std::numeric_limits<double>::infinity();
    double primal_residual = std::numeric_limits<double>::infinity();
    double dual_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    double solve_time_s = 0.0;
    bool timed_out = false;

    bool optimal() const { return status == SolveStatus::optimal; }
};

/// Optional starting point in the original (unscaled) variables.
struct WarmStart {
    Vector x, y, s, z;
};

namespace detail {

class InteriorPoint {
public:
    InteriorPoint(const ConeProgram& p, const SolverSettings& st) : prog_(p), st_(st), cones_(p.cones) {
        n_ = p.num_variables();
        p_ = p.num_equalities();
        m_ = p.num_cone_rows();
        reg_ = st.static_reg;
        refine_ = st.refine_steps;
        equilibrate();
        build_kkt_pattern();
    }

    Solution run(const WarmStart* warm) {
        const auto t0 = std::chrono::steady_clock::now();
        auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

        Solution best;
        double best_merit = std::numeric_limits<double>::infinity();
        initialize(warm);

        bool broke_down = false;
        int stalled = 0;
        for (int it = 0; it <= st_.max_iter; ++it) {
            Solution cur = evaluate(it);
            cur.solve_time_s = elapsed();
            if (st_.verbose)
                std::fprintf(stderr, "%3d  pcost %+.8e  dcost %+.8e  pres %.2e  dres %.2e  gap %.2e  tau %.2e  kap %.2e\n",
                             it, cur.objective, cur.dual_objective, cur.primal_residual, cur.dual_residual, cur.gap,
                             tau_, kap_);
            const double merit = std::max({cur.primal_residual, cur.dual_residual, cur.gap});
            if (std::isfinite(merit) && merit < best_merit) {
                best_merit = merit;
                best = cur;
            } else if (it > 0) {
                escalate_refinement("no progress");
            }
            if (cur.status == SolveStatus::optimal || cur.status == SolveStatus::primal_infeasible ||
                cur.status == SolveStatus::dual_infeasible)
                return cur;
            if (it == st_.max_iter) break;
            if (st_.time_limit_s > 0.0 && elapsed() > st_.time_limit_s) {
                best.timed_out = true;
                break;
            }

            // On breakdown, retry the step with stronger regularization; refinement
            // against the unregularized matrix keeps the directions consistent. A collapsed
            // or failed step is retried with more refinement, which stays in effect afterwards.
            Step step;
            bool ok = false;
            for (;;) {
                ok = false;
                for (double reg = st_.static_reg; reg <= 1e-4 && !ok; reg *= 100.0) {
                    reg_ = reg;
                    ok = compute_step(step);
                }
                reg_ = st_.static_reg;
                if (ok && step.alpha >= 1e-10) break;
                if (!escalate_refinement(ok ? "short step" : "breakdown")) break;
            }
            if (!ok) {
                broke_down = true;
                break;
            }
            if (step.alpha < 1e-10) {
                if (++stalled >= 3) break;
            } else {
                stalled = 0;
            }
            x_ += step.alpha * step.dx;
            y_ += step.alpha * step.dy;
            z_ += step.alpha * step.dz;
            s_ += step.alpha * step.ds;
            tau_ += step.alpha * step.dtau;
            kap_ += step.alpha * step.dkap;
        }

        if (best.primal.size() == 0) best = evaluate(0);
        best.status = broke_down || stalled >= 3 ? SolveStatus::numerical_failure : SolveStatus::max_iter;
        best.solve_time_s = elapsed();
        return best;
    }

private:
    // End-game directions lose accuracy first; doubles the refinement steps up to kMaxRefine.
    bool escalate_refinement(const char* why) {
        if (refine_ >= kMaxRefine) return false;
        refine_ = std::min(kMaxRefine, 2 * std::max(refine_, 1));
        if (st_.verbose) std::fprintf(stderr, "     %s, refinement steps -> %d\n", why, refine_);
        return true;
    }

    struct Step {
        Vector dx, dy, dz, ds;
        double dtau = 0.0, dkap = 0.0, alpha = 0.0;
    };

    // One Mehrotra predictor-corrector direction at the current iterate.
    bool compute_step(Step& out) {
        const Vector rx = As_.transpose() * y_ + Gs_.transpose() * z_ + cs_ * tau_;
        const Vector ry = As_ * x_ - bs_ * tau_;
        const Vector rz = Gs_ * x_ + s_ - hs_ * tau_;
        const double rtau = cs_.dot(x_) + bs_.dot(y_) + hs_.dot(z_) + kap_;

        Vector lambda;
        if (!cones_.update_scaling(s_, z_, lambda)) return false;
        if (!factorize()) return false;
        const double mu = (s_.dot(z_) + tau_ * kap_) / (static_cast<double>(cones_.degree()) + 1.0);

        // Direction for the homogenizing variable.
        Vector x1, y1, z1, x2, y2, z2, tmp;
        if (!kkt_solve(-cs_, bs_, hs_, x1, y1, z1)) return false;
        const double denom = kap_ / tau_ - (cs_.dot(x1) + bs_.dot(y1) + hs_.dot(z1));
        if (!(std::isfinite(denom) && denom > 0.0)) return false;

        // Predictor.
        if (!kkt_solve(-rx, -ry, s_ - rz, x2, y2, z2)) return false;
        double bkap = kap_ * tau_;
        const double dtau_a = (rtau - bkap / tau_ + cs_.dot(x2) + bs_.dot(y2) + hs_.dot(z2)) / denom;
        const Vector dza = z2 + dtau_a * z1;
        Vector dsa;
        {
            // The slack step comes from the linearized cone residual; rebuilding it through W
            // loses accuracy on blocks where W is large.
            const Vector dxa = x2 + dtau_a * x1;
            dsa = -rz - Gs_ * dxa + hs_ * dtau_a;
        }
        const double dkap_a = -(bkap + kap_ * dtau_a) / tau_;
        const double alpha_a = std::min(1.0, step_length(dsa, dza, dtau_a, dkap_a));
        const double sigma = std::clamp(std::pow(1.0 - alpha_a, 3), 1e-4, 1.0);

        // Corrector with the second-order term.
        Vector wdsa, wdza, ds1, ws;
        cones_.apply_winv(dsa, wdsa);
        cones_.apply_w(dza, wdza);
        cones_.product(lambda, lambda, ds1);
        cones_.product(wdsa, wdza, tmp);
        ds1 += tmp;
        ds1 -= sigma * mu * cones_.unit();
        cones_.divide(lambda, ds1, tmp, true);  // tmp = lambda \ ds1
        cones_.apply_w(tmp, ws);
        const double f = 1.0 - sigma;
        if (!kkt_solve(-f * rx, -f * ry, -f * rz + ws, x2, y2, z2)) return false;
        bkap = kap_ * tau_ + dkap_a * dtau_a - sigma * mu;
        out.dtau = (f * rtau - bkap / tau_ + cs_.dot(x2) + bs_.dot(y2) + hs_.dot(z2)) / denom;
        out.dx = x2 + out.dtau * x1;
        out.dy = y2 + out.dtau * y1;
        out.dz = z2 + out.dtau * z1;
        out.ds = -f * rz - Gs_ * out.dx + hs_ * out.dtau;
        out.dkap = -(bkap + kap_ * out.dtau) / tau_;
        if (!out.dx.allFinite() || !out.dy.allFinite() || !out.dz.allFinite() || !out.ds.allFinite() ||
            !std::isfinite(out.dtau) || !std::isfinite(out.dkap))
            return false;
        out.alpha = std::min(1.0, st_.step_fraction * step_length(out.ds, out.dz, out.dtau, out.dkap));
        return true;
    }

    // ---------------------------------------------------------------- scaling

    void equilibrate() {
        const ConeProgram& p = prog_;
        D_ = Vector::Ones(n_);
        EA_ = Vector::Ones(p_);
        EG_ = Vector::Ones(m_);
        As_ = p.eq_matrix;
        Gs_ = p.cone_matrix;
        if (As_.rows() == 0) As_.resize(0, n_);
        if (Gs_.rows() == 0) Gs_.resize(0, n_);
        As_.makeCompressed();
        Gs_.makeCompressed();

        auto root = [](double v) { return v < 1e-8 ? 1.0 : std::clamp(std::sqrt(v), 1e-4, 1e4); };
        for (int it = 0; it < st_.equil_iters; ++it) {
            Vector colmax = Vector::Zero(n_), rowA = Vector::Zero(p_), rowG = Vector::Zero(m_);
            for (Index j = 0; j < n_; ++j) {
                for (SparseMatrix::InnerIterator e(As_, j); e; ++e) {
                    const double a = std::abs(e.value());
                    colmax[j] = std::max(colmax[j], a);
                    rowA[e.row()] = std::max(rowA[e.row()], a);
                }
                for (SparseMatrix::InnerIterator e(Gs_, j); e; ++e) {
                    const double a = std::abs(e.value());
                    colmax[j] = std::max(colmax[j], a);
                    rowG[e.row()] = std::max(rowG[e.row()], a);
                }
            }
            for (const auto& b : cones_.blocks())
                if (b.kind == ConeKind::second_order)
                    rowG.segment(b.offset, b.dim).setConstant(rowG.segment(b.offset, b.dim).maxCoeff());
            Vector dc(n_), ea(p_), eg(m_);
            for (Index j = 0; j < n_; ++j) dc[j] = root(colmax[j]);
            for (Index i = 0; i < p_; ++i) ea[i] = root(rowA[i]);
            for (Index i = 0; i < m_; ++i) eg[i] = root(rowG[i]);
            for (Index j = 0; j < n_; ++j) {
                for (SparseMatrix::InnerIterator e(As_, j); e; ++e) e.valueRef() /= ea[e.row()] * dc[j];
                for (SparseMatrix::InnerIterator e(Gs_, j); e; ++e) e.valueRef() /= eg[e.row()] * dc[j];
            }
            D_ = D_.cwiseProduct(dc);
            EA_ = EA_.cwiseProduct(ea);
            EG_ = EG_.cwiseProduct(eg);
        }
        cs_ = p.objective.cwiseQuotient(D_);
        bs_ = p.eq_rhs.cwiseQuotient(EA_);
        hs_ = p.cone_rhs.cwiseQuotient(EG_);
    }

    void initialize(const WarmStart* warm) {
        x_ = Vector::Zero(n_);
        y_ = Vector::Zero(p_);
        s_ = cones_.unit();
        z_ = cones_.unit();
        tau_ = 1.0;
        kap_ = 1.0;
        if (!warm) return;
        if (warm->x.size() == n_) x_ = warm->x.cwiseProduct(D_);
        if (warm->y.size() == p_) y_ = warm->y.cwiseProduct(EA_);
        if (warm->s.size() == m_) s_ = warm->s.cwiseQuotient(EG_);
        if (warm->z.size() == m_) z_ = warm->z.cwiseProduct(EG_);
        // Pull the cone variables strictly inside so the scaling is defined.
        const Vector e = cones_.unit();
        auto shift = [&](Vector& v) {
            const double lo = cones_.min_eigenvalue(v);
            const double margin = 1e-6 * std::max(1.0, v.lpNorm<Eigen::Infinity>());
            if (!(lo > margin)) v += (margin - lo) * e;
        };
        if (m_ > 0) {
            shift(s_);
            shift(z_);
            kap_ = std::max(s_.dot(z_) / static_cast<double>(cones_.degree()), 1e-8);
        }
    }

    double step_length(const Vector& ds, const Vector& dz, double dtau, double dkap) const {
        double a = std::numeric_limits<double>::infinity();
        if (m_ > 0) {
            a = std::min(a, cones_.max_step(s_, ds));
            a = std::min(a, cones_.max_step(z_, dz));
        }
        if (dtau < 0.0) a = std::min(a, -tau_ / dtau);
        if (dkap < 0.0) a = std::min(a, -kap_ / dkap);
        return a;
    }

    // --------------------------------------------------------------- termination

    Solution evaluate(int it) const {
        Solution sol;
        sol.iterations = it;
        const ConeProgram& p = prog_;
        const Vector x = x_.cwiseQuotient(D_);
        const Vector y = y_.cwiseQuotient(EA_);
        const Vector z = z_.cwiseQuotient(EG_);
        const Vector s = s_.cwiseProduct(EG_);

        const double nb = std::max(1.0, p.eq_rhs.norm());
        const double nh = std::max(1.0, p.cone_rhs.norm());
        const double nc = std::max(1.0, p.objective.norm());

        const Vector ry = p.eq_matrix * x - tau_ * p.eq_rhs;
        const Vector rz = p.cone_matrix * x + s - tau_ * p.cone_rhs;
        const Vector hx = p.eq_matrix.transpose() * y + p.cone_matrix.transpose() * z;
        const Vector rx = hx + tau_ * p.objective;

        const double pres = std::max(ry.norm() / nb, rz.norm() / nh) / tau_;
        const double dres = rx.norm() / nc / tau_;
        const double pcost = p.objective.dot(x) / tau_;
        const double dcost = -(p.eq_rhs.dot(y) + p.cone_rhs.dot(z)) / tau_;
        const double comp = s.dot(z) / (tau_ * tau_);
        const double denom = std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
        const double gap = std::max(std::abs(pcost - dcost), std::abs(comp)) / denom;

        sol.primal = x / tau_;
        sol.eq_dual = y / tau_;
        sol.cone_dual = z / tau_;
        sol.slack = s / tau_;
        sol.objective = pcost + p.objective_offset;
        sol.dual_objective = dcost + p.objective_offset;
        sol.gap = gap;
        sol.primal_residual = pres;
        sol.dual_residual = dres;

        if (pres <= st_.tol_feas && dres <= st_.tol_feas && gap <= st_.tol_gap) {
            sol.status = SolveStatus::optimal;
            return sol;
        }
        // Infeasibility certificates from the unnormalized iterate.
        const double by_hz = p.eq_rhs.dot(y) + p.cone_rhs.dot(z);
        if (by_hz < 0.0 && tau_ < kap_) {
            const double r = hx.norm() / std::max(1.0, p.objective.norm()) / -by_hz;
            if (r <= st_.tol_infeas) {
                sol.status = SolveStatus::primal_infeasible;
                sol.eq_dual = y / -by_hz;
                sol.cone_dual = z / -by_hz;
                sol.objective = std::numeric_limits<double>::infinity();
                sol.dual_objective = std::numeric_limits<double>::infinity();
                return sol;
            }
        }
        const double cx = p.objective.dot(x);
        if (cx < 0.0 && tau_ < kap_) {
            const double ra = (p.eq_matrix * x).norm() / nb;
            const double rg = (p.cone_matrix * x + s).norm() / nh;
            if (std::max(ra, rg) / -cx <= st_.tol_infeas) {
                sol.status = SolveStatus::dual_infeasible;
                sol.primal = x / -cx;
                sol.slack = s / -cx;
                sol.objective = -std::numeric_limits<double>::infinity();
                sol.dual_objective = -std::numeric_limits<double>::infinity();
                return sol;
            }
        }
        sol.status = SolveStatus::max_iter;
        return sol;
    }

    // ---------------------------------------------------------------- KKT
    //
    // With dz~ = W dz the third block row becomes  W^{-1}G dx - dz~ = W^{-1} r3, so the
    // cone block of the matrix is -I and only Gh = W^{-1}G changes between iterations.
    // Gh has the pattern of G widened to whole second-order blocks.

    struct GhSegment {
        int block;    // cone block index
        int g_begin;  // range of G values (column-major) inside this block
        int g_end;
        int slot;     // first Gh value slot
    };

    void build_kkt_pattern() {
        const Index N = n_ + p_ + m_;
        const double d = st_.static_reg;
        const auto& blocks = cones_.blocks();
        std::vector<int> block_of(static_cast<std::size_t>(m_));
        for (std::size_t k = 0; k < blocks.size(); ++k)
            for (Index i = 0; i < blocks[k].dim; ++i) block_of[blocks[k].offset + i] = static_cast<int>(k);

        // Gh pattern, column by column.
        std::vector<int> gh_outer(static_cast<std::size_t>(n_ + 1), 0), gh_inner;
        segments_.clear();
        seg_begin_.assign(static_cast<std::size_t>(n_ + 1), 0);
        const int* gouter = Gs_.outerIndexPtr();
        const int* ginner = Gs_.innerIndexPtr();
        for (Index j = 0; j < n_; ++j) {
            int q = gouter[j];
            while (q < gouter[j + 1]) {
                const int k = block_of[ginner[q]];
                const auto& b = blocks[static_cast<std::size_t>(k)];
                if (b.kind == ConeKind::nonnegative) {
                    segments_.push_back({k, q, q + 1, static_cast<int>(gh_inner.size())});
                    gh_inner.push_back(ginner[q]);
                    ++q;
                } else {
                    int e = q;
                    while (e < gouter[j + 1] && block_of[ginner[e]] == k) ++e;
                    segments_.push_back({k, q, e, static_cast<int>(gh_inner.size())});
                    for (Index i = 0; i < b.dim; ++i) gh_inner.push_back(static_cast<int>(b.offset + i));
                    q = e;
                }
            }
            gh_outer[j + 1] = static_cast<int>(gh_inner.size());
            seg_begin_[j + 1] = static_cast<int>(segments_.size());
        }
        std::vector<Triplet> gt;
        for (Index j = 0; j < n_; ++j)
            for (int t = gh_outer[j]; t < gh_outer[j + 1]; ++t) gt.emplace_back(gh_inner[t], static_cast<int>(j), 1.0);
        Gh_.resize(m_, n_);
        Gh_.setFromTriplets(gt.begin(), gt.end());
        Gh_.makeCompressed();

        std::vector<Triplet> t;
        t.reserve(static_cast<std::size_t>(n_ + p_ + m_ + As_.nonZeros() + Gh_.nonZeros()));
        for (Index j = 0; j < n_; ++j) t.emplace_back(static_cast<int>(j), static_cast<int>(j), d);
        for (Index j = 0; j < n_; ++j)
            for (SparseMatrix::InnerIterator e(As_, j); e; ++e)
                t.emplace_back(static_cast<int>(n_ + e.row()), static_cast<int>(j), e.value());
        for (Index i = 0; i < p_; ++i) t.emplace_back(static_cast<int>(n_ + i), static_cast<int>(n_ + i), -d);
        for (Index j = 0; j < n_; ++j)
            for (SparseMatrix::InnerIterator e(Gh_, j); e; ++e)
                t.emplace_back(static_cast<int>(n_ + p_ + e.row()), static_cast<int>(j), 1.0);
        for (Index i = 0; i < m_; ++i)
            t.emplace_back(static_cast<int>(n_ + p_ + i), static_cast<int>(n_ + p_ + i), -1.0);
        K_.resize(N, N);
        K_.setFromTriplets(t.begin(), t.end());
        K_.makeCompressed();

        auto locate = [&](Index r, Index c) {
            const int* inner = K_.innerIndexPtr();
            const int lo = K_.outerIndexPtr()[c], hi = K_.outerIndexPtr()[c + 1];
            const int* pos = std::lower_bound(inner + lo, inner + hi, static_cast<int>(r));
            return static_cast<int>(pos - inner);
        };
        diag_pos_.assign(static_cast<std::size_t>(n_ + p_), 0);
        for (Index j = 0; j < n_ + p_; ++j) diag_pos_[static_cast<std::size_t>(j)] = locate(j, j);
        gh_pos_.assign(static_cast<std::size_t>(Gh_.nonZeros()), 0);
        for (Index j = 0; j < n_; ++j)
            for (int q = Gh_.outerIndexPtr()[j]; q < Gh_.outerIndexPtr()[j + 1]; ++q)
                gh_pos_[static_cast<std::size_t>(q)] = locate(n_ + p_ + Gh_.innerIndexPtr()[q], j);

        std::vector<int> signs(static_cast<std::size_t>(N), -1);
        std::fill(signs.begin(), signs.begin() + n_, 1);
        ldl_.analyze(K_, std::move(signs), kkt_order());
    }

    // Cone rows are pivoted first so the primal block is only eliminated once it carries
    // Gh'Gh; the remaining (x, y) block is ordered by AMD on its reduced pattern.
    std::vector<int> kkt_order() const {
        const SparseMatrix gtg = SparseMatrix(Gh_.transpose()) * Gh_;
        SparseMatrix apat = As_;
        for (Index k = 0; k < apat.nonZeros(); ++k) apat.valuePtr()[k] = 1.0;
        std::vector<Triplet> t;
        for (Index j = 0; j < n_; ++j) {
            t.emplace_back(static_cast<int>(j), static_cast<int>(j), 1.0);
            for (SparseMatrix::InnerIterator e(gtg, j); e; ++e)
                if (e.row() > j) t.emplace_back(static_cast<int>(e.row()), static_cast<int>(j), 1.0);
            for (SparseMatrix::InnerIterator e(apat, j); e; ++e)
                t.emplace_back(static_cast<int>(n_ + e.row()), static_cast<int>(j), 1.0);
        }
        for (Index i = 0; i < p_; ++i) t.emplace_back(static_cast<int>(n_ + i), static_cast<int>(n_ + i), 1.0);
        SparseMatrix reduced(n_ + p_, n_ + p_);
        reduced.setFromTriplets(t.begin(), t.end());
        std::vector<int> order;
        order.reserve(static_cast<std::size_t>(n_ + p_ + m_));
        for (Index i = 0; i < m_; ++i) order.push_back(static_cast<int>(n_ + p_ + i));
        if (n_ + p_ > 0)
            for (int k : QuasiDefiniteLdl::amd_order(reduced)) order.push_back(k);
        return order;
    }

    // Refreshes Gh = W^{-1} G and the matching KKT entries, then factors.
    bool factorize() {
        const auto& blocks = cones_.blocks();
        const double* gv = Gs_.valuePtr();
        const int* gi = Gs_.innerIndexPtr();
        double* hv = Gh_.valuePtr();
        double buf_in[64], buf_out[64];
        std::vector<double> big_in, big_out;
        for (const auto& sg : segments_) {
            const auto& b = blocks[static_cast<std::size_t>(sg.block)];
            if (b.kind == ConeKind::nonnegative) {
                hv[sg.slot] = gv[sg.g_begin] / cones_.lp_scale(gi[sg.g_begin]);
                continue;
            }
            double* in = buf_in;
            double* out = buf_out;
            if (b.dim > 64) {
                big_in.assign(static_cast<std::size_t>(b.dim), 0.0);
                big_out.assign(static_cast<std::size_t>(b.dim), 0.0);
                in = big_in.data();
                out = big_out.data();
            } else {
                std::fill(in, in + b.dim, 0.0);
            }
            for (int q = sg.g_begin; q < sg.g_end; ++q) in[gi[q] - b.offset] = gv[q];
            cones_.soc_apply_inverse(static_cast<std::size_t>(sg.block), in, out);
            std::copy(out, out + b.dim, hv + sg.slot);
        }
        double* kv = K_.valuePtr();
        for (std::size_t q = 0; q < gh_pos_.size(); ++q) kv[gh_pos_[q]] = hv[q];
        for (Index j = 0; j < n_; ++j) kv[diag_pos_[static_cast<std::size_t>(j)]] = reg_;
        for (Index i = 0; i < p_; ++i) kv[diag_pos_[static_cast<std::size_t>(n_ + i)]] = -reg_;
        return ldl_.factorize(K_);
    }

    // Unregularized scaled KKT product.
    void kkt_apply(const Vector& v, Vector& out) const {
        const auto vx = v.head(n_);
        const auto vy = v.segment(n_, p_);
        const auto vz = v.tail(m_);
        out.resize(v.size());
        out.head(n_) = As_.transpose() * vy + Gh_.transpose() * vz;
        out.segment(n_, p_) = As_ * vx;
        out.tail(m_) = Gh_ * vx - vz;
    }

    // Solves the unscaled system [0 A' G'; A 0 0; G 0 -W'W] (dx, dy, dz) = (r1, r2, r3).
    bool kkt_solve(const Vector& r1, const Vector& r2, const Vector& r3, Vector& dx, Vector& dy, Vector& dz) const {
        Vector rhs(n_ + p_ + m_);
        Vector r3s;
        cones_.apply_winv(r3, r3s);
        rhs << r1, r2, r3s;
        Vector sol;
        ldl_.solve(rhs, sol);
        if (!sol.allFinite()) return false;
        Vector kv, corr;
        const double rn = rhs.lpNorm<Eigen::Infinity>();
        for (int k = 0; k < refine_; ++k) {
            kkt_apply(sol, kv);
            const Vector err = rhs - kv;
            if (err.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + rn)) break;
            ldl_.solve(err, corr);
            if (!corr.allFinite()) break;
            sol += corr;
        }
        dx = sol.head(n_);
        dy = sol.segment(n_, p_);
        cones_.apply_winv(sol.tail(m_), dz);
        return true;
    }

    const ConeProgram& prog_;
    SolverSettings st_;
    ConeSet cones_;
    Index n_ = 0, p_ = 0, m_ = 0;

    SparseMatrix As_, Gs_, Gh_;
    Vector cs_, bs_, hs_, D_, EA_, EG_;

    SparseMatrix K_;
    std::vector<GhSegment> segments_;
    std::vector<int> seg_begin_;
    std::vector<int> gh_pos_;
    std::vector<int> diag_pos_;
    double reg_ = 0.0;
    int refine_ = 2;
    static constexpr int kMaxRefine = 8;
    QuasiDefiniteLdl ldl_;

    Vector x_, y_, s_, z_;
    double tau_ = 1.0, kap_ = 1.0;
};

}  // namespace detail

/// Solves the program. Never throws on numerical trouble; inspect Solution::status.
inline Solution solve(const ConeProgram& program, const SolverSettings& settings = {},
                      const WarmStart* warm = nullptr) {
    detail::InteriorPoint ip(program, settings);
    return ip.run(warm);
}

}  // namespace drtruss::conic
