#pragma once

// Up-looking sparse LDL' for quasi-definite matrices.
//
// The symbolic phase computes a fill-reducing ordering (AMD on the symmetric
// pattern) and the elimination tree once; numeric factorizations then reuse it.
// Each pivot carries an expected sign (+1 for the primal block, -1 for the dual
// block). A pivot that is too small, has the wrong sign, or is smaller than
// the cancellation error of its own update (rel_eps times the largest term)
// is replaced by a signed floor. This keeps the factorization defined when the
// scaling matrices become badly conditioned near the optimum; the error it
// introduces is reduced by iterative refinement in the caller.

#include "drtruss/conic/program.hpp"

#include <Eigen/OrderingMethods>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace drtruss::conic::detail {

class QuasiDefiniteLdl {
public:
    double dyn_eps = 1e-13;
    double dyn_reg = 1e-7;
    double rel_eps = 1e-11;

    /// lower: lower triangle (diagonal included) in compressed column form.
    /// order: elimination order (order[k] = index pivoted k-th); empty selects AMD.
    void analyze(const SparseMatrix& lower, std::vector<int> signs, std::vector<int> order = {}) {
        n_ = static_cast<int>(lower.rows());
        if (lower.cols() != n_ || static_cast<int>(signs.size()) != n_)
            throw std::invalid_argument("ldl: dimension mismatch");

        if (order.empty()) order = amd_order(lower);
        if (static_cast<int>(order.size()) != n_) throw std::invalid_argument("ldl: ordering has wrong length");
        perm_.assign(n_, -1);  // perm_[old] = new
        iperm_ = order;        // iperm_[new] = old
        for (int i = 0; i < n_; ++i) {
            if (order[i] < 0 || order[i] >= n_ || perm_[order[i]] != -1)
                throw std::invalid_argument("ldl: ordering is not a permutation");
            perm_[order[i]] = i;
        }
        sign_.resize(n_);
        for (int i = 0; i < n_; ++i) sign_[perm_[i]] = signs[i];

        // Permuted upper triangle, with a map from input value slots.
        const int nnz = static_cast<int>(lower.nonZeros());
        std::vector<int> count(n_ + 1, 0);
        for (int c = 0; c < n_; ++c)
            for (int k = lower.outerIndexPtr()[c]; k < lower.outerIndexPtr()[c + 1]; ++k) {
                const int r = lower.innerIndexPtr()[k];
                const int pr = perm_[r], pc = perm_[c];
                ++count[std::max(pr, pc) + 1];
            }
        Ap_.assign(n_ + 1, 0);
        for (int j = 0; j < n_; ++j) Ap_[j + 1] = Ap_[j] + count[j + 1];
        Ai_.assign(nnz, 0);
        Ax_.assign(nnz, 0.0);
        map_.assign(nnz, 0);
        std::vector<int> next(Ap_.begin(), Ap_.end() - 1);
        for (int c = 0; c < n_; ++c)
            for (int k = lower.outerIndexPtr()[c]; k < lower.outerIndexPtr()[c + 1]; ++k) {
                const int r = lower.innerIndexPtr()[k];
                const int pr = perm_[r], pc = perm_[c];
                const int col = std::max(pr, pc), row = std::min(pr, pc);
                const int slot = next[col]++;
                Ai_[slot] = row;
                map_[k] = slot;
            }
        // The numeric phase does not need sorted rows, but each column must hold its diagonal.
        std::vector<char> has_diag(n_, 0);
        for (int j = 0; j < n_; ++j)
            for (int p = Ap_[j]; p < Ap_[j + 1]; ++p)
                if (Ai_[p] == j) has_diag[j] = 1;
        for (int j = 0; j < n_; ++j)
            if (!has_diag[j]) throw std::invalid_argument("ldl: missing diagonal entry");

        // Elimination tree and column counts.
        etree_.assign(n_, -1);
        Lnz_.assign(n_, 0);
        std::vector<int> work(n_, -1);
        for (int j = 0; j < n_; ++j) {
            work[j] = j;
            for (int p = Ap_[j]; p < Ap_[j + 1]; ++p) {
                int i = Ai_[p];
                while (work[i] != j) {
                    if (etree_[i] == -1) etree_[i] = j;
                    ++Lnz_[i];
                    work[i] = j;
                    i = etree_[i];
                }
            }
        }
        Lp_.assign(n_ + 1, 0);
        for (int i = 0; i < n_; ++i) Lp_[i + 1] = Lp_[i] + Lnz_[i];
        Li_.assign(Lp_[n_], 0);
        Lx_.assign(Lp_[n_], 0.0);
        D_.assign(n_, 0.0);
        Dinv_.assign(n_, 0.0);
        analyzed_ = true;
    }

    /// Numeric factorization with the values of a matrix sharing the analyzed pattern.
    bool factorize(const SparseMatrix& lower) {
        if (!analyzed_) throw std::logic_error("ldl: factorize before analyze");
        const double* v = lower.valuePtr();
        for (std::size_t k = 0; k < map_.size(); ++k) Ax_[map_[k]] = v[k];

        std::vector<double> y(n_, 0.0);
        std::vector<char> marked(n_, 0);
        std::vector<int> yidx(n_), elim(n_), next(Lp_.begin(), Lp_.end() - 1);
        num_regularized_ = 0;

        for (int k = 0; k < n_; ++k) {
            int nnz_y = 0;
            D_[k] = 0.0;
            double amax = 0.0;
            for (int p = Ap_[k]; p < Ap_[k + 1]; ++p) {
                const int b = Ai_[p];
                if (b == k) {
                    D_[k] += Ax_[p];
                    amax = std::max(amax, std::abs(Ax_[p]));
                    continue;
                }
                y[b] += Ax_[p];
                if (marked[b]) continue;
                int ne = 0;
                int i = b;
                while (i != -1 && i < k && !marked[i]) {
                    marked[i] = 1;
                    elim[ne++] = i;
                    i = etree_[i];
                }
                while (ne > 0) yidx[nnz_y++] = elim[--ne];
            }
            for (int t = nnz_y - 1; t >= 0; --t) {
                const int c = yidx[t];
                const double yc = y[c];
                const int end = next[c];
                for (int j = Lp_[c]; j < end; ++j) y[Li_[j]] -= Lx_[j] * yc;
                Li_[end] = k;
                Lx_[end] = yc * Dinv_[c];
                const double upd = yc * Lx_[end];
                D_[k] -= upd;
                amax = std::max(amax, std::abs(upd));
                ++next[c];
                y[c] = 0.0;
                marked[c] = 0;
            }
            if (!std::isfinite(D_[k])) return false;
            // A pivot lost to cancellation is as unreliable as a tiny one.
            const double floor = std::max(dyn_eps, rel_eps * amax);
            if (sign_[k] * D_[k] <= floor) {
                D_[k] = sign_[k] * std::max(dyn_reg, floor);
                ++num_regularized_;
            }
            Dinv_[k] = 1.0 / D_[k];
        }
        return true;
    }

    /// x = (L D L')^{-1} b in the original ordering.
    void solve(const Vector& b, Vector& x) const {
        std::vector<double> w(n_);
        for (int i = 0; i < n_; ++i) w[perm_[i]] = b[i];
        for (int j = 0; j < n_; ++j)
            for (int p = Lp_[j]; p < Lp_[j + 1]; ++p) w[Li_[p]] -= Lx_[p] * w[j];
        for (int j = 0; j < n_; ++j) w[j] *= Dinv_[j];
        for (int j = n_ - 1; j >= 0; --j)
            for (int p = Lp_[j]; p < Lp_[j + 1]; ++p) w[j] -= Lx_[p] * w[Li_[p]];
        x.resize(n_);
        for (int i = 0; i < n_; ++i) x[i] = w[perm_[i]];
    }

    /// AMD ordering of a symmetric pattern given by one triangle (or both).
    static std::vector<int> amd_order(const SparseMatrix& pattern) {
        Eigen::AMDOrdering<int> amd;
        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
        amd(pattern, pinv);
        return std::vector<int>(pinv.indices().data(), pinv.indices().data() + pinv.indices().size());
    }

    int num_regularized() const { return num_regularized_; }
    Index factor_nonzeros() const { return Lp_.empty() ? 0 : Lp_.back(); }

private:
    int n_ = 0;
    bool analyzed_ = false;
    std::vector<int> perm_, iperm_, sign_;
    std::vector<int> Ap_, Ai_, map_;
    std::vector<double> Ax_;
    std::vector<int> etree_, Lnz_, Lp_, Li_;
    std::vector<double> Lx_, D_, Dinv_;
    int num_regularized_ = 0;
};

}  // namespace drtruss::conic::detail
