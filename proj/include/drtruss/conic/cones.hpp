#pragma once

// Cone algebra used by the interior-point solver: membership, step lengths,
// Jordan products and Nesterov-Todd scalings for products of nonnegative
// orthants and second-order cones.

#include "drtruss/conic/program.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace drtruss::conic::detail {

struct ConeBlock {
    ConeKind kind;
    Index offset;
    Index dim;
};

class ConeSet {
public:
    ConeSet() = default;
    explicit ConeSet(const std::vector<Cone>& cones) {
        Index off = 0;
        for (const auto& c : cones) {
            blocks_.push_back({c.kind, off, c.dim});
            off += c.dim;
            degree_ += c.kind == ConeKind::nonnegative ? c.dim : 1;
        }
        rows_ = off;
        eta_.assign(blocks_.size(), 1.0);
        det_.assign(blocks_.size(), 1.0);
        w_ = Vector::Ones(rows_);
    }

    Index rows() const { return rows_; }
    Index degree() const { return degree_; }
    const std::vector<ConeBlock>& blocks() const { return blocks_; }

    /// The identity element e of the Jordan algebra.
    Vector unit() const {
        Vector e = Vector::Zero(rows_);
        for (const auto& b : blocks_) {
            if (b.kind == ConeKind::nonnegative)
                e.segment(b.offset, b.dim).setOnes();
            else
                e[b.offset] = 1.0;
        }
        return e;
    }

    /// Smallest spectral value of v over all blocks (positive iff v is interior).
    double min_eigenvalue(const Vector& v) const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& b : blocks_) {
            if (b.kind == ConeKind::nonnegative)
                m = std::min(m, v.segment(b.offset, b.dim).minCoeff());
            else
                m = std::min(m, v[b.offset] - v.segment(b.offset + 1, b.dim - 1).norm());
        }
        return m;
    }

    bool interior(const Vector& v) const { return rows_ == 0 || min_eigenvalue(v) > 0.0; }

    /// Largest alpha with v + alpha*dv in the cone (v interior); +inf when unbounded.
    double max_step(const Vector& v, const Vector& dv) const {
        double alpha = std::numeric_limits<double>::infinity();
        for (const auto& b : blocks_) {
            if (b.kind == ConeKind::nonnegative) {
                for (Index i = b.offset; i < b.offset + b.dim; ++i)
                    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
            } else {
                alpha = std::min(alpha, soc_step(v.segment(b.offset, b.dim), dv.segment(b.offset, b.dim)));
            }
        }
        return alpha;
    }

    /// Jordan product u o v.
    void product(const Vector& u, const Vector& v, Vector& out) const {
        out.resize(rows_);
        for (const auto& b : blocks_) {
            const Index o = b.offset, d = b.dim;
            if (b.kind == ConeKind::nonnegative) {
                out.segment(o, d) = u.segment(o, d).cwiseProduct(v.segment(o, d));
            } else {
                out[o] = u.segment(o, d).dot(v.segment(o, d));
                out.segment(o + 1, d - 1) = u[o] * v.segment(o + 1, d - 1) + v[o] * u.segment(o + 1, d - 1);
            }
        }
    }

    /// Solves lambda o out = r for out (lambda interior). When lambda is the scaled point of
    /// the last update_scaling call, pass use_cached_det to take its determinant from s and z.
    void divide(const Vector& lambda, const Vector& r, Vector& out, bool use_cached_det = false) const {
        out.resize(rows_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& b = blocks_[k];
            const Index o = b.offset, d = b.dim;
            if (b.kind == ConeKind::nonnegative) {
                out.segment(o, d) = r.segment(o, d).cwiseQuotient(lambda.segment(o, d));
            } else {
                const double l0 = lambda[o];
                const auto l1 = lambda.segment(o + 1, d - 1);
                const double l1n = l1.norm();
                const double rho = use_cached_det ? det_[k] : (l0 - l1n) * (l0 + l1n);
                const double zeta = l1.dot(r.segment(o + 1, d - 1));
                out[o] = (l0 * r[o] - zeta) / rho;
                out.segment(o + 1, d - 1) = ((zeta / l0 - r[o]) / rho) * l1 + r.segment(o + 1, d - 1) / l0;
            }
        }
    }

    /// Computes the NT scaling W with W z = W^{-1} s = lambda. Returns false if s or z left the cone.
    bool update_scaling(const Vector& s, const Vector& z, Vector& lambda) {
        lambda.resize(rows_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& b = blocks_[k];
            const Index o = b.offset, d = b.dim;
            if (b.kind == ConeKind::nonnegative) {
                for (Index i = o; i < o + d; ++i) {
                    if (!(s[i] > 0.0) || !(z[i] > 0.0)) return false;
                    w_[i] = std::sqrt(s[i] / z[i]);
                }
            } else {
                const auto sv = s.segment(o, d);
                const auto zv = z.segment(o, d);
                const double s1n = sv.tail(d - 1).norm(), z1n = zv.tail(d - 1).norm();
                const double sres = (sv[0] - s1n) * (sv[0] + s1n);
                const double zres = (zv[0] - z1n) * (zv[0] + z1n);
                if (!(sv[0] > s1n) || !(zv[0] > z1n) || !(sres > 0.0) || !(zres > 0.0)) return false;
                const double snorm = std::sqrt(sres), znorm = std::sqrt(zres);
                const Vector sb = sv / snorm;
                const Vector zb = zv / znorm;
                const double gamma = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
                auto w = w_.segment(o, d);
                w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
                w.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gamma);
                // Renormalize so that w'Jw = 1 exactly; guards drift when s and z are nearly parallel.
                const double wn = w.tail(d - 1).norm();
                w[0] = std::sqrt(1.0 + wn * wn);
                eta_[k] = std::sqrt(snorm / znorm);
                det_[k] = snorm * znorm;
            }
        }
        apply_w(z, lambda);
        return true;
    }

    /// out = W v
    void apply_w(const Vector& v, Vector& out) const { apply(v, out, false); }
    /// out = W^{-1} v
    void apply_winv(const Vector& v, Vector& out) const { apply(v, out, true); }

    /// Diagonal scaling of a nonnegative row.
    double lp_scale(Index row) const { return w_[row]; }

    /// out = W_k^{-1} v for the second-order block k (v and out have the block's dimension).
    void soc_apply_inverse(std::size_t k, const double* v, double* out) const {
        const auto& b = blocks_[k];
        const Index d = b.dim;
        const double* w = w_.data() + b.offset;
        double zeta = 0.0;
        for (Index i = 1; i < d; ++i) zeta += w[i] * v[i];
        const double sc = 1.0 / eta_[k];
        const double v0 = v[0];
        const double coef = -v0 + zeta / (1.0 + w[0]);
        out[0] = sc * (w[0] * v0 - zeta);
        for (Index i = 1; i < d; ++i) out[i] = sc * (v[i] + coef * w[i]);
    }

private:
    static double soc_step(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& d) {
        const Index n = v.size();
        const double v1n = v.tail(n - 1).norm(), d1n = d.tail(n - 1).norm();
        const double a = (d[0] - d1n) * (d[0] + d1n);
        const double b = 2.0 * (v[0] * d[0] - v.tail(n - 1).dot(d.tail(n - 1)));
        const double c = std::max((v[0] - v1n) * (v[0] + v1n), 0.0);
        const double inf = std::numeric_limits<double>::infinity();
        double best = inf;
        if (std::abs(a) < 1e-300) {
            if (b < 0.0) best = -c / b;
        } else {
            const double disc = b * b - 4.0 * a * c;
            if (disc >= 0.0) {
                const double t = -0.5 * (b + std::copysign(std::sqrt(disc), b));
                const double r1 = t / a;
                const double r2 = t != 0.0 ? c / t : inf;
                if (r1 >= 0.0) best = std::min(best, r1);
                if (r2 >= 0.0) best = std::min(best, r2);
            }
        }
        // A path that stays in {q >= 0} can still cross into -K through the apex.
        if (d[0] < 0.0) best = std::min(best, -v[0] / d[0]);
        return best;
    }

    void apply(const Vector& v, Vector& out, bool inverse) const {
        out.resize(rows_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& b = blocks_[k];
            const Index o = b.offset, d = b.dim;
            if (b.kind == ConeKind::nonnegative) {
                if (inverse)
                    out.segment(o, d) = v.segment(o, d).cwiseQuotient(w_.segment(o, d));
                else
                    out.segment(o, d) = v.segment(o, d).cwiseProduct(w_.segment(o, d));
                continue;
            }
            const auto w = w_.segment(o, d);
            const double zeta = w.tail(d - 1).dot(v.segment(o + 1, d - 1));
            const double sgn = inverse ? -1.0 : 1.0;
            const double scale = inverse ? 1.0 / eta_[k] : eta_[k];
            const double v0 = v[o];
            out[o] = scale * (w[0] * v0 + sgn * zeta);
            out.segment(o + 1, d - 1) =
                scale * (v.segment(o + 1, d - 1) + (sgn * v0 + zeta / (1.0 + w[0])) * w.tail(d - 1));
        }
    }

    std::vector<ConeBlock> blocks_;
    Index rows_ = 0;
    Index degree_ = 0;
    std::vector<double> eta_;
    std::vector<double> det_;  // lambda'J lambda per second-order block
    Vector w_;
};

}  // namespace drtruss::conic::detail
