#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace drtruss::conic {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

enum class ConeKind { nonnegative, second_order };

struct Cone {
    ConeKind kind = ConeKind::nonnegative;
    Index dim = 0;
};

/**
 * Standard-form conic program
 *
 *     minimize    c'x + offset
 *     subject to  A x  = b
 *                 G x + s = h,   s in K = K_1 x ... x K_r
 *
 * The cones partition the slack vector s in order. A second-order block
 * (t, v) requires t >= ||v||.
 */
struct ConeProgram {
    Vector objective;
    double objective_offset = 0.0;
    SparseMatrix eq_matrix;
    Vector eq_rhs;
    SparseMatrix cone_matrix;
    Vector cone_rhs;
    std::vector<Cone> cones;
    std::vector<std::string> var_names;

    Index num_variables() const { return objective.size(); }
    Index num_equalities() const { return eq_rhs.size(); }
    Index num_cone_rows() const { return cone_rhs.size(); }

    Index cone_dimension_total() const {
        Index total = 0;
        for (const auto& k : cones) total += k.dim;
        return total;
    }
};

/// Affine expression  sum_k coef_k * x[var_k] + constant.
struct AffineExpr {
    std::vector<std::pair<Index, double>> terms;
    double constant = 0.0;

    AffineExpr() = default;
    AffineExpr(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)

    static AffineExpr var(Index i, double coef = 1.0) {
        AffineExpr e;
        e.terms.emplace_back(i, coef);
        return e;
    }

    AffineExpr& operator+=(const AffineExpr& o) {
        terms.insert(terms.end(), o.terms.begin(), o.terms.end());
        constant += o.constant;
        return *this;
    }
    AffineExpr& operator-=(const AffineExpr& o) {
        for (const auto& [i, c] : o.terms) terms.emplace_back(i, -c);
        constant -= o.constant;
        return *this;
    }
    AffineExpr& operator*=(double s) {
        for (auto& t : terms) t.second *= s;
        constant *= s;
        return *this;
    }
};

inline AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
inline AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
inline AffineExpr operator-(AffineExpr a) { return a *= -1.0; }
inline AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
inline AffineExpr operator*(AffineExpr a, double s) { return a *= s; }

/// Typed handle to one program variable.
struct Var {
    Index index = -1;
    operator AffineExpr() const { return AffineExpr::var(index); }  // NOLINT(google-explicit-constructor)
};

inline AffineExpr operator+(Var a, const AffineExpr& b) { return AffineExpr(a) + b; }
inline AffineExpr operator-(Var a, const AffineExpr& b) { return AffineExpr(a) - b; }
inline AffineExpr operator+(Var a, Var b) { return AffineExpr(a) + AffineExpr(b); }
inline AffineExpr operator-(Var a, Var b) { return AffineExpr(a) - AffineExpr(b); }
inline AffineExpr operator-(Var a) { return -AffineExpr(a); }
inline AffineExpr operator*(double s, Var a) { return AffineExpr::var(a.index, s); }
inline AffineExpr operator+(Var a, double c) { return AffineExpr(a) + AffineExpr(c); }
inline AffineExpr operator-(Var a, double c) { return AffineExpr(a) - AffineExpr(c); }

/// Incrementally assembles a ConeProgram from affine expressions.
class ProgramBuilder {
public:
    Var add_variable(std::string name) {
        names_.push_back(std::move(name));
        return Var{static_cast<Index>(names_.size()) - 1};
    }

    std::vector<Var> add_variables(const std::string& name, Index count) {
        std::vector<Var> out;
        out.reserve(static_cast<std::size_t>(count));
        for (Index k = 0; k < count; ++k) out.push_back(add_variable(name + "[" + std::to_string(k) + "]"));
        return out;
    }

    Index num_variables() const { return static_cast<Index>(names_.size()); }

    void minimize(const AffineExpr& e) { objective_ = e; }

    /// e == 0
    void add_equality(const AffineExpr& e) {
        const int row = static_cast<int>(eq_rhs_.size());
        for (const auto& [i, c] : e.terms) eq_triplets_.emplace_back(row, static_cast<int>(i), c);
        eq_rhs_.push_back(-e.constant);
    }

    /// e >= 0
    void add_nonneg(const AffineExpr& e) {
        push_cone_row(e);
        if (!cones_.empty() && cones_.back().kind == ConeKind::nonnegative)
            ++cones_.back().dim;
        else
            cones_.push_back({ConeKind::nonnegative, 1});
    }

    /// rows[0] >= || rows[1..] ||
    void add_soc(const std::vector<AffineExpr>& rows) {
        if (rows.size() < 2) throw std::invalid_argument("second-order cone needs at least 2 rows");
        for (const auto& r : rows) push_cone_row(r);
        cones_.push_back({ConeKind::second_order, static_cast<Index>(rows.size())});
    }

    /// u + v >= || (u - v, w) ||, i.e. 4 u v >= ||w||^2 with u, v >= 0.
    void add_rotated_soc(const AffineExpr& u, const AffineExpr& v, std::initializer_list<AffineExpr> w) {
        std::vector<AffineExpr> rows{u + v, u - v};
        rows.insert(rows.end(), w.begin(), w.end());
        add_soc(rows);
    }

    ConeProgram build() const {
        ConeProgram p;
        const Index n = num_variables();
        p.var_names = names_;
        p.objective = Vector::Zero(n);
        for (const auto& [i, c] : objective_.terms) p.objective[i] += c;
        p.objective_offset = objective_.constant;

        p.eq_matrix.resize(static_cast<Index>(eq_rhs_.size()), n);
        p.eq_matrix.setFromTriplets(eq_triplets_.begin(), eq_triplets_.end());
        p.eq_matrix.prune(0.0);
        p.eq_rhs = Eigen::Map<const Vector>(eq_rhs_.data(), static_cast<Index>(eq_rhs_.size()));

        p.cone_matrix.resize(static_cast<Index>(cone_rhs_.size()), n);
        p.cone_matrix.setFromTriplets(cone_triplets_.begin(), cone_triplets_.end());
        p.cone_matrix.prune(0.0);
        p.cone_rhs = Eigen::Map<const Vector>(cone_rhs_.data(), static_cast<Index>(cone_rhs_.size()));
        p.cones = cones_;
        return p;
    }

private:
    // Slack s = h - G x equals the affine value, so G = -coef and h = constant.
    void push_cone_row(const AffineExpr& e) {
        const int row = static_cast<int>(cone_rhs_.size());
        for (const auto& [i, c] : e.terms) cone_triplets_.emplace_back(row, static_cast<int>(i), -c);
        cone_rhs_.push_back(e.constant);
    }

    std::vector<std::string> names_;
    AffineExpr objective_;
    std::vector<Triplet> eq_triplets_;
    std::vector<double> eq_rhs_;
    std::vector<Triplet> cone_triplets_;
    std::vector<double> cone_rhs_;
    std::vector<Cone> cones_;
};

/// Evaluates c'x + offset.
inline double objective_value(const ConeProgram& p, const Vector& x) {
    return p.objective.dot(x) + p.objective_offset;
}

/// Largest violation of Ax=b, and of h - Gx in K measured as distance below the cone.
inline double max_constraint_violation(const ConeProgram& p, const Vector& x) {
    double worst = 0.0;
    if (p.num_equalities() > 0) worst = (p.eq_matrix * x - p.eq_rhs).cwiseAbs().maxCoeff();
    const Vector s = p.cone_rhs - p.cone_matrix * x;
    Index off = 0;
    for (const auto& k : p.cones) {
        if (k.kind == ConeKind::nonnegative) {
            for (Index r = 0; r < k.dim; ++r) worst = std::max(worst, -s[off + r]);
        } else {
            worst = std::max(worst, s.segment(off + 1, k.dim - 1).norm() - s[off]);
        }
        off += k.dim;
    }
    return worst;
}

}  // namespace drtruss::conic
