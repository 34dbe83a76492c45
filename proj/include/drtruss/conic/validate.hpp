#pragma once

#include "drtruss/conic/program.hpp"

#include <sstream>
#include <string>
#include <vector>

namespace drtruss::conic {

struct Diagnostic {
    enum class Severity { error, warning };
    Severity severity = Severity::error;
    std::string message;
};

struct DiagnosticsReport {
    std::vector<Diagnostic> items;

    bool empty() const { return items.empty(); }
    bool has_errors() const {
        for (const auto& d : items)
            if (d.severity == Diagnostic::Severity::error) return true;
        return false;
    }
    std::string to_string() const {
        std::ostringstream os;
        for (const auto& d : items)
            os << (d.severity == Diagnostic::Severity::error ? "error: " : "warning: ") << d.message << '\n';
        return os.str();
    }
};

/// Structural checks on a program. Never throws; an empty report means well formed.
inline DiagnosticsReport validate(const ConeProgram& p) {
    DiagnosticsReport rep;
    auto error = [&](std::string m) { rep.items.push_back({Diagnostic::Severity::error, std::move(m)}); };
    auto warn = [&](std::string m) { rep.items.push_back({Diagnostic::Severity::warning, std::move(m)}); };

    const Index n = p.num_variables();
    if (p.eq_matrix.cols() != n && p.eq_matrix.rows() > 0)
        error("equality matrix has " + std::to_string(p.eq_matrix.cols()) + " columns, expected " + std::to_string(n));
    if (p.eq_matrix.rows() != p.eq_rhs.size())
        error("equality matrix has " + std::to_string(p.eq_matrix.rows()) + " rows but rhs has " +
              std::to_string(p.eq_rhs.size()));
    if (p.cone_matrix.cols() != n && p.cone_matrix.rows() > 0)
        error("cone matrix has " + std::to_string(p.cone_matrix.cols()) + " columns, expected " + std::to_string(n));
    if (p.cone_matrix.rows() != p.cone_rhs.size())
        error("cone matrix has " + std::to_string(p.cone_matrix.rows()) + " rows but rhs has " +
              std::to_string(p.cone_rhs.size()));
    if (p.cone_dimension_total() != p.cone_rhs.size())
        error("cone dimensions sum to " + std::to_string(p.cone_dimension_total()) + " but the slack has length " +
              std::to_string(p.cone_rhs.size()));
    if (!p.var_names.empty() && static_cast<Index>(p.var_names.size()) != n)
        error("var_names has " + std::to_string(p.var_names.size()) + " entries, expected " + std::to_string(n));

    for (std::size_t k = 0; k < p.cones.size(); ++k) {
        const auto& c = p.cones[k];
        if (c.dim < 1) error("cone " + std::to_string(k) + " is empty");
        if (c.kind == ConeKind::second_order && c.dim < 2)
            error("second-order cone " + std::to_string(k) + " has dimension " + std::to_string(c.dim) + " < 2");
    }
    if (rep.has_errors()) return rep;

    auto name = [&](Index j) {
        return p.var_names.empty() ? "x" + std::to_string(j) : p.var_names[static_cast<std::size_t>(j)];
    };

    std::vector<int> col_count(static_cast<std::size_t>(n), 0);
    std::vector<int> eq_row_count(static_cast<std::size_t>(p.num_equalities()), 0);
    std::vector<int> cone_row_count(static_cast<std::size_t>(p.num_cone_rows()), 0);
    for (Index j = 0; j < p.eq_matrix.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(p.eq_matrix, j); it; ++it)
            if (it.value() != 0.0) {
                ++col_count[static_cast<std::size_t>(j)];
                ++eq_row_count[static_cast<std::size_t>(it.row())];
            }
    for (Index j = 0; j < p.cone_matrix.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(p.cone_matrix, j); it; ++it)
            if (it.value() != 0.0) {
                ++col_count[static_cast<std::size_t>(j)];
                ++cone_row_count[static_cast<std::size_t>(it.row())];
            }

    for (Index i = 0; i < p.num_equalities(); ++i)
        if (eq_row_count[static_cast<std::size_t>(i)] == 0) {
            if (p.eq_rhs[i] != 0.0)
                error("equality row " + std::to_string(i) + " is all zero with nonzero rhs (infeasible)");
            else
                warn("equality row " + std::to_string(i) + " is all zero");
        }
    for (Index i = 0; i < p.num_cone_rows(); ++i)
        if (cone_row_count[static_cast<std::size_t>(i)] == 0) warn("cone row " + std::to_string(i) + " is all zero");

    for (Index j = 0; j < n; ++j) {
        if (col_count[static_cast<std::size_t>(j)] != 0) continue;
        if (p.objective[j] != 0.0)
            warn("variable " + name(j) + " has cost " + std::to_string(p.objective[j]) +
                 " and appears in no constraint (unbounded)");
        else
            warn("variable " + name(j) + " appears in no constraint or objective");
    }
    return rep;
}

}  // namespace drtruss::conic
