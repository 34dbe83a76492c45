#pragma once

// Conic Benchmark Format (version 3) export and import.
//
// The program  min c'x + c0  s.t.  Ax = b,  h - Gx in K  is written as
//   OBJACOORD/OBJBCOORD  c, c0
//   CON                  L= block (A x - b) followed by the cone blocks (-G x + h)
// Cone rows use L+ for nonnegative blocks and Q for second-order blocks.
// Numbers are printed with 17 significant digits so a read-back is exact.

#include "drtruss/conic/program.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace drtruss::conic {

namespace detail {
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace detail

inline void write_cbf(std::ostream& os, const ConeProgram& p) {
    using detail::fmt17;
    const Index n = p.num_variables();
    const Index neq = p.num_equalities();
    const Index ncone = p.num_cone_rows();

    os << "VER\n3\n\n";
    os << "OBJSENSE\nMIN\n\n";
    os << "VAR\n" << n << " 1\nF " << n << "\n\n";

    std::size_t nblocks = p.cones.size() + (neq > 0 ? 1 : 0);
    os << "CON\n" << (neq + ncone) << ' ' << nblocks << '\n';
    if (neq > 0) os << "L= " << neq << '\n';
    for (const auto& k : p.cones) os << (k.kind == ConeKind::nonnegative ? "L+ " : "Q ") << k.dim << '\n';
    os << '\n';

    std::vector<std::pair<Index, double>> obj;
    for (Index j = 0; j < n; ++j)
        if (p.objective[j] != 0.0) obj.emplace_back(j, p.objective[j]);
    if (!obj.empty()) {
        os << "OBJACOORD\n" << obj.size() << '\n';
        for (const auto& [j, v] : obj) os << j << ' ' << fmt17(v) << '\n';
        os << '\n';
    }
    if (p.objective_offset != 0.0) os << "OBJBCOORD\n" << fmt17(p.objective_offset) << "\n\n";

    // Row-major listing for stable, diff-friendly output.
    std::vector<std::vector<std::pair<Index, double>>> rows(static_cast<std::size_t>(neq + ncone));
    for (Index j = 0; j < p.eq_matrix.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(p.eq_matrix, j); it; ++it)
            rows[static_cast<std::size_t>(it.row())].emplace_back(j, it.value());
    for (Index j = 0; j < p.cone_matrix.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(p.cone_matrix, j); it; ++it)
            rows[static_cast<std::size_t>(neq + it.row())].emplace_back(j, -it.value());
    std::size_t nnz = 0;
    for (auto& r : rows) {
        std::sort(r.begin(), r.end());
        nnz += r.size();
    }
    if (nnz > 0) {
        os << "ACOORD\n" << nnz << '\n';
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (const auto& [j, v] : rows[i]) os << i << ' ' << j << ' ' << fmt17(v) << '\n';
        os << '\n';
    }

    std::vector<std::pair<Index, double>> bco;
    for (Index i = 0; i < neq; ++i)
        if (p.eq_rhs[i] != 0.0) bco.emplace_back(i, -p.eq_rhs[i]);
    for (Index i = 0; i < ncone; ++i)
        if (p.cone_rhs[i] != 0.0) bco.emplace_back(neq + i, p.cone_rhs[i]);
    if (!bco.empty()) {
        os << "BCOORD\n" << bco.size() << '\n';
        for (const auto& [i, v] : bco) os << i << ' ' << fmt17(v) << '\n';
        os << '\n';
    }
}

inline std::string to_cbf(const ConeProgram& p) {
    std::ostringstream os;
    write_cbf(os, p);
    return os.str();
}

/// Reads the subset of CBF produced by write_cbf (free variables, L=, L+ and Q blocks).
inline ConeProgram read_cbf(std::istream& is) {
    ConeProgram p;
    Index n = 0;
    struct Block {
        std::string kind;
        Index dim;
    };
    std::vector<Block> blocks;
    std::vector<Triplet> arows;
    std::vector<std::pair<Index, double>> bco;
    std::vector<std::pair<Index, double>> obj;
    double offset = 0.0;

    std::string key;
    while (is >> key) {
        if (key == "VER") {
            int v = 0;
            is >> v;
        } else if (key == "OBJSENSE") {
            std::string s;
            is >> s;
            if (s != "MIN") throw std::runtime_error("CBF: only MIN objective sense is supported");
        } else if (key == "VAR") {
            Index nb = 0;
            is >> n >> nb;
            for (Index k = 0; k < nb; ++k) {
                std::string d;
                Index cnt = 0;
                is >> d >> cnt;
                if (d != "F") throw std::runtime_error("CBF: only free variable domains are supported");
            }
        } else if (key == "CON") {
            Index nrows = 0, nb = 0;
            is >> nrows >> nb;
            for (Index k = 0; k < nb; ++k) {
                Block b;
                is >> b.kind >> b.dim;
                blocks.push_back(b);
            }
        } else if (key == "OBJACOORD") {
            std::size_t cnt = 0;
            is >> cnt;
            for (std::size_t k = 0; k < cnt; ++k) {
                Index j;
                double v;
                is >> j >> v;
                obj.emplace_back(j, v);
            }
        } else if (key == "OBJBCOORD") {
            is >> offset;
        } else if (key == "ACOORD") {
            std::size_t cnt = 0;
            is >> cnt;
            for (std::size_t k = 0; k < cnt; ++k) {
                int i, j;
                double v;
                is >> i >> j >> v;
                arows.emplace_back(i, j, v);
            }
        } else if (key == "BCOORD") {
            std::size_t cnt = 0;
            is >> cnt;
            for (std::size_t k = 0; k < cnt; ++k) {
                Index i;
                double v;
                is >> i >> v;
                bco.emplace_back(i, v);
            }
        } else {
            throw std::runtime_error("CBF: unsupported section " + key);
        }
        if (!is && !is.eof()) throw std::runtime_error("CBF: malformed section " + key);
    }

    Index neq = 0;
    if (!blocks.empty() && blocks.front().kind == "L=") neq = blocks.front().dim;
    Index total = 0;
    for (const auto& b : blocks) total += b.dim;
    const Index ncone = total - neq;

    p.objective = Vector::Zero(n);
    for (const auto& [j, v] : obj) p.objective[j] = v;
    p.objective_offset = offset;
    p.eq_rhs = Vector::Zero(neq);
    p.cone_rhs = Vector::Zero(ncone);
    for (const auto& [i, v] : bco) {
        if (i < neq)
            p.eq_rhs[i] = -v;
        else
            p.cone_rhs[i - neq] = v;
    }
    std::vector<Triplet> at, gt;
    for (const auto& t : arows) {
        if (t.row() < neq)
            at.emplace_back(t.row(), t.col(), t.value());
        else
            gt.emplace_back(t.row() - static_cast<int>(neq), t.col(), -t.value());
    }
    p.eq_matrix.resize(neq, n);
    p.eq_matrix.setFromTriplets(at.begin(), at.end());
    p.cone_matrix.resize(ncone, n);
    p.cone_matrix.setFromTriplets(gt.begin(), gt.end());
    for (std::size_t k = (neq > 0 ? 1 : 0); k < blocks.size(); ++k) {
        const auto& b = blocks[k];
        if (b.kind == "L+")
            p.cones.push_back({ConeKind::nonnegative, b.dim});
        else if (b.kind == "Q")
            p.cones.push_back({ConeKind::second_order, b.dim});
        else
            throw std::runtime_error("CBF: unsupported cone " + b.kind);
    }
    return p;
}

inline ConeProgram from_cbf(const std::string& text) {
    std::istringstream is(text);
    return read_cbf(is);
}

}  // namespace drtruss::conic
