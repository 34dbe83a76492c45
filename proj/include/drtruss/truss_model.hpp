#pragma once

// Planar pin-jointed trusses: geometry, stiffness K(x) = sum_j (E x_j / l_j) b_j b_j',
// and compliance by a dense linear solve. Everything here is SI (m, N, Pa, J);
// the file readers convert from GPa / mm^2 / mm^3.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace drtruss {

struct TrussModel {
    std::string name;
    std::vector<Eigen::Vector2d> nodes;           // m
    std::vector<std::array<bool, 2>> fixed;       // per node: x, y support
    std::vector<std::pair<int, int>> members;     // node indices
    std::vector<std::array<int, 2>> dof_of_node;  // -1 for a supported direction
    Eigen::MatrixXd beta;                         // d x m, column j is beta_j
    Eigen::VectorXd lengths;                      // m
    double young_modulus = 20e9;                  // Pa
    double volume_cap = 1e-6;                     // m^3

    int num_members() const { return static_cast<int>(members.size()); }
    int num_dofs() const { return static_cast<int>(beta.rows()); }
    int num_nodes() const { return static_cast<int>(nodes.size()); }

    /// Free dofs of a node, in (x, y) order, skipping supported directions.
    std::vector<int> node_dofs(int node) const {
        std::vector<int> out;
        for (int a = 0; a < 2; ++a)
            if (dof_of_node.at(node)[a] >= 0) out.push_back(dof_of_node[node][a]);
        return out;
    }

    /// Uniform design that exhausts the volume budget.
    Eigen::VectorXd uniform_design() const {
        return Eigen::VectorXd::Constant(num_members(), volume_cap / lengths.sum());
    }
};

struct Design {
    Eigen::VectorXd x;  // m^2
};

/// Builds dof numbering, beta and lengths from raw geometry. Throws on degenerate members.
inline TrussModel make_truss(std::vector<Eigen::Vector2d> nodes, std::vector<std::array<bool, 2>> fixed,
                             std::vector<std::pair<int, int>> members, double E, double Vbar, std::string name = {}) {
    if (fixed.size() != nodes.size()) throw std::invalid_argument("one support flag pair per node required");
    if (members.empty()) throw std::invalid_argument("truss has no members");
    if (!(E > 0.0)) throw std::invalid_argument("Young's modulus must be positive");
    if (!(Vbar > 0.0)) throw std::invalid_argument("volume cap must be positive");

    TrussModel t;
    t.name = std::move(name);
    t.nodes = std::move(nodes);
    t.fixed = std::move(fixed);
    t.members = std::move(members);
    t.young_modulus = E;
    t.volume_cap = Vbar;

    int d = 0;
    t.dof_of_node.resize(t.nodes.size());
    for (std::size_t i = 0; i < t.nodes.size(); ++i)
        for (int a = 0; a < 2; ++a) t.dof_of_node[i][a] = t.fixed[i][a] ? -1 : d++;
    if (d == 0) throw std::invalid_argument("truss has no free degrees of freedom");

    const int m = static_cast<int>(t.members.size());
    t.beta = Eigen::MatrixXd::Zero(d, m);
    t.lengths.resize(m);
    for (int j = 0; j < m; ++j) {
        const auto [a, b] = t.members[j];
        if (a < 0 || b < 0 || a >= t.num_nodes() || b >= t.num_nodes() || a == b)
            throw std::invalid_argument("member " + std::to_string(j) + " has invalid end nodes");
        const Eigen::Vector2d v = t.nodes[b] - t.nodes[a];
        const double l = v.norm();
        if (!(l > 0.0)) throw std::invalid_argument("member " + std::to_string(j) + " has zero length");
        const Eigen::Vector2d e = v / l;
        t.lengths[j] = l;
        for (int k = 0; k < 2; ++k) {
            if (t.dof_of_node[a][k] >= 0) t.beta(t.dof_of_node[a][k], j) -= e[k];
            if (t.dof_of_node[b][k] >= 0) t.beta(t.dof_of_node[b][k], j) += e[k];
        }
        if (t.beta.col(j).norm() == 0.0)
            throw std::invalid_argument("member " + std::to_string(j) + " joins two supported nodes");
    }
    return t;
}

inline Eigen::MatrixXd assemble_stiffness(const TrussModel& t, const Design& x) {
    if (x.x.size() != t.num_members()) throw std::invalid_argument("design has wrong length");
    const Eigen::VectorXd k = t.young_modulus * x.x.cwiseQuotient(t.lengths);
    return t.beta * k.asDiagonal() * t.beta.transpose();
}

/// Throws if the uniform design leaves rigid-body (zero-stiffness) modes.
inline void check_stable(const TrussModel& t) {
    const Eigen::MatrixXd K = assemble_stiffness(t, Design{t.uniform_design()});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(lo > 1e-10 * hi)) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "structure is a mechanism under the uniform design (min/max stiffness eigenvalue %.3e)",
                      hi > 0.0 ? lo / hi : 0.0);
        throw std::invalid_argument(buf);
    }
}

/// Compliance xi' K(x)^+ xi; +inf when xi has a component outside range K(x).
inline double compliance(const TrussModel& t, const Design& x, const Eigen::VectorXd& load) {
    if (load.size() != t.num_dofs()) throw std::invalid_argument("load has wrong length");
    const double ln = load.norm();
    if (ln == 0.0) return 0.0;
    const Eigen::MatrixXd K = assemble_stiffness(t, x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double cut = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    const Eigen::VectorXd proj = es.eigenvectors().transpose() * load;
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > cut && ev[i] > 0.0) coef[i] = proj[i] / ev[i];
    const Eigen::VectorXd u = es.eigenvectors() * coef;
    if ((K * u - load).norm() > 1e-8 * ln) return std::numeric_limits<double>::infinity();
    return load.dot(u);
}

/// Nodal load (N) from a sample vector (kN) placed on the given dofs.
inline Eigen::VectorXd load_vector(const TrussModel& t, const std::vector<int>& loaded_dofs, const Eigen::VectorXd& kN) {
    if (static_cast<Eigen::Index>(loaded_dofs.size()) != kN.size())
        throw std::invalid_argument("sample dimension does not match the loaded dofs");
    Eigen::VectorXd f = Eigen::VectorXd::Zero(t.num_dofs());
    for (std::size_t k = 0; k < loaded_dofs.size(); ++k) {
        const int dof = loaded_dofs[k];
        if (dof < 0 || dof >= t.num_dofs()) throw std::invalid_argument("loaded dof out of range");
        f[dof] += 1e3 * kN[static_cast<Eigen::Index>(k)];
    }
    return f;
}

// ---------------------------------------------------------------------------
// Generators

inline std::vector<std::pair<int, int>> grid_members(int nx, int ny, int level) {
    std::vector<std::pair<int, int>> out;
    const int nn = nx * ny;
    for (int a = 0; a < nn; ++a)
        for (int b = a + 1; b < nn; ++b) {
            const int dx = std::abs(a % nx - b % nx), dy = std::abs(a / nx - b / nx);
            if (std::max(dx, dy) > level) continue;
            if (std::gcd(dx, dy) != 1) continue;  // passes through an intermediate grid node
            out.emplace_back(a, b);
        }
    return out;
}

/// Ground structure on an nx-by-ny grid; node (i, j) has id j*nx + i and sits at (i, j)*spacing.
inline TrussModel build_grid_ground_structure(int nx, int ny, double spacing, const std::vector<int>& fixed_nodes,
                                              int level, double E, double Vbar) {
    if (nx < 2 || ny < 2) throw std::invalid_argument("grid needs at least 2 columns and 2 rows");
    if (!(spacing > 0.0)) throw std::invalid_argument("grid spacing must be positive");
    if (level < 1) throw std::invalid_argument("connectivity level must be at least 1");
    std::vector<Eigen::Vector2d> nodes;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) nodes.emplace_back(i * spacing, j * spacing);
    std::vector<std::array<bool, 2>> fixed(nodes.size(), {false, false});
    int nfixed = 0;
    for (int id : fixed_nodes) {
        if (id < 0 || id >= nx * ny) throw std::invalid_argument("fixed node out of range");
        if (!fixed[id][0]) nfixed += 2;
        fixed[id] = {true, true};
    }
    if (nfixed < 2) throw std::invalid_argument("at least one supported node is required");
    // a member between two fully supported nodes carries nothing
    auto members = grid_members(nx, ny, level);
    std::erase_if(members, [&](const auto& ab) { return fixed[ab.first][0] && fixed[ab.second][0]; });
    char name[64];
    std::snprintf(name, sizeof name, "grid%dx%d-L%d", nx, ny, level);
    auto t = make_truss(std::move(nodes), std::move(fixed), std::move(members), E, Vbar, name);
    check_stable(t);
    return t;
}

/// Two-bar truss: free node at (0, 0) left of a wall at x = 1; member 0 is the upper horizontal
/// bar to (1, 0), member 1 the lower diagonal bar to (1, -1).
inline TrussModel build_two_bar(double E = 20e9, double Vbar = 1000e-9) {
    return make_truss({{0.0, 0.0}, {1.0, 0.0}, {1.0, -1.0}}, {{{false, false}}, {{true, true}}, {{true, true}}},
                      {{0, 1}, {0, 2}}, E, Vbar, "two-bar");
}

/// One horizontal bar of the given length; the free end moves only axially.
inline TrussModel build_single_bar(double length, double E, double Vbar) {
    return make_truss({{0.0, 0.0}, {length, 0.0}}, {{{true, true}}, {{false, true}}}, {{0, 1}}, E, Vbar, "single-bar");
}

// ---------------------------------------------------------------------------
// Truss file
//
//   [nodes]
//   id,x_m,y_m,fixed_x,fixed_y
//   ...
//   [members]
//   id,node_a,node_b
//   ...
//   [scalars]
//   E_GPa,20
//   Vbar_mm3,1000
//
// Lines starting with '#' and blank lines are ignored. Node and member ids must
// be 0..count-1 in order.

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    return out;
}
}  // namespace detail

inline TrussModel read_truss(std::istream& is, const std::string& name = {}) {
    std::vector<Eigen::Vector2d> nodes;
    std::vector<std::array<bool, 2>> fixed;
    std::vector<std::pair<int, int>> members;
    double E_GPa = -1.0, Vbar_mm3 = -1.0;
    std::string section, line;
    bool header = false;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw std::runtime_error("truss file line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line[0] == '[') {
            section = line;
            header = section != "[scalars]";
            continue;
        }
        if (header) {
            header = false;
            continue;
        }
        const auto c = detail::split_csv(line);
        try {
            if (section == "[nodes]") {
                if (c.size() != 5) fail("node rows have 5 columns");
                if (std::stoi(c[0]) != static_cast<int>(nodes.size())) fail("node ids must be consecutive from 0");
                nodes.emplace_back(std::stod(c[1]), std::stod(c[2]));
                fixed.push_back({std::stoi(c[3]) != 0, std::stoi(c[4]) != 0});
            } else if (section == "[members]") {
                if (c.size() != 3) fail("member rows have 3 columns");
                if (std::stoi(c[0]) != static_cast<int>(members.size())) fail("member ids must be consecutive from 0");
                members.emplace_back(std::stoi(c[1]), std::stoi(c[2]));
            } else if (section == "[scalars]") {
                if (c.size() != 2) fail("scalar rows have 2 columns");
                if (c[0] == "E_GPa")
                    E_GPa = std::stod(c[1]);
                else if (c[0] == "Vbar_mm3")
                    Vbar_mm3 = std::stod(c[1]);
                else
                    fail("unknown scalar " + c[0]);
            } else {
                fail("data outside a section");
            }
        } catch (const std::logic_error&) {
            fail("malformed number");
        }
    }
    if (E_GPa <= 0.0 || Vbar_mm3 <= 0.0) throw std::runtime_error("truss file needs positive E_GPa and Vbar_mm3");
    return make_truss(std::move(nodes), std::move(fixed), std::move(members), E_GPa * 1e9, Vbar_mm3 * 1e-9, name);
}

inline TrussModel load_truss(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    return read_truss(f, path);
}

inline void write_truss(std::ostream& os, const TrussModel& t) {
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "[nodes]\nid,x_m,y_m,fixed_x,fixed_y\n";
    for (int i = 0; i < t.num_nodes(); ++i)
        os << i << ',' << num(t.nodes[i].x()) << ',' << num(t.nodes[i].y()) << ',' << int(t.fixed[i][0]) << ','
           << int(t.fixed[i][1]) << '\n';
    os << "[members]\nid,node_a,node_b\n";
    for (int j = 0; j < t.num_members(); ++j) os << j << ',' << t.members[j].first << ',' << t.members[j].second << '\n';
    os << "[scalars]\nE_GPa," << num(t.young_modulus * 1e-9) << "\nVbar_mm3," << num(t.volume_cap * 1e9) << '\n';
}

// ---------------------------------------------------------------------------
// Design output

inline void write_design_csv(std::ostream& os, const Design& x) {
    char buf[40];
    os << "member_id,area_mm2\n";
    for (Eigen::Index j = 0; j < x.x.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", x.x[j] * 1e6);
        os << j << ',' << buf << '\n';
    }
}

inline Design read_design_csv(std::istream& is) {
    std::string line;
    std::getline(is, line);
    std::vector<double> a;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        const auto c = detail::split_csv(line);
        if (c.size() != 2 || std::stoi(c[0]) != static_cast<int>(a.size()))
            throw std::runtime_error("bad design row: " + line);
        a.push_back(std::stod(c[1]) * 1e-6);
    }
    Design d;
    d.x = Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
    return d;
}

/// SVG with stroke width proportional to area; members under 1e-4 max(x) are not drawn.
inline void write_design_svg(std::ostream& os, const TrussModel& t, const Design& x) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& p : t.nodes) {
        xmin = std::min(xmin, p.x());
        xmax = std::max(xmax, p.x());
        ymin = std::min(ymin, p.y());
        ymax = std::max(ymax, p.y());
    }
    const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
    const double scale = 400.0 / span, pad = 30.0;
    const double W = (xmax - xmin) * scale + 2 * pad, H = (ymax - ymin) * scale + 2 * pad;
    auto X = [&](double v) { return pad + (v - xmin) * scale; };
    auto Y = [&](double v) { return pad + (ymax - v) * scale; };
    const double amax = x.x.size() ? std::max(x.x.maxCoeff(), 0.0) : 0.0;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.1f\" height=\"%.1f\" viewBox=\"0 0 %.1f %.1f\">\n", W,
                  H, W, H);
    os << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int j = 0; j < t.num_members(); ++j) {
        if (!(amax > 0.0) || x.x[j] < 1e-4 * amax) continue;
        const auto& a = t.nodes[t.members[j].first];
        const auto& b = t.nodes[t.members[j].second];
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\" stroke-width=\"%.3f\"/>\n",
                      X(a.x()), Y(a.y()), X(b.x()), Y(b.y()), 0.5 + 9.5 * x.x[j] / amax);
        os << buf;
    }
    for (int i = 0; i < t.num_nodes(); ++i) {
        const bool sup = t.fixed[i][0] || t.fixed[i][1];
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"%s\" stroke=\"black\"/>\n",
                      X(t.nodes[i].x()), Y(t.nodes[i].y()), sup ? "black" : "white");
        os << buf;
    }
    os << "</svg>\n";
}

}  // namespace drtruss
