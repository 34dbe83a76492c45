#pragma once

// Seeded Gaussian and Gaussian-mixture load samples.
//
// Deviates come from xoshiro256** (seeded through splitmix64) and Box-Muller,
// so a (spec, seed) pair gives the same samples on every platform. Samples are
// stored in kN; conversion to N happens when a formulation is built.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace drtruss {

class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& s : s_) s = splitmix64(x);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on (0, 1): 53 random bits, offset by half an ulp so 0 never occurs.
    double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the second deviate of each pair is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform(), u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

struct GaussianComponent {
    Eigen::VectorXd mean;  // kN
    Eigen::MatrixXd cov;   // kN^2
};

struct MixtureSpec {
    std::vector<GaussianComponent> components;
    std::vector<int> counts;

    int total() const {
        int n = 0;
        for (int c : counts) n += c;
        return n;
    }
};

struct LoadSampleSet {
    std::vector<Eigen::VectorXd> samples;  // kN
    std::vector<int> component;            // mixture label per sample
    std::vector<Eigen::VectorXd> deviates;  // raw standard normals behind each sample (empty if loaded from file)
    std::vector<int> loaded_dofs;
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(samples.size()); }
    int dim() const { return samples.empty() ? 0 : static_cast<int>(samples.front().size()); }
};

/// L with L L' = cov. Cholesky when it succeeds, otherwise a symmetric eigen factor with
/// slightly negative eigenvalues (>= -1e-10 trace) clamped to zero.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols()) throw std::invalid_argument("covariance must be square");
    if (!cov.allFinite()) throw std::invalid_argument("covariance has non-finite entries");
    const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff())) throw std::invalid_argument("covariance is not symmetric");

    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const double tol = 1e-10 * std::abs(cov.trace());
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -tol) throw std::invalid_argument("covariance is not positive semidefinite");
        ev[i] = std::sqrt(std::max(ev[i], 0.0));
    }
    return es.eigenvectors() * ev.asDiagonal();
}

namespace detail {
inline void draw_component(const GaussianComponent& c, int count, int label, Xoshiro256& rng, LoadSampleSet& out) {
    if (!c.mean.allFinite()) throw std::invalid_argument("mean has non-finite entries");
    if (c.cov.rows() != c.mean.size()) throw std::invalid_argument("mean and covariance dimensions differ");
    const Eigen::MatrixXd L = covariance_factor(c.cov);
    for (int k = 0; k < count; ++k) {
        Eigen::VectorXd z(c.mean.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
        out.samples.push_back(c.mean + L * z);
        out.deviates.push_back(std::move(z));
        out.component.push_back(label);
    }
}
}  // namespace detail

inline LoadSampleSet sample_gaussian(const GaussianComponent& c, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample count must be positive");
    LoadSampleSet out;
    out.seed = seed;
    Xoshiro256 rng(seed);
    detail::draw_component(c, n, 0, rng, out);
    return out;
}

/// Components are drawn in order from one stream, so a one-component mixture equals sample_gaussian.
inline LoadSampleSet sample_mixture(const MixtureSpec& spec, std::uint64_t seed) {
    if (spec.components.empty()) throw std::invalid_argument("mixture has no components");
    if (spec.counts.size() != spec.components.size()) throw std::invalid_argument("one count per component required");
    for (int c : spec.counts)
        if (c < 0) throw std::invalid_argument("component counts must be nonnegative");
    if (spec.total() < 1) throw std::invalid_argument("mixture draws no samples");
    const auto dim = spec.components.front().mean.size();
    for (const auto& c : spec.components)
        if (c.mean.size() != dim) throw std::invalid_argument("components have different dimensions");

    LoadSampleSet out;
    out.seed = seed;
    Xoshiro256 rng(seed);
    for (std::size_t k = 0; k < spec.components.size(); ++k)
        detail::draw_component(spec.components[k], spec.counts[k], static_cast<int>(k), rng, out);
    return out;
}

// ---------------------------------------------------------------------------
// CSV: fx_kN,fy_kN,component  (planar loads; other dimensions use f1_kN,...)

inline void write_samples_csv(std::ostream& os, const LoadSampleSet& s) {
    const int d = s.dim();
    if (d == 2) {
        os << "fx_kN,fy_kN,component\n";
    } else {
        for (int k = 0; k < d; ++k) os << 'f' << (k + 1) << "_kN,";
        os << "component\n";
    }
    char buf[40];
    for (int i = 0; i < s.n(); ++i) {
        for (int k = 0; k < d; ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", s.samples[i][k]);
            os << buf << ',';
        }
        os << (i < static_cast<int>(s.component.size()) ? s.component[i] : 0) << '\n';
    }
}

inline void save_samples_csv(const std::string& path, const LoadSampleSet& s) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    write_samples_csv(f, s);
}

inline LoadSampleSet read_samples_csv(std::istream& is) {
    LoadSampleSet s;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("sample file is empty");
    int ncols = 1;
    for (char ch : line) ncols += ch == ',';
    if (ncols < 2 || line.find("component") == std::string::npos) throw std::runtime_error("bad sample header: " + line);
    const int d = ncols - 1;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        Eigen::VectorXd v(d);
        for (int k = 0; k < d; ++k) {
            if (!std::getline(ss, cell, ',')) throw std::runtime_error("short row at line " + std::to_string(lineno));
            v[k] = std::stod(cell);
        }
        if (!std::getline(ss, cell, ',')) throw std::runtime_error("missing component at line " + std::to_string(lineno));
        s.samples.push_back(v);
        s.component.push_back(std::stoi(cell));
    }
    if (s.samples.empty()) throw std::runtime_error("sample file has no rows");
    return s;
}

inline LoadSampleSet load_samples_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    return read_samples_csv(f);
}

}  // namespace drtruss
