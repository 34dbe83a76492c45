#pragma once

// YAML -> ExperimentConfig. Keys carry their units; unknown keys are rejected so a
// misspelled `Vbar_mm` does not silently fall back to a default.

#include "drtruss/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <set>

namespace drtruss::cli {

namespace detail {

inline void only_keys(const YAML::Node& n, const std::string& where, std::set<std::string> allowed) {
    if (!n.IsMap()) throw ConfigError(where + ": expected a mapping");
    for (const auto& kv : n) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
void read(const YAML::Node& n, const char* key, T& out, const std::string& where) {
    if (!n[key]) return;
    try {
        out = n[key].as<T>();
    } catch (const YAML::Exception& e) {
        throw ConfigError(where + "." + key + ": " + e.msg);
    }
}

// number or "auto"
inline void read_auto(const YAML::Node& n, const char* key, std::optional<double>& out, const std::string& where) {
    if (!n[key]) return;
    if (n[key].IsScalar() && n[key].Scalar() == "auto") {
        out.reset();
        return;
    }
    double v = 0.0;
    read(n, key, v, where);
    out = v;
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
}

}  // namespace detail

/// Parses a config document. Relative file paths are taken against `base`.
inline ExperimentConfig parse_config(const YAML::Node& root, const std::filesystem::path& base = ".") {
    using detail::read;
    ExperimentConfig c;
    if (!root || root.IsNull()) return c;
    detail::only_keys(root, "config", {"name", "truss", "samples", "risk", "sweep", "bench", "solver", "output_dir", "threads"});
    read(root, "name", c.name, "config");
    read(root, "output_dir", c.output_dir, "config");
    read(root, "threads", c.threads, "config");

    if (const auto t = root["truss"]) {
        detail::only_keys(t, "truss", {"generator", "file", "nx", "ny", "level", "spacing_m", "fixed_nodes", "length_m",
                                       "E_GPa", "Vbar_mm3", "load_node"});
        auto& tc = c.truss;
        read(t, "generator", tc.generator, "truss");
        read(t, "file", tc.file, "truss");
        read(t, "nx", tc.nx, "truss");
        read(t, "ny", tc.ny, "truss");
        read(t, "level", tc.level, "truss");
        read(t, "spacing_m", tc.spacing_m, "truss");
        read(t, "fixed_nodes", tc.fixed_nodes, "truss");
        read(t, "length_m", tc.length_m, "truss");
        read(t, "E_GPa", tc.E_GPa, "truss");
        read(t, "Vbar_mm3", tc.Vbar_mm3, "truss");
        read(t, "load_node", tc.load_node, "truss");
        if (!tc.file.empty() && !t["generator"]) tc.generator = "file";
        tc.file = detail::resolve(base, tc.file).string();
        if (tc.generator == "file" && !std::filesystem::exists(tc.file))
            throw ConfigError("truss.file not found: " + tc.file);
        if (!(tc.E_GPa > 0) || !(tc.Vbar_mm3 > 0)) throw ConfigError("truss: E_GPa and Vbar_mm3 must be positive");
    }

    if (const auto s = root["samples"]) {
        detail::only_keys(s, "samples", {"file", "seed", "components"});
        read(s, "file", c.samples.file, "samples");
        read(s, "seed", c.samples.seed, "samples");
        c.samples.file = detail::resolve(base, c.samples.file).string();
        if (!c.samples.file.empty() && !std::filesystem::exists(c.samples.file))
            throw ConfigError("samples.file not found: " + c.samples.file);
        if (const auto comps = s["components"]) {
            if (!comps.IsSequence()) throw ConfigError("samples.components: expected a list");
            for (std::size_t k = 0; k < comps.size(); ++k) {
                const auto where = "samples.components[" + std::to_string(k) + "]";
                detail::only_keys(comps[k], where, {"mean_kN", "cov_kN2", "count"});
                std::vector<double> mean, cov;
                int count = 0;
                read(comps[k], "mean_kN", mean, where);
                read(comps[k], "cov_kN2", cov, where);
                read(comps[k], "count", count, where);
                const auto d = static_cast<Eigen::Index>(mean.size());
                if (d == 0 || cov.size() != mean.size() * mean.size())
                    throw ConfigError(where + ": cov_kN2 needs " + std::to_string(d * d) + " entries (row-major)");
                if (count < 0) throw ConfigError(where + ": negative count");
                GaussianComponent g;
                g.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
                g.cov = Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>(cov.data(), d, d);
                c.samples.mixture.components.push_back(std::move(g));
                c.samples.mixture.counts.push_back(count);
            }
        }
        if (c.samples.file.empty() && c.samples.mixture.components.empty())
            throw ConfigError("samples: give either file or components");
    }

    if (const auto r = root["risk"]) {
        detail::only_keys(r, "risk", {"kernel", "h_J", "gamma", "tau", "w0"});
        std::string kernel = to_string(c.kernel), w0 = "uniform";
        read(r, "kernel", kernel, "risk");
        read(r, "h_J", c.h_J, "risk");
        read(r, "gamma", c.gamma, "risk");
        read(r, "tau", c.tau, "risk");
        read(r, "w0", w0, "risk");
        try {
            c.kernel = kernel_from_string(kernel);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("risk.kernel: ") + e.what());
        }
        if (w0 != "uniform") throw ConfigError("risk.w0: only 'uniform' is supported");
        if (!(c.h_J > 0)) throw ConfigError("risk.h_J must be positive");
        if (!(c.gamma > 0 && c.gamma < 1)) throw ConfigError("risk.gamma must lie in (0, 1)");
        if (!(c.tau >= 0)) throw ConfigError("risk.tau must be nonnegative");
    }

    if (const auto s = root["sweep"]) {
        detail::only_keys(s, "sweep", {"nu_count", "nu_min_J", "nu_max_J", "nu_J", "tau_values"});
        read(s, "nu_count", c.sweep.nu_count, "sweep");
        detail::read_auto(s, "nu_min_J", c.sweep.nu_min_J, "sweep");
        detail::read_auto(s, "nu_max_J", c.sweep.nu_max_J, "sweep");
        detail::read_auto(s, "nu_J", c.sweep.nu_J, "sweep");
        read(s, "tau_values", c.sweep.tau_values, "sweep");
        if (c.sweep.nu_count < 1) throw ConfigError("sweep.nu_count must be at least 1");
        for (double t : c.sweep.tau_values)
            if (!(t >= 0)) throw ConfigError("sweep.tau_values must be nonnegative");
    }

    if (const auto b = root["bench"]) {
        detail::only_keys(b, "bench", {"grids", "sample_counts", "kernels", "timeout_s"});
        if (const auto g = b["grids"]) {
            for (std::size_t k = 0; k < g.size(); ++k) {
                const auto where = "bench.grids[" + std::to_string(k) + "]";
                detail::only_keys(g[k], where, {"nx", "ny", "level"});
                BenchCase bc;
                read(g[k], "nx", bc.nx, where);
                read(g[k], "ny", bc.ny, where);
                read(g[k], "level", bc.level, where);
                c.bench.grids.push_back(bc);
            }
        }
        read(b, "sample_counts", c.bench.sample_counts, "bench");
        if (b["kernels"]) {
            std::vector<std::string> ks;
            read(b, "kernels", ks, "bench");
            c.bench.kernels.clear();
            for (const auto& k : ks) {
                try {
                    c.bench.kernels.push_back(kernel_from_string(k));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("bench.kernels: ") + e.what());
                }
            }
        }
        read(b, "timeout_s", c.bench.timeout_s, "bench");
    }

    if (const auto s = root["solver"]) {
        detail::only_keys(s, "solver", {"tol_feas", "tol_gap", "tol_infeas", "max_iter", "time_limit_s", "verbose"});
        auto& st = c.solver;
        read(s, "tol_feas", st.tol_feas, "solver");
        read(s, "tol_gap", st.tol_gap, "solver");
        read(s, "tol_infeas", st.tol_infeas, "solver");
        read(s, "max_iter", st.max_iter, "solver");
        read(s, "time_limit_s", st.time_limit_s, "solver");
        read(s, "verbose", st.verbose, "solver");
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw ConfigError("cannot read config " + path);
    } catch (const YAML::Exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(root, std::filesystem::path(path).parent_path());
}

/// The samples block as YAML, written next to generated sample files.
inline std::string echo_samples_spec(const ExperimentConfig& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap << YAML::Key << "samples" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "seed" << YAML::Value << c.samples.seed;
    out << YAML::Key << "components" << YAML::Value << YAML::BeginSeq;
    const auto& mx = c.samples.mixture;
    for (std::size_t k = 0; k < mx.components.size(); ++k) {
        const auto& g = mx.components[k];
        std::vector<double> mean(g.mean.data(), g.mean.data() + g.mean.size()), cov;
        for (Eigen::Index i = 0; i < g.cov.rows(); ++i)
            for (Eigen::Index j = 0; j < g.cov.cols(); ++j) cov.push_back(g.cov(i, j));
        out << YAML::BeginMap << YAML::Key << "mean_kN" << YAML::Value << YAML::Flow << mean << YAML::Key << "cov_kN2"
            << YAML::Value << YAML::Flow << cov << YAML::Key << "count" << YAML::Value << mx.counts[k] << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace drtruss::cli
