/// @file config.cpp
/// @brief JSON run configuration: schema checks, defaults, manifest echo, initial states.
#include "bsnq/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "bsnq/error.hpp"
#include "bsnq/field_io.hpp"
#include "json.hpp"

namespace bsnq {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Thin cursor over one JSON object that remembers its key path and the keys consumed.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    double number(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number()) throw ConfigError(join(path_, key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(join(path_, key), "must be finite");
        return d;
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    long long integer(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number_integer()) throw ConfigError(join(path_, key), "expected an integer");
        return v.get<long long>();
    }
    long long integer(const std::string& key, long long fallback) { return has(key) ? integer(key) : fallback; }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_boolean()) throw ConfigError(join(path_, key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key) {
        const json& v = at(key);
        if (!v.is_string()) throw ConfigError(join(path_, key), "expected a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        return has(key) ? string(key) : fallback;
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = at(key);
        if (!v.is_array()) throw ConfigError(join(path_, key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number())
                throw ConfigError(join(path_, key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    Node child(const std::string& key) { return Node(at(key), join(path_, key)); }
    const json& raw(const std::string& key) { return at(key); }
    const std::string& path() const { return path_; }
    std::string path(const std::string& key) const { return join(path_, key); }

    /// Rejects keys that were never read.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown key");
    }

private:
    const json& at(const std::string& key) {
        if (!j_.contains(key)) throw ConfigError(join(path_, key), "required key is missing");
        used_.insert(key);
        return j_.at(key);
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

ScalarField load_field(const std::filesystem::path& file, const Grid& grid, const std::string& key) {
    ScalarField f;
    try {
        f = read_snapshot(file);
    } catch (const Error& e) {
        throw ConfigError(key, e.what());
    }
    const Grid& g = f.grid();
    if (g.Nx != grid.Nx || g.Nz != grid.Nz || g.Lx != grid.Lx || g.h != grid.h)
        throw ConfigError(key, "snapshot grid does not match the configured grid");
    return ScalarField(grid, std::vector<double>(f.values().begin(), f.values().end()));
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path q(p);
    return (q.is_relative() && !base.empty()) ? base / q : q;
}

// A negative fallback marks the key as required.
int positive_int(Node& n, const std::string& key, long long fallback, long long lo = 1) {
    const long long v = fallback < 0 ? n.integer(key) : n.integer(key, fallback);
    if (v < lo || v > 1'000'000'000) throw ConfigError(n.path(key), "must be >= " + std::to_string(lo));
    return static_cast<int>(v);
}

double positive(Node& n, const std::string& key, double fallback) {
    const double v = n.number(key, fallback);
    if (!(v > 0.0)) throw ConfigError(n.path(key), "must be positive");
    return v;
}

Perturbation parse_perturbation(const json& j, const std::string& path, const std::filesystem::path& base) {
    Node n(j, path);
    Perturbation pt;
    const std::string kind = n.string("kind");
    if (kind == "single_mode" || kind == "random") {
        pt.kind = kind == "random" ? Perturbation::Kind::Random : Perturbation::Kind::SingleMode;
        pt.field = n.string("field", "psi");
        if (pt.field != "psi" && pt.field != "rho" && pt.field != "v")
            throw ConfigError(n.path("field"), "expected \"psi\", \"rho\" or \"v\"");
        pt.amplitude = n.number("amplitude");
        if (pt.kind == Perturbation::Kind::SingleMode) {
            pt.m = positive_int(n, "m", 1, 0);
            pt.n = positive_int(n, "n", 1);
            pt.phase = n.number("phase", 0.0);
        } else {
            pt.max_m = positive_int(n, "max_m", 4);
            pt.max_n = positive_int(n, "max_n", 4);
            if (n.has("seed")) {
                const long long s = n.integer("seed");
                if (s < 0) throw ConfigError(n.path("seed"), "must be non-negative");
                pt.seed = static_cast<std::uint64_t>(s);
                pt.seed_set = true;
            }
        }
    } else if (kind == "file") {
        pt.kind = Perturbation::Kind::File;
        if (n.has("psi")) pt.psi_file = resolve(base, n.string("psi"));
        if (n.has("rho")) pt.rho_file = resolve(base, n.string("rho"));
        if (n.has("v")) pt.v_file = resolve(base, n.string("v"));
        if (pt.psi_file.empty() && pt.rho_file.empty() && pt.v_file.empty())
            throw ConfigError(path, "file perturbation names none of psi, rho, v");
    } else {
        throw ConfigError(n.path("kind"), "unknown perturbation kind \"" + kind + "\"");
    }
    n.finish();
    return pt;
}

std::string method_name(EigenMethod m) {
    switch (m) {
    case EigenMethod::Dense: return "dense";
    case EigenMethod::Iterative: return "iterative";
    default: return "auto";
    }
}

}  // namespace

Grid RunConfig::grid() const { return build_grid(Lx, h, Nx, Nz); }

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
    }
    Node root(doc, "");
    RunConfig cfg;

    {
        Node g = root.child("grid");
        cfg.Nx = positive_int(g, "Nx", -1);
        cfg.Nz = positive_int(g, "Nz", -1);
        cfg.Lx = positive(g, "Lx", 2.0 * std::numbers::pi);
        cfg.h = positive(g, "h", 1.0);
        g.finish();
    }
    Grid grid;
    try {
        grid = cfg.grid();
    } catch (const InvalidArgument& e) {
        throw ConfigError("grid", e.what());
    }

    {
        Node p = root.child("params");
        cfg.params.f = p.number("f");
        cfg.params.nu = p.number("nu");
        cfg.params.alpha = p.number("alpha");
        cfg.params.alpha0 = p.number("alpha0");
        cfg.a0 = p.number("a0", cfg.params.alpha0);
        if (cfg.a0 != cfg.params.alpha0)
            throw ConfigError(p.path("a0"), "a0 = " + fmt_double(cfg.a0) + " differs from alpha0 = " +
                                                fmt_double(cfg.params.alpha0) +
                                                "; the shear of v_s is identified with alpha0 (a0 = alpha0)");
        cfg.a1 = p.number("a1", 0.0);
        cfg.params.gamma = p.number("gamma", 1.0);
        cfg.rho_ref = p.number("rho_ref", 0.0);
        const bool beta_set = p.has("beta");
        if (beta_set) cfg.params.beta = p.number("beta");
        p.finish();
        try {
            cfg.params.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError("params", e.what());
        }

        Node pot = root.child("potential");
        const std::string kind = pot.string("kind");
        if (kind == "linear_z") {
            cfg.potential = PotentialSpec::linear_z(pot.number("g"));
        } else if (kind == "harmonic_mode") {
            const double gg = pot.number("g"), eps = pot.number("eps");
            cfg.potential = PotentialSpec::harmonic_mode(gg, eps, positive_int(pot, "m", 1));
        } else if (kind == "tabulated") {
            cfg.psi_file = resolve(base_dir, pot.string("psi"));
            cfg.psi_x_file = resolve(base_dir, pot.string("psi_x"));
            cfg.psi_z_file = resolve(base_dir, pot.string("psi_z"));
            cfg.potential = PotentialSpec::tabulated(load_field(cfg.psi_file, grid, "potential.psi"),
                                                     load_field(cfg.psi_x_file, grid, "potential.psi_x"),
                                                     load_field(cfg.psi_z_file, grid, "potential.psi_z"));
        } else {
            throw ConfigError(pot.path("kind"), "unknown potential kind \"" + kind + "\"");
        }
        pot.finish();

        if (!beta_set) {
            const ScalarField psi = potential_field(cfg.potential, grid);
            double top = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < grid.Nx; ++i) top = std::max(top, psi(i, grid.Nz - 1));
            cfg.params.beta = cfg.params.gamma * top + 1.0;
        }
    }

    {
        Node d = root.child("delta");
        const std::string kind = d.string("kind");
        if (kind == "constant") {
            cfg.delta = DeltaSpec::constant(d.number("c"));
        } else if (kind == "function_of_psi") {
            auto c = d.numbers("coeffs");
            if (c.empty()) throw ConfigError(d.path("coeffs"), "needs at least one coefficient");
            cfg.delta = DeltaSpec::function_of_psi(std::move(c));
        } else if (kind == "tabulated") {
            cfg.delta_file = resolve(base_dir, d.string("file"));
            cfg.delta = DeltaSpec::tabulated(load_field(cfg.delta_file, grid, "delta.file"));
        } else {
            throw ConfigError(d.path("kind"), "unknown delta kind \"" + kind + "\"");
        }
        d.finish();
    }

    {
        const std::string mode = root.string("mode", "nonlinear");
        if (mode == "nonlinear") cfg.mode = Mode::Nonlinear;
        else if (mode == "linearized") cfg.mode = Mode::Linearized;
        else throw ConfigError("mode", "expected \"nonlinear\" or \"linearized\"");
    }

    if (root.has("initial")) {
        const json& ini = root.raw("initial");
        if (ini.is_array()) {
            for (std::size_t k = 0; k < ini.size(); ++k)
                cfg.initial.push_back(parse_perturbation(ini[k], "initial[" + std::to_string(k) + "]", base_dir));
        } else {
            cfg.initial.push_back(parse_perturbation(ini, "initial", base_dir));
        }
    }

    if (root.has("time")) {
        Node t = root.child("time");
        cfg.T_end = positive(t, "T_end", cfg.T_end);
        cfg.dt = positive(t, "dt", cfg.dt);
        cfg.cfl_target = positive(t, "cfl_target", cfg.cfl_target);
        cfg.adaptive = t.boolean("adaptive", cfg.adaptive);
        cfg.dealias = t.boolean("dealias", cfg.dealias);
        cfg.observe_every = positive_int(t, "observe_every", cfg.observe_every);
        t.finish();
    }

    if (root.has("output")) {
        Node o = root.child("output");
        cfg.output_dir = o.string("dir", cfg.output_dir.string());
        cfg.snapshot_every = positive_int(o, "snapshot_every", 0, 0);
        o.finish();
    }

    if (root.has("diagnostics")) {
        Node d = root.child("diagnostics");
        if (d.has("w1s_exponents")) {
            cfg.w1s_exponents = d.numbers("w1s_exponents");
            for (double s : cfg.w1s_exponents)
                if (!(s >= 1.0)) throw ConfigError(d.path("w1s_exponents"), "exponents must be >= 1");
        }
        cfg.balance_proxy = d.boolean("balance_proxy", false);
        d.finish();
    }

    if (root.has("stability")) {
        Node s = root.child("stability");
        auto& o = cfg.stability;
        o.s_min = positive(s, "s_min", o.s_min);
        o.s_max = positive(s, "s_max", o.s_max);
        if (o.s_max <= o.s_min) throw ConfigError(s.path("s_max"), "must exceed s_min");
        o.probes_per_decade = positive_int(s, "probes_per_decade", o.probes_per_decade);
        const std::string m = s.string("method", "auto");
        if (m == "auto") o.eigen.method = EigenMethod::Auto;
        else if (m == "dense") o.eigen.method = EigenMethod::Dense;
        else if (m == "iterative") o.eigen.method = EigenMethod::Iterative;
        else throw ConfigError(s.path("method"), "expected \"auto\", \"dense\" or \"iterative\"");
        o.eigen.dense_max_dofs = positive_int(s, "dense_max_dofs", o.eigen.dense_max_dofs);
        o.eigen.tol = positive(s, "tol", o.eigen.tol);
        o.eigen.max_iterations = positive_int(s, "max_iterations", o.eigen.max_iterations);
        s.finish();
    }

    if (root.has("verify")) {
        Node v = root.child("verify");
        cfg.budget_rel_tol = positive(v, "budget_rel_tol", cfg.budget_rel_tol);
        cfg.drift_tol = positive(v, "drift_tol", cfg.drift_tol);
        v.finish();
    }

    if (root.has("seed")) {
        const long long s = root.integer("seed");
        if (s < 0) throw ConfigError("seed", "must be non-negative");
        cfg.seed = static_cast<std::uint64_t>(s);
    }

    root.finish();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

std::string config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["grid"] = {{"Lx", c.Lx}, {"h", c.h}, {"Nx", c.Nx}, {"Nz", c.Nz}};
    j["params"] = {{"f", c.params.f},         {"nu", c.params.nu},       {"alpha", c.params.alpha},
                   {"alpha0", c.params.alpha0}, {"a0", c.a0},             {"a1", c.a1},
                   {"gamma", c.params.gamma}, {"beta", c.params.beta}, {"rho_ref", c.rho_ref}};
    switch (c.potential.kind) {
    case PotentialSpec::Kind::LinearZ: j["potential"] = {{"kind", "linear_z"}, {"g", c.potential.g}}; break;
    case PotentialSpec::Kind::HarmonicMode:
        j["potential"] = {{"kind", "harmonic_mode"}, {"g", c.potential.g}, {"eps", c.potential.eps}, {"m", c.potential.m}};
        break;
    case PotentialSpec::Kind::Tabulated:
        j["potential"] = {{"kind", "tabulated"},
                          {"psi", c.psi_file.string()},
                          {"psi_x", c.psi_x_file.string()},
                          {"psi_z", c.psi_z_file.string()}};
        break;
    }
    switch (c.delta.kind) {
    case DeltaSpec::Kind::Constant: j["delta"] = {{"kind", "constant"}, {"c", c.delta.c}}; break;
    case DeltaSpec::Kind::FunctionOfPsi: j["delta"] = {{"kind", "function_of_psi"}, {"coeffs", c.delta.coeffs}}; break;
    case DeltaSpec::Kind::Tabulated: j["delta"] = {{"kind", "tabulated"}, {"file", c.delta_file.string()}}; break;
    }
    j["mode"] = c.mode == Mode::Nonlinear ? "nonlinear" : "linearized";
    nlohmann::ordered_json ini = nlohmann::ordered_json::array();
    for (const auto& p : c.initial) {
        nlohmann::ordered_json e;
        switch (p.kind) {
        case Perturbation::Kind::SingleMode:
            e = {{"kind", "single_mode"}, {"field", p.field}, {"amplitude", p.amplitude},
                 {"m", p.m},              {"n", p.n},         {"phase", p.phase}};
            break;
        case Perturbation::Kind::Random:
            e = {{"kind", "random"},     {"field", p.field}, {"amplitude", p.amplitude},
                 {"max_m", p.max_m},     {"max_n", p.max_n}, {"seed", p.seed_set ? p.seed : c.seed}};
            break;
        case Perturbation::Kind::File:
            e = {{"kind", "file"}};
            if (!p.psi_file.empty()) e["psi"] = p.psi_file.string();
            if (!p.rho_file.empty()) e["rho"] = p.rho_file.string();
            if (!p.v_file.empty()) e["v"] = p.v_file.string();
            break;
        }
        ini.push_back(e);
    }
    j["initial"] = ini;
    j["time"] = {{"T_end", c.T_end},     {"dt", c.dt},           {"cfl_target", c.cfl_target},
                 {"adaptive", c.adaptive}, {"dealias", c.dealias}, {"observe_every", c.observe_every}};
    j["output"] = {{"dir", c.output_dir.string()}, {"snapshot_every", c.snapshot_every}};
    j["diagnostics"] = {{"w1s_exponents", c.w1s_exponents}, {"balance_proxy", c.balance_proxy}};
    j["stability"] = {{"s_min", c.stability.s_min},
                      {"s_max", c.stability.s_max},
                      {"probes_per_decade", c.stability.probes_per_decade},
                      {"method", method_name(c.stability.eigen.method)},
                      {"dense_max_dofs", c.stability.eigen.dense_max_dofs},
                      {"tol", c.stability.eigen.tol},
                      {"max_iterations", c.stability.eigen.max_iterations}};
    j["verify"] = {{"budget_rel_tol", c.budget_rel_tol}, {"drift_tol", c.drift_tol}};
    j["seed"] = c.seed;
    return j.dump(2);
}

State initial_state(const RunConfig& cfg, const Grid& grid) {
    using std::numbers::pi;
    ScalarField psi(grid), rho(grid), v(grid);
    auto target = [&](const std::string& f) -> ScalarField& { return f == "rho" ? rho : (f == "v" ? v : psi); };

    for (const auto& p : cfg.initial) {
        switch (p.kind) {
        case Perturbation::Kind::SingleMode: {
            const double k = 2.0 * pi * p.m / grid.Lx, kz = p.n * pi / grid.h;
            target(p.field) += ScalarField::sample(grid, [&](double x, double z) {
                return p.amplitude * std::cos(k * x + p.phase) * std::sin(kz * z);
            });
            break;
        }
        case Perturbation::Kind::Random: {
            std::mt19937_64 rng(p.seed_set ? p.seed : cfg.seed);
            std::uniform_real_distribution<double> U(-1.0, 1.0);
            ScalarField f(grid);
            for (int m = 0; m <= p.max_m; ++m)
                for (int n = 1; n <= p.max_n; ++n) {
                    const double a = U(rng), b = U(rng);
                    const double k = 2.0 * pi * m / grid.Lx, kz = n * pi / grid.h, w = 1.0 / (1.0 + m * m + n * n);
                    f += ScalarField::sample(grid, [&](double x, double z) {
                        return w * (a * std::cos(k * x) + b * std::sin(k * x)) * std::sin(kz * z);
                    });
                }
            const double mx = f.max_abs();
            if (mx > 0.0) target(p.field).axpy(p.amplitude / mx, f);
            break;
        }
        case Perturbation::Kind::File:
            if (!p.psi_file.empty()) psi += load_field(p.psi_file, grid, "initial.psi");
            if (!p.rho_file.empty()) rho += load_field(p.rho_file, grid, "initial.rho");
            if (!p.v_file.empty()) v += load_field(p.v_file, grid, "initial.v");
            break;
        }
    }
    for (int i = 0; i < grid.Nx; ++i) {
        if (psi(i, 0) != 0.0 || psi(i, grid.Nz - 1) != 0.0) {
            if (std::max(std::abs(psi(i, 0)), std::abs(psi(i, grid.Nz - 1))) > 1e-12 * (1.0 + psi.max_abs()))
                throw ConfigError("initial", "psi perturbation must vanish on both walls");
            psi(i, 0) = psi(i, grid.Nz - 1) = 0.0;
        }
    }
    return state_from_psi(std::move(rho), std::move(v), psi, cfg.params);
}

}  // namespace bsnq
