/// @file orchestrate.cpp
/// @brief Subcommand drivers and run-directory layout.
#include "bsnq/orchestrate.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "bsnq/config.hpp"
#include "bsnq/diagnostics.hpp"
#include "bsnq/error.hpp"
#include "bsnq/field_io.hpp"
#include "bsnq/format.hpp"
#include "bsnq/stability.hpp"
#include "json.hpp"

namespace bsnq {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

/// A failed acceptance gate (exit 1).
class GateFailed : public Error {
public:
    using Error::Error;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

ojson read_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    try {
        return ojson::parse(is);
    } catch (const ojson::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

// Header-addressed numeric CSV.
std::map<std::string, std::vector<double>> read_numeric_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw IoError(path.string() + ": empty file");
    std::vector<std::string> names;
    {
        std::stringstream ss(line);
        for (std::string n; std::getline(ss, n, ',');) names.push_back(n);
    }
    std::map<std::string, std::vector<double>> cols;
    for (std::size_t lineno = 2; std::getline(is, line); ++lineno) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::size_t c = 0;
        for (std::string cell; std::getline(ss, cell, ','); ++c) {
            if (c >= names.size()) break;
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cell.size() || cell.empty())
                throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            cols[names[c]].push_back(v);
        }
        if (c != names.size()) throw IoError(path.string() + ":" + std::to_string(lineno) + ": wrong number of columns");
    }
    return cols;
}

ojson manifest(Subcommand cmd, const RunConfig& cfg, int threads) {
    ojson m;
    m["subcommand"] = to_string(cmd);
    m["seed"] = cfg.seed;
    m["threads"] = threads;
    m["config"] = ojson::parse(config_to_json(cfg));
    return m;
}

RunConfig resolve_config(const Overrides& o) {
    if (!o.config) throw ConfigError("--config", "a configuration file is required");
    RunConfig cfg = load_config(*o.config);
    if (o.out) cfg.output_dir = *o.out;
    if (o.seed) cfg.seed = *o.seed;
    return cfg;
}

SteadyState steady_for(const RunConfig& cfg, const Grid& grid) {
    return build_steady_state(cfg.delta, cfg.potential, cfg.a0, cfg.a1, cfg.rho_ref, grid);
}

void write_state(const fs::path& dir, const std::string& stem, const State& s) {
    write_snapshot(dir / (stem + "_rho.bsnq"), s.rho);
    write_snapshot(dir / (stem + "_v.bsnq"), s.v);
    write_snapshot(dir / (stem + "_omega.bsnq"), s.omega);
    write_snapshot(dir / (stem + "_psi.bsnq"), s.psi);
}

// ---- steady -------------------------------------------------------------------------------

int run_steady(const RunConfig& cfg, const Overrides& o, std::ostream& report) {
    const Grid grid = cfg.grid();
    fs::create_directories(cfg.output_dir);
    write_json(cfg.output_dir / "manifest.json", manifest(Subcommand::Steady, cfg, o.threads));

    const SteadyState ss = steady_for(cfg, grid);
    export_steady_bundle(cfg.output_dir / "steady", ss, cfg.params);
    const auto bal = balance_residuals(ss, cfg.params.f, grid);
    ojson r;
    r["harmonic_residual"] = validate_harmonic(cfg.potential, grid);
    r["curl_residual"] = validate_exactness(cfg.delta, cfg.potential, grid);
    r["seam_jump"] = seam_jump(cfg.delta, cfg.potential, grid);
    r["r_geo"] = bal.r_geo;
    r["r_hyd"] = bal.r_hyd;
    write_json(cfg.output_dir / "residuals.json", r);
    report << "steady state written to " << (cfg.output_dir / "steady").string() << "\n";
    for (auto it = r.begin(); it != r.end(); ++it)
        report << "  " << std::left << std::setw(18) << it.key() << fmt_double(it.value().get<double>()) << "\n";
    return kExitOk;
}

// ---- simulate -----------------------------------------------------------------------------

int run_simulate(const RunConfig& cfg, const Overrides& o, std::ostream& report) {
    const Grid grid = cfg.grid();
    const fs::path out = cfg.output_dir;
    fs::create_directories(out / "snapshots");
    write_json(out / "manifest.json", manifest(Subcommand::Simulate, cfg, o.threads));

    const SteadyState ss = steady_for(cfg, grid);
    const State s0 = initial_state(cfg, grid);

    EnergyLedger ledger(ss, cfg.params);
    ConservedNormTracker n2(ss, 2), n4(ss, 4);
    DecayRecorder::Options dopt;
    dopt.w1s_exponents = cfg.w1s_exponents;
    dopt.balance_proxy = cfg.balance_proxy;
    dopt.mode = cfg.mode;
    DecayRecorder decay(ss, cfg.params, dopt);

    // The ledger sees every step so that its time quadrature runs on the solver's own levels.
    std::vector<Observer> obs{n2.observer(), n4.observer(), decay.observer()};
    if (cfg.snapshot_every > 0) {
        auto count = std::make_shared<long>(0);
        obs.push_back([&, count](const State& s) {
            if ((*count)++ % cfg.snapshot_every == 0) {
                std::ostringstream stem;
                stem << "obs" << std::setw(6) << std::setfill('0') << (*count - 1);
                write_state(out / "snapshots", stem.str(), s);
            }
        });
    }

    StepConfig sc;
    sc.dt = cfg.dt;
    sc.cfl_target = cfg.cfl_target;
    sc.mode = cfg.mode;
    sc.dealias = cfg.dealias;
    RunOptions ro;
    ro.T_end = cfg.T_end;
    ro.observe_every = cfg.observe_every;
    ro.adaptive = cfg.adaptive;

    spdlog::info("simulate: {}x{} grid, T_end {}, dt {}", grid.Nx, grid.Nz, cfg.T_end, cfg.dt);
    const RunResult res = run(s0, ss, cfg.params, sc, ro, obs, {ledger.observer()});
    write_state(out / "snapshots", "final", res.final_state);

    ledger.write_csv(out / "ledger.csv");
    {
        std::ostringstream os;
        os << "t,norm2,norm4\n";
        for (std::size_t k = 0; k < n2.times().size(); ++k)
            os << fmt_double(n2.times()[k]) << ',' << fmt_double(n2.norms()[k]) << ',' << fmt_double(n4.norms()[k])
               << '\n';
        write_text(out / "norms.csv", os.str());
    }

    const double dissipated = ledger.dissipated() / cfg.params.gamma;
    const GammaBetaFit fit = fit_gamma_beta(res.final_state, s0, ss, dissipated);
    const DecayReport dr = decay_report(decay, fit);
    dr.write_csv(out / "decay.csv");

    ojson fj;
    fj["gamma"] = fit.gamma;
    fj["beta"] = fit.beta;
    fj["C0"] = fit.C0;
    fj["degenerate"] = fit.degenerate;
    fj["gamma_at_boundary"] = fit.gamma_at_boundary;
    fj["locally_optimal"] = fit.locally_optimal;
    fj["Lambda0"] = fit.Lambda0;
    fj["dissipation"] = fit.dissipation;
    fj["budget_rhs"] = fit.budget_rhs;
    fj["sufficient_rhs"] = fit.sufficient_rhs;
    fj["sufficient_condition"] = fit.sufficient_condition;
    write_json(out / "fit.json", fj);

    ojson sj;
    sj["steps"] = res.steps;
    sj["T_end"] = res.final_state.t;
    sj["E0"] = ledger.E().front();
    sj["E_final"] = ledger.E().back();
    sj["max_relative_budget_residual"] = ledger.max_relative_residual();
    sj["drift_norm2"] = n2.drift().drift;
    sj["drift_norm4"] = n4.drift().drift;
    sj["h1_initial"] = dr.h1.front();
    sj["h1_final"] = dr.h1.back();
    sj["h1_drop_below_10pct_of_running_max"] = first_drop_below_running_max(dr.times, dr.h1, 0.1);
    write_json(out / "summary.json", sj);

    report << "simulate: " << res.steps << " steps to t = " << fmt_double(res.final_state.t) << "\n"
           << "  E(0) " << fmt_double(ledger.E().front()) << ", E(T) " << fmt_double(ledger.E().back())
           << ", max |budget residual|/E(0) " << fmt_double(ledger.max_relative_residual()) << "\n"
           << "  fit gamma " << fmt_double(fit.gamma) << ", beta " << fmt_double(fit.beta) << ", C0 "
           << fmt_double(fit.C0) << ", sufficient condition " << (fit.sufficient_condition ? "held" : "not met")
           << "\n";
    return kExitOk;
}

// ---- stability ----------------------------------------------------------------------------

std::string to_string(Branch b) {
    switch (b) {
    case Branch::UnstableBranch: return "unstable";
    case Branch::StableBranch: return "stable";
    default: return "outside";
    }
}

int run_stability(const RunConfig& cfg, const Overrides& o, std::ostream& report) {
    const Grid grid = cfg.grid();
    const fs::path out = cfg.output_dir;
    fs::create_directories(out);
    write_json(out / "manifest.json", manifest(Subcommand::Stability, cfg, o.threads));

    const SteadyState ss = steady_for(cfg, grid);
    const Classification c = classify(ss, cfg.params, grid, cfg.stability);
    const EigenResult& r = c.result;

    ojson j;
    j["verdict"] = to_string(r.verdict);
    j["lambda0"] = r.lambda0;
    j["s_star"] = r.s_star;
    j["phi_at_root"] = r.phi_at_root;
    j["diagnostics"] = r.diagnostics;
    j["conditions"] = {{"max_delta", c.conditions.max_delta},
                       {"f_plus_alpha0", c.conditions.f_plus_alpha0},
                       {"branch", to_string(c.conditions.branch)},
                       {"agrees", c.conditions.agrees},
                       {"note", c.conditions.note}};
    write_json(out / "eigen.json", j);

    std::ostringstream as;
    as << "s,alpha\n";
    for (const auto& a : r.alpha_samples) as << fmt_double(a.s) << ',' << fmt_double(a.alpha) << '\n';
    write_text(out / "alpha.csv", as.str());
    if (r.verdict == Verdict::Unstable) {
        write_snapshot(out / "mode_psi.bsnq", r.mode_psi);
        write_snapshot(out / "mode_u.bsnq", r.mode_u);
        write_snapshot(out / "mode_w.bsnq", r.mode_w);
    }

    report << "verdict " << to_string(r.verdict);
    if (r.verdict == Verdict::Unstable) report << ", lambda0 " << fmt_double(r.lambda0);
    report << "\n  " << c.conditions.note << "\n";
    if (!c.conditions.agrees) throw GateFailed("spectral verdict disagrees with the sign conditions");
    return kExitOk;
}

// ---- verify -------------------------------------------------------------------------------

int run_verify(const Overrides& o, std::ostream& report) {
    if (!o.out) throw ConfigError("--out", "verify needs the run directory");
    const fs::path dir = *o.out;
    const ojson man = read_json(dir / "manifest.json");
    if (!man.contains("config")) throw IoError((dir / "manifest.json").string() + ": no config record");
    RunConfig cfg = o.config ? load_config(*o.config) : parse_config(man["config"].dump());

    struct Row {
        std::string name;
        double value;
        double threshold;
        bool pass;
    };
    std::vector<Row> rows;

    const EnergyLedger ledger = EnergyLedger::read_csv(dir / "ledger.csv");
    if (ledger.size() == 0) throw IoError((dir / "ledger.csv").string() + ": no rows");
    double rel = ledger.max_relative_residual();
    bool finite = std::isfinite(rel);
    for (double e : ledger.E()) finite = finite && std::isfinite(e);
    rows.push_back({"budget_residual", rel, cfg.budget_rel_tol, finite && rel <= cfg.budget_rel_tol});

    if (cfg.mode == Mode::Nonlinear) {
        auto cols = read_numeric_csv(dir / "norms.csv");
        for (const char* q : {"norm2", "norm4"}) {
            if (!cols.count(q)) throw IoError((dir / "norms.csv").string() + ": missing column " + q);
            const double d = relative_drift(cols[q]);
            rows.push_back({std::string("drift_") + q, d, cfg.drift_tol, std::isfinite(d) && d <= cfg.drift_tol});
        }
    }

    ojson vj = ojson::array();
    report << std::left << std::setw(18) << "check" << std::setw(26) << "value" << std::setw(12) << "threshold"
           << "result\n";
    bool all = true;
    for (const auto& r : rows) {
        report << std::left << std::setw(18) << r.name << std::setw(26) << fmt_double(r.value) << std::setw(12)
               << fmt_double(r.threshold) << (r.pass ? "PASS" : "FAIL") << "\n";
        vj.push_back({{"check", r.name}, {"value", r.value}, {"threshold", r.threshold}, {"pass", r.pass}});
        all = all && r.pass;
    }
    write_json(dir / "verify.json", vj);
    if (!rows.front().pass) throw GateFailed("budget residual exceeds tolerance");
    if (!all) throw GateFailed("conserved-norm drift exceeds tolerance");
    return kExitOk;
}

void record_error(const fs::path& dir, Subcommand cmd, const std::string& kind, const std::string& message,
                  const std::string& path, std::ostream& err) {
    ojson e;
    e["subcommand"] = to_string(cmd);
    e["kind"] = kind;
    e["message"] = message;
    if (!path.empty()) e["path"] = path;
    err << e.dump() << std::endl;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!ec) {
        std::ofstream os(dir / "error.json");
        os << e.dump(2) << "\n";
    }
}

}  // namespace

Subcommand parse_subcommand(const std::string& name) {
    if (name == "steady") return Subcommand::Steady;
    if (name == "simulate") return Subcommand::Simulate;
    if (name == "stability") return Subcommand::Stability;
    if (name == "verify") return Subcommand::Verify;
    throw InvalidArgument("unknown subcommand \"" + name + "\"");
}

std::string to_string(Subcommand c) {
    switch (c) {
    case Subcommand::Steady: return "steady";
    case Subcommand::Simulate: return "simulate";
    case Subcommand::Stability: return "stability";
    default: return "verify";
    }
}

int orchestrate(Subcommand cmd, const Overrides& o, std::ostream& report, std::ostream& err) {
    fs::path dir = o.out.value_or("bsnq_out");
    try {
        if (o.threads < 1) throw ConfigError("--threads", "must be >= 1");
        if (cmd == Subcommand::Verify) return run_verify(o, report);
        const RunConfig cfg = resolve_config(o);
        dir = cfg.output_dir;
        switch (cmd) {
        case Subcommand::Steady: return run_steady(cfg, o, report);
        case Subcommand::Simulate: return run_simulate(cfg, o, report);
        default: return run_stability(cfg, o, report);
        }
    } catch (const ConfigError& e) {
        record_error(dir, cmd, "ConfigError", e.what(), e.path(), err);
        return kExitConfig;
    } catch (const GateFailed& e) {
        record_error(dir, cmd, "GateFailed", e.what(), "", err);
        return kExitGateFailed;
    } catch (const Inexact1Form& e) {
        record_error(dir, cmd, "Inexact1Form", e.what(), "", err);
        return kExitGateFailed;
    } catch (const NonPeriodicPrimitive& e) {
        record_error(dir, cmd, "NonPeriodicPrimitive", e.what(), "", err);
        return kExitGateFailed;
    } catch (const InvalidArgument& e) {
        record_error(dir, cmd, "InvalidArgument", e.what(), "", err);
        return kExitConfig;
    } catch (const Error& e) {
        record_error(dir, cmd, "RuntimeError", e.what(), "", err);
        return kExitRuntime;
    } catch (const std::exception& e) {
        record_error(dir, cmd, "RuntimeError", e.what(), "", err);
        return kExitRuntime;
    }
}

}  // namespace bsnq
