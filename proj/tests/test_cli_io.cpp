#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "bsnq/config.hpp"
#include "bsnq/error.hpp"
#include "bsnq/field_io.hpp"
#include "bsnq/orchestrate.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace bsnq;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

const char* kMinimal = R"({
  "grid": {"Nx": 16, "Nz": 17},
  "params": {"f": 1.0, "nu": 0.1, "alpha": 1.0, "alpha0": 0.0},
  "potential": {"kind": "linear_z", "g": 1.0},
  "delta": {"kind": "constant", "c": -1.0}
})";

std::string with(const std::string& extra) {
    std::string s = kMinimal;
    s.insert(s.rfind('}'), ",\n" + extra);
    return s;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
    const auto p = dir / name;
    std::ofstream(p) << text;
    return p;
}

std::string error_path(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<no error>";
}

}  // namespace

TEST_CASE("minimal document materializes the documented defaults") {
    const auto c = parse_config(kMinimal);
    CHECK(c.Lx == 2 * pi);
    CHECK(c.h == 1.0);
    CHECK(c.params.gamma == 1.0);
    // Psi = z tops out at 1 on z = h; beta = gamma * 1 + 1 keeps -gamma Psi + beta > 0 there.
    CHECK(c.params.beta == 2.0);
    CHECK(c.a0 == 0.0);
    CHECK(c.a1 == 0.0);
    CHECK(c.mode == Mode::Nonlinear);
    CHECK(c.initial.empty());
    CHECK(c.seed == 0);

    const auto echoed = nlohmann::json::parse(config_to_json(c));
    CHECK(echoed["params"]["beta"] == 2.0);
    CHECK(echoed["params"]["a0"] == 0.0);
    CHECK(echoed["time"]["cfl_target"] == 0.5);
    // The echo is itself a valid document describing the same run.
    CHECK(config_to_json(parse_config(config_to_json(c))) == config_to_json(c));
}

TEST_CASE("schema violations name the offending key") {
    std::string no_nu = kMinimal;
    no_nu.replace(no_nu.find("\"nu\": 0.1, "), 11, "");
    CHECK(error_path(no_nu) == "params.nu");
    CHECK(error_path(R"({"params": {}})") == "grid");
    CHECK(error_path(with(R"("time": {"T_end": -1})")) == "time.T_end");
    CHECK(error_path(with(R"("time": {"dt": "fast"})")) == "time.dt");
    CHECK(error_path(with(R"("colour": 3)")) == "colour");
    CHECK(error_path(with(R"("initial": [{"kind": "single_mode", "amplitude": 1}, {"kind": "blob"}])")) ==
          "initial[1].kind");
    CHECK(error_path(with(R"("mode": "chaotic")")) == "mode");
    CHECK(error_path("{ not json") == "<root>");
    CHECK(error_path(with(R"("stability": {"s_min": 10, "s_max": 1})")) == "stability.s_max");

    std::string bad_grid = kMinimal;
    bad_grid.replace(bad_grid.find("\"Nx\": 16"), 8, "\"Nx\": 15");
    CHECK(error_path(bad_grid) == "grid");
}

TEST_CASE("a0 must equal alpha0") {
    std::string s = kMinimal;
    s.replace(s.find("\"alpha0\": 0.0"), 13, "\"alpha0\": 2.0, \"a0\": 1.0");
    try {
        parse_config(s);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.path() == "params.a0");
        CHECK(std::string(e.what()).find("a0 = alpha0") != std::string::npos);
    }
    s.replace(s.find("\"a0\": 1.0"), 9, "\"a0\": 2.0");
    CHECK(parse_config(s).a0 == 2.0);
}

TEST_CASE("initial conditions") {
    SUBCASE("single mode") {
        const auto c = parse_config(with(R"("initial": {"kind": "single_mode", "amplitude": 0.5, "m": 2, "n": 1})"));
        const auto g = c.grid();
        const auto s = initial_state(c, g);
        double err = 0.0;
        for (int i = 0; i < g.Nx; ++i)
            for (int j = 0; j < g.Nz; ++j)
                err = std::max(err, std::abs(s.psi(i, j) - 0.5 * std::cos(2 * g.x(i)) * std::sin(pi * g.z(j))));
        CHECK(err <= 1e-12);
        CHECK(s.rho.max_abs() == 0.0);
    }
    SUBCASE("random perturbation follows the seed") {
        const std::string doc = with(R"("initial": {"kind": "random", "field": "rho", "amplitude": 0.1})");
        auto c = parse_config(doc);
        const auto g = c.grid();
        const auto a = initial_state(c, g);
        const auto b = initial_state(c, g);
        CHECK(a.rho.max_abs() == doctest::Approx(0.1));
        CHECK(std::equal(a.rho.values().begin(), a.rho.values().end(), b.rho.values().begin()));
        c.seed = 1;
        const auto d = initial_state(c, g);
        CHECK_FALSE(std::equal(a.rho.values().begin(), a.rho.values().end(), d.rho.values().begin()));
    }
    SUBCASE("file perturbation") {
        TempDir dir("bsnq_cli_file_ic");
        const auto g = parse_config(kMinimal).grid();
        const auto v = ScalarField::sample(g, [](double x, double z) { return std::sin(x) * z; });
        write_snapshot(dir.path / "v.bsnq", v);
        const auto cp = write_config(dir.path, "c.json", with(R"("initial": {"kind": "file", "v": "v.bsnq"})"));
        const auto c = load_config(cp);
        const auto s = initial_state(c, c.grid());
        CHECK(std::equal(s.v.values().begin(), s.v.values().end(), v.values().begin()));

        const auto other = build_grid(2 * pi, 1.0, 8, 9);
        write_snapshot(dir.path / "v.bsnq", ScalarField(other));
        CHECK_THROWS_AS(initial_state(c, c.grid()), ConfigError);
    }
}

TEST_CASE("stability subcommand on the stable fixture") {
    TempDir dir("bsnq_cli_stab");
    Overrides o;
    o.config = write_config(dir.path, "c.json", kMinimal);
    o.out = dir.path / "run";
    std::ostringstream rep, err;
    CHECK(orchestrate(Subcommand::Stability, o, rep, err) == kExitOk);
    CHECK(rep.str().find("verdict Stable") != std::string::npos);
    const auto j = nlohmann::json::parse(read_file(dir.path / "run" / "eigen.json"));
    CHECK(j["verdict"] == "Stable");
    CHECK(j["conditions"]["branch"] == "stable");
    CHECK(fs::exists(dir.path / "run" / "manifest.json"));
    CHECK(err.str().empty());
}

TEST_CASE("steady subcommand writes the bundle and residual report") {
    TempDir dir("bsnq_cli_steady");
    Overrides o;
    o.config = write_config(dir.path, "c.json", kMinimal);
    o.out = dir.path / "run";
    std::ostringstream rep, err;
    CHECK(orchestrate(Subcommand::Steady, o, rep, err) == kExitOk);
    CHECK(fs::exists(dir.path / "run" / "steady" / "rho_s.bsnq"));
    const auto r = nlohmann::json::parse(read_file(dir.path / "run" / "residuals.json"));
    CHECK(r["r_hyd"].get<double>() <= 1e-10);
}

TEST_CASE("simulate is deterministic and verify catches a corrupted ledger") {
    TempDir dir("bsnq_cli_sim");
    const auto cp = write_config(
        dir.path, "c.json",
        R"({
  "grid": {"Nx": 16, "Nz": 17},
  "params": {"f": 1.0, "nu": 0.1, "alpha": 1.0, "alpha0": -1.0},
  "potential": {"kind": "linear_z", "g": 1.0},
  "delta": {"kind": "constant", "c": 1.0},
  "initial": {"kind": "random", "amplitude": 0.01},
  "time": {"T_end": 1.0, "dt": 0.05, "observe_every": 2}
})");
    std::ostringstream rep, err;
    Overrides o;
    o.config = cp;
    o.seed = 3;
    o.out = dir.path / "a";
    REQUIRE(orchestrate(Subcommand::Simulate, o, rep, err) == kExitOk);
    o.out = dir.path / "b";
    REQUIRE(orchestrate(Subcommand::Simulate, o, rep, err) == kExitOk);
    for (const char* f : {"ledger.csv", "norms.csv", "decay.csv", "fit.json", "summary.json"})
        CHECK(read_file(dir.path / "a" / f) == read_file(dir.path / "b" / f));
    o.seed = 4;
    o.out = dir.path / "c";
    REQUIRE(orchestrate(Subcommand::Simulate, o, rep, err) == kExitOk);
    CHECK(read_file(dir.path / "a" / "ledger.csv") != read_file(dir.path / "c" / "ledger.csv"));

    Overrides v;
    v.out = dir.path / "a";
    std::ostringstream vrep, verr;
    CHECK(orchestrate(Subcommand::Verify, v, vrep, verr) == kExitOk);
    CHECK(vrep.str().find("FAIL") == std::string::npos);

    // Inflate the last energy value by 10%.
    std::string ledger = read_file(dir.path / "a" / "ledger.csv");
    auto last = ledger.rfind('\n', ledger.size() - 2) + 1;
    auto c1 = ledger.find(',', last), c2 = ledger.find(',', c1 + 1);
    const double E = std::stod(ledger.substr(c1 + 1, c2 - c1 - 1));
    ledger.replace(c1 + 1, c2 - c1 - 1, fmt_double(1.1 * E));
    std::ofstream(dir.path / "a" / "ledger.csv", std::ios::binary) << ledger;

    std::ostringstream frep, ferr;
    CHECK(orchestrate(Subcommand::Verify, v, frep, ferr) == kExitGateFailed);
    CHECK(ferr.str().find("budget residual exceeds tolerance") != std::string::npos);
    const auto rec = nlohmann::json::parse(read_file(dir.path / "a" / "error.json"));
    CHECK(rec["subcommand"] == "verify");
    CHECK(rec["kind"] == "GateFailed");
}

TEST_CASE("configuration errors produce a machine-readable record") {
    TempDir dir("bsnq_cli_err");
    std::string s = kMinimal;
    s.replace(s.find("\"alpha0\": 0.0"), 13, "\"alpha0\": 2.0, \"a0\": 1.0");
    Overrides o;
    o.config = write_config(dir.path, "c.json", s);
    o.out = dir.path / "run";
    std::ostringstream rep, err;
    CHECK(orchestrate(Subcommand::Simulate, o, rep, err) == kExitConfig);
    const auto rec = nlohmann::json::parse(err.str());
    CHECK(rec["kind"] == "ConfigError");
    CHECK(rec["path"] == "params.a0");
    CHECK(fs::exists(dir.path / "run" / "error.json"));

    Overrides none;
    none.out = dir.path / "run2";
    CHECK(orchestrate(Subcommand::Steady, none, rep, err) == kExitConfig);
    CHECK_THROWS_AS(parse_subcommand("launch"), InvalidArgument);
}
