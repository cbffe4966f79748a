/// @file bsnq.cpp
/// @brief Command-line front end: bsnq <steady|simulate|stability|verify> [options].
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "bsnq/orchestrate.hpp"

int main(int argc, char** argv) {
    if (const char* lvl = std::getenv("BSNQ_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
    else spdlog::set_level(spdlog::level::warn);

    CLI::App app{"Rotating Boussinesq channel laboratory"};
    app.require_subcommand(1);

    std::string config, out;
    std::uint64_t seed = 0;
    int threads = 1;
    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* c = sub->add_option("--config", config, "run configuration (JSON)")->check(CLI::ExistingFile);
        if (need_config) c->required();
        sub->add_option("--out", out, "output directory (overrides output.dir)");
        sub->add_option("--seed", seed, "random seed (overrides seed)");
        sub->add_option("--threads", threads, "worker threads recorded in the manifest")->check(CLI::PositiveNumber);
    };
    add_common(app.add_subcommand("steady", "construct the base state and its residual report"), true);
    add_common(app.add_subcommand("simulate", "time-integrate and write ledgers and snapshots"), true);
    add_common(app.add_subcommand("stability", "growth-rate search and sign-condition classification"), true);
    auto* verify = app.add_subcommand("verify", "check a run directory against its tolerances");
    add_common(verify, false);
    verify->get_option("--out")->required();

    CLI11_PARSE(app, argc, argv);

    const auto* sub = app.get_subcommands().front();
    bsnq::Overrides o;
    if (!config.empty()) o.config = config;
    if (!out.empty()) o.out = out;
    if (sub->count("--seed")) o.seed = seed;
    o.threads = threads;
    return bsnq::orchestrate(bsnq::parse_subcommand(sub->get_name()), o, std::cout, std::cerr);
}
