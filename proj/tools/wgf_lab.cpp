#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "wgf/checks.hpp"
#include "wgf/experiments.hpp"
#include "wgf/serialization.hpp"
#include "wgf/types.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;

int cmd_run(const std::string& config_arg, std::optional<std::uint64_t> seed,
            const std::string& out_dir) {
    const nlohmann::json config = wgf::experiments::resolve_config(config_arg, seed);
    std::string out = out_dir;
    if (out.empty()) out = "out/" + config.at("experiment").get<std::string>();
    wgf::experiments::run_experiment(config, out);
    std::cout << "wrote artifacts to " << out << "\n";
    return kExitOk;
}

int cmd_check(const std::string& suite, bool as_json) {
    const auto results = wgf::checks::run_suite(suite, /*progress=*/!as_json);
    bool all_pass = true;
    if (as_json) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : results) {
            j.push_back({{"id", r.id},
                         {"description", r.description},
                         {"pass", r.pass},
                         {"measured", r.measured}});
            all_pass = all_pass && r.pass;
        }
        std::cout << j.dump(2) << "\n";
    } else {
        for (const auto& r : results) {
            std::cout << (r.pass ? "PASS" : "FAIL") << "\t" << r.id << "\t" << r.measured << "\t"
                      << r.description << "\n";
            all_pass = all_pass && r.pass;
        }
    }
    return all_pass ? kExitOk : kExitFailure;
}

int cmd_catalog() {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, spec] : wgf::dist::standard_toy_suite()) j[name] = spec;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    wgf::tune_allocator();
    CLI::App app{"wgf-lab: Wasserstein-gradient-flow particle dynamics and one-step generators"};
    app.require_subcommand(1);

    std::string run_config;
    std::string run_out;
    std::optional<std::uint64_t> run_seed;
    auto* run = app.add_subcommand("run", "run an experiment from a config file or experiment name");
    run->add_option("config", run_config, "experiment name or JSON config path")->required();
    run->add_option("--seed", run_seed, "override the config seed");
    run->add_option("--out", run_out, "output directory (default out/<experiment>)");

    std::string check_suite;
    bool check_json = false;
    auto* check = app.add_subcommand("check", "run an acceptance suite");
    check->add_option("suite", check_suite, "one of: ot-core, velocity, flow, generator, all")
        ->required();
    check->add_flag("--json", check_json, "emit JSON instead of TSV lines");

    auto* catalog = app.add_subcommand("catalog", "print the toy distribution catalog");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (run->parsed()) return cmd_run(run_config, run_seed, run_out);
        if (check->parsed()) return cmd_check(check_suite, check_json);
        if (catalog->parsed()) return cmd_catalog();
    } catch (const wgf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const wgf::ContractViolation& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const wgf::DivergenceError& e) {
        std::cerr << "numerical divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}
