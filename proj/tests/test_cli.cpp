// Process-level tests of the wgf-lab binary: exit codes, config validation,
// determinism of emitted CSVs, and config-echo round-trips.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

int run_command(const std::string& args) {
    const std::string command = std::string(WGF_LAB_BINARY) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

// Reduced-size config keeps process-level runs quick.
fs::path write_small_config(const std::string& name) {
    const fs::path path = fs::temp_directory_path() / (name + ".json");
    nlohmann::json cfg;
    cfg["experiment"] = "gaussian-tails";
    cfg["seed"] = 7;
    cfg["train"]["steps"] = 60;
    cfg["train"]["batch_n"] = 64;
    cfg["train"]["batch_m"] = 64;
    cfg["train"]["hidden"] = {32, 32};
    cfg["eval_samples"] = 256;
    std::ofstream out(path);
    out << cfg.dump(2);
    return path;
}

}  // namespace

TEST_CASE("catalog prints the five toy entries") {
    CHECK(run_command("catalog") == 0);
}

TEST_CASE("unknown experiments and suites are validation failures") {
    CHECK(run_command("run no-such-experiment") == 2);
    CHECK(run_command("check no-such-suite") == 2);
}

TEST_CASE("invalid config values name the field and exit 2") {
    const fs::path path = fs::temp_directory_path() / "wgf_bad_config.json";
    {
        std::ofstream out(path);
        out << R"({"experiment": "gaussian-tails", "train": {"step_size": -1.0}})";
    }
    const std::string command = std::string(WGF_LAB_BINARY) + " run " + path.string() +
                                " --out " + fresh_dir("wgf-bad-run").string() +
                                " 2> " + (fs::temp_directory_path() / "wgf_bad_err.txt").string();
    const int status = std::system(command.c_str());
    CHECK(WEXITSTATUS(status) == 2);
    const std::string err = slurp(fs::temp_directory_path() / "wgf_bad_err.txt");
    CHECK(err.find("step_size") != std::string::npos);
    fs::remove(path);
}

TEST_CASE("fixed-seed runs are byte-identical and the echoed config reproduces them") {
    const fs::path config = write_small_config("wgf_small_tails");
    const fs::path dir_a = fresh_dir("wgf-det-a");
    const fs::path dir_b = fresh_dir("wgf-det-b");

    REQUIRE(run_command("run " + config.string() + " --out " + dir_a.string()) == 0);
    REQUIRE(run_command("run " + config.string() + " --out " + dir_b.string()) == 0);

    int csv_count = 0;
    for (const auto& entry : fs::directory_iterator(dir_a)) {
        if (entry.path().extension() != ".csv") continue;
        ++csv_count;
        CHECK(slurp(entry.path()) == slurp(dir_b / entry.path().filename()));
    }
    CHECK(csv_count >= 3);

    // Round-trip: rerunning from the echoed config reproduces the artifacts.
    const fs::path dir_c = fresh_dir("wgf-det-c");
    REQUIRE(run_command("run " + (dir_a / "config.json").string() + " --out " + dir_c.string()) == 0);
    for (const auto& entry : fs::directory_iterator(dir_a)) {
        if (entry.path().extension() != ".csv") continue;
        CHECK(slurp(entry.path()) == slurp(dir_c / entry.path().filename()));
    }

    fs::remove(config);
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    fs::remove_all(dir_c);
}

TEST_CASE("ablation-velocity emits the four-variant metrics table") {
    const fs::path dir = fresh_dir("wgf-ablation");
    const fs::path config = fs::temp_directory_path() / "wgf_small_ablation.json";
    {
        nlohmann::json cfg;
        cfg["experiment"] = "ablation-velocity";
        cfg["seed"] = 3;
        cfg["flow"]["n"] = 64;
        cfg["flow"]["steps"] = 20;
        cfg["flow"]["iterations"] = 50;
        std::ofstream out(config);
        out << cfg.dump(2);
    }
    REQUIRE(run_command("run " + config.string() + " --out " + dir.string()) == 0);
    const std::string metrics = slurp(dir / "metrics.csv");
    CHECK(metrics.find("w2/cost=euclidean,self=two_batch") != std::string::npos);
    CHECK(metrics.find("w2/cost=half_squared,self=one_batch_masked") != std::string::npos);
    CHECK(fs::exists(dir / "trajectory.csv"));
    fs::remove(config);
    fs::remove_all(dir);
}

TEST_CASE("environment seed override applies") {
    const fs::path config = write_small_config("wgf_env_seed");
    const fs::path dir = fresh_dir("wgf-env-seed");
    const std::string command = "WGF_LAB_SEED=99 " + std::string(WGF_LAB_BINARY) + " run " +
                                config.string() + " --out " + dir.string() + " > /dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(command.c_str())) == 0);
    nlohmann::json echoed;
    std::ifstream in(dir / "config.json");
    in >> echoed;
    CHECK(echoed.at("seed").get<int>() == 99);
    fs::remove(config);
    fs::remove_all(dir);
}
