#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "wgf/io.hpp"

using namespace wgf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("format_double round-trips 17 significant digits") {
    const double value = 0.1 + 0.2;
    const std::string s = io::format_double(value);
    CHECK(std::stod(s) == value);
    CHECK(io::format_double(1.0) == "1");
    CHECK(io::format_double(0.05) == "0.050000000000000003");
}

TEST_CASE("samples csv carries header, coordinates, and labels") {
    Matrix pos(2, 2);
    pos << 1.0, 2.0, 3.0, 4.0;
    IntVector labels(2);
    labels << 7, 9;
    const ParticleBatch batch = ParticleBatch::uniform(pos, labels);

    const fs::path path = fs::temp_directory_path() / "wgf_samples_test.csv";
    io::write_samples_csv(path, batch);
    const std::string content = slurp(path);
    CHECK(content ==
          "index,x0,x1,label\n"
          "0,1,2,7\n"
          "1,3,4,9\n");
    fs::remove(path);
}

TEST_CASE("metrics csv has fixed columns") {
    const fs::path path = fs::temp_directory_path() / "wgf_metrics_test.csv";
    io::write_metrics_csv(path, {{"alpha", 1.5}, {"beta", -2.0}});
    CHECK(slurp(path) == "name,value\nalpha,1.5\nbeta,-2\n");
    fs::remove(path);
}

TEST_CASE("svg plots are deterministic byte for byte") {
    Matrix pts(3, 2);
    pts << 0.0, 0.0, 1.0, 1.0, 2.0, 0.5;

    const fs::path a = fs::temp_directory_path() / "wgf_plot_a.svg";
    const fs::path b = fs::temp_directory_path() / "wgf_plot_b.svg";
    for (const auto& path : {a, b}) {
        io::SvgPlot plot("test");
        plot.add_scatter(pts, "#1f77b4");
        plot.add_line({0.0, 1.0, 2.0}, {0.0, 0.5, 0.25}, "#d62728");
        plot.write(path);
    }
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a).find("<svg") == 0);
    fs::remove(a);
    fs::remove(b);
}
