#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wgf/flow.hpp"
#include "wgf/metrics.hpp"
#include "wgf/types.hpp"

namespace wgf::io {

/// Shortest exact decimal with 17 significant digits; all CSV floats go
/// through this so reruns are byte-identical.
std::string format_double(double value);

/// trajectory.csv: step,time,particle_index,x0..x{d-1},energy
void write_trajectory_csv(const std::filesystem::path& path, const flow::FlowTrajectory& trajectory);

/// samples.csv: index,x0..x{d-1},label (label empty when absent)
void write_samples_csv(const std::filesystem::path& path, const ParticleBatch& batch);

/// metrics.csv: name,value
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, double>>& rows);

/// landscape.csv: x,y,energy
void write_landscape_csv(const std::filesystem::path& path, const metrics::LandscapeSlice& slice);

/// Generic writer: fixed header, rows of preformatted cells.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Minimal deterministic SVG scatter/line plot. Diagnostics only; acceptance
/// reads CSVs.
class SvgPlot {
public:
    SvgPlot(std::string title, int width = 640, int height = 480);

    void add_scatter(const Matrix& points, const std::string& color, double radius = 2.0,
                     const std::string& label = {});
    void add_line(const std::vector<double>& xs, const std::vector<double>& ys,
                  const std::string& color, const std::string& label = {});

    void write(const std::filesystem::path& path) const;

private:
    struct Scatter {
        Matrix points;
        std::string color;
        double radius;
        std::string label;
    };
    struct Line {
        std::vector<double> xs, ys;
        std::string color;
        std::string label;
    };

    std::string title_;
    int width_, height_;
    std::vector<Scatter> scatters_;
    std::vector<Line> lines_;
};

}  // namespace wgf::io
