#include "wgf/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace wgf::io {

namespace {

std::ofstream open_or_throw(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("io: cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out = open_or_throw(path);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
}

void write_trajectory_csv(const std::filesystem::path& path, const flow::FlowTrajectory& trajectory) {
    const Eigen::Index d = trajectory.steps.empty() ? 0 : trajectory.steps.front().particles.dim();
    std::vector<std::string> header = {"step", "time", "particle_index"};
    for (Eigen::Index c = 0; c < d; ++c) header.push_back("x" + std::to_string(c));
    header.push_back("energy");

    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < trajectory.steps.size(); ++k) {
        const auto& step = trajectory.steps[k];
        for (Eigen::Index i = 0; i < step.particles.size(); ++i) {
            std::vector<std::string> row;
            row.push_back(std::to_string(k));
            row.push_back(format_double(step.time));
            row.push_back(std::to_string(i));
            for (Eigen::Index c = 0; c < d; ++c) row.push_back(format_double(step.particles.positions(i, c)));
            row.push_back(format_double(step.energy));
            rows.push_back(std::move(row));
        }
    }
    write_csv(path, header, rows);
}

void write_samples_csv(const std::filesystem::path& path, const ParticleBatch& batch) {
    std::vector<std::string> header = {"index"};
    for (Eigen::Index c = 0; c < batch.dim(); ++c) header.push_back("x" + std::to_string(c));
    header.push_back("label");

    std::vector<std::vector<std::string>> rows;
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        std::vector<std::string> row;
        row.push_back(std::to_string(i));
        for (Eigen::Index c = 0; c < batch.dim(); ++c) row.push_back(format_double(batch.positions(i, c)));
        row.push_back(batch.labels ? std::to_string((*batch.labels)(i)) : std::string{});
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, double>>& entries) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [name, value] : entries) rows.push_back({name, format_double(value)});
    write_csv(path, {"name", "value"}, rows);
}

void write_landscape_csv(const std::filesystem::path& path, const metrics::LandscapeSlice& slice) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t j = 0; j < slice.ys.size(); ++j)
        for (std::size_t i = 0; i < slice.xs.size(); ++i)
            rows.push_back({format_double(slice.xs[i]), format_double(slice.ys[j]),
                            format_double(slice.energy(static_cast<Eigen::Index>(j),
                                                       static_cast<Eigen::Index>(i)))});
    write_csv(path, {"x", "y", "energy"}, rows);
}

SvgPlot::SvgPlot(std::string title, int width, int height)
    : title_(std::move(title)), width_(width), height_(height) {}

void SvgPlot::add_scatter(const Matrix& points, const std::string& color, double radius,
                          const std::string& label) {
    scatters_.push_back({points, color, radius, label});
}

void SvgPlot::add_line(const std::vector<double>& xs, const std::vector<double>& ys,
                       const std::string& color, const std::string& label) {
    if (xs.size() != ys.size()) throw ContractViolation("SvgPlot: line xs/ys length mismatch");
    lines_.push_back({xs, ys, color, label});
}

void SvgPlot::write(const std::filesystem::path& path) const {
    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    auto grow = [&](double x, double y) {
        x_min = std::min(x_min, x);
        x_max = std::max(x_max, x);
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
    };
    for (const auto& s : scatters_)
        for (Eigen::Index i = 0; i < s.points.rows(); ++i) grow(s.points(i, 0), s.points(i, 1));
    for (const auto& l : lines_)
        for (std::size_t i = 0; i < l.xs.size(); ++i) grow(l.xs[i], l.ys[i]);
    if (!(x_min < x_max)) {
        x_min -= 1.0;
        x_max += 1.0;
    }
    if (!(y_min < y_max)) {
        y_min -= 1.0;
        y_max += 1.0;
    }
    const double margin = 40.0;
    const double sx = (width_ - 2.0 * margin) / (x_max - x_min);
    const double sy = (height_ - 2.0 * margin) / (y_max - y_min);
    auto px = [&](double x) { return margin + (x - x_min) * sx; };
    auto py = [&](double y) { return height_ - margin - (y - y_min) * sy; };

    std::ofstream out = open_or_throw(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_
        << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width_ / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title_
        << "</text>\n";
    // axes
    out << "<line x1=\"" << margin << "\" y1=\"" << height_ - margin << "\" x2=\"" << width_ - margin
        << "\" y2=\"" << height_ - margin << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
        << height_ - margin << "\" stroke=\"black\"/>\n";

    for (const auto& l : lines_) {
        out << "<polyline fill=\"none\" stroke=\"" << l.color << "\" points=\"";
        for (std::size_t i = 0; i < l.xs.size(); ++i)
            out << px(l.xs[i]) << ',' << py(l.ys[i]) << (i + 1 < l.xs.size() ? " " : "");
        out << "\"/>\n";
    }
    for (const auto& s : scatters_)
        for (Eigen::Index i = 0; i < s.points.rows(); ++i)
            out << "<circle cx=\"" << px(s.points(i, 0)) << "\" cy=\"" << py(s.points(i, 1)) << "\" r=\""
                << s.radius << "\" fill=\"" << s.color << "\" fill-opacity=\"0.6\"/>\n";

    int legend_row = 0;
    auto legend_entry = [&](const std::string& color, const std::string& label) {
        if (label.empty()) return;
        const double y = margin + 14.0 * legend_row++;
        out << "<rect x=\"" << width_ - margin - 110 << "\" y=\"" << y - 8
            << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
        out << "<text x=\"" << width_ - margin - 96 << "\" y=\"" << y << "\" font-size=\"11\">" << label
            << "</text>\n";
    };
    for (const auto& l : lines_) legend_entry(l.color, l.label);
    for (const auto& s : scatters_) legend_entry(s.color, s.label);
    out << "</svg>\n";
}

}  // namespace wgf::io
