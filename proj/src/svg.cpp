#include "pvae/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pvae::svg {
namespace {

constexpr double kView = 800.0;
constexpr double kMargin = 20.0;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string heat_color(double t) {
    // dark blue -> teal -> yellow
    t = std::clamp(t, 0.0, 1.0);
    const double stops[3][3] = {{68, 1, 84}, {33, 145, 140}, {253, 231, 37}};
    const double pos = t * 2.0;
    const int lo = std::min(1, static_cast<int>(pos));
    const double w = pos - lo;
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                  static_cast<int>(stops[lo][0] + w * (stops[lo + 1][0] - stops[lo][0])),
                  static_cast<int>(stops[lo][1] + w * (stops[lo + 1][1] - stops[lo][1])),
                  static_cast<int>(stops[lo][2] + w * (stops[lo + 1][2] - stops[lo][2])));
    return buf;
}

struct Mapper {
    double scale, cx, cy;
    double x(double wx) const { return cx + wx * scale; }
    double y(double wy) const { return cy - wy * scale; }
};

void save_document(const std::string& path, const std::string& body) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kView
      << "\" height=\"" << kView << "\" viewBox=\"0 0 " << kView << " " << kView
      << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << kView << "\" height=\"" << kView
      << "\" fill=\"white\"/>\n"
      << body << "</svg>\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void write_scatter(const std::string& path, const std::vector<ScatterPoint>& points,
                   const std::vector<Segment>& segments, double boundary_radius) {
    double extent = boundary_radius;
    if (extent <= 0.0) {
        for (const auto& p : points)
            extent = std::max({extent, std::abs(p.x), std::abs(p.y)});
        for (const auto& s : segments)
            extent = std::max({extent, std::abs(s.x1), std::abs(s.y1), std::abs(s.x2),
                               std::abs(s.y2)});
        if (extent <= 0.0) extent = 1.0;
        extent *= 1.05;
    }
    const Mapper m{(kView / 2.0 - kMargin) / extent, kView / 2.0, kView / 2.0};
    std::ostringstream body;
    if (boundary_radius > 0.0) {
        body << "<circle cx=\"" << m.cx << "\" cy=\"" << m.cy << "\" r=\""
             << boundary_radius * m.scale
             << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    }
    for (const auto& s : segments) {
        body << "<line x1=\"" << m.x(s.x1) << "\" y1=\"" << m.y(s.y1) << "\" x2=\""
             << m.x(s.x2) << "\" y2=\"" << m.y(s.y2)
             << "\" stroke=\"#6699cc\" stroke-width=\"0.6\"/>\n";
    }
    for (const auto& p : points) {
        const char* color = kPalette[((p.group % 10) + 10) % 10];
        body << "<circle cx=\"" << m.x(p.x) << "\" cy=\"" << m.y(p.y)
             << "\" r=\"2.4\" fill=\"" << color << "\" fill-opacity=\"0.8\"/>\n";
    }
    save_document(path, body.str());
}

double write_heatmap(const std::string& path,
                     const std::function<double(double, double)>& pdf, double c,
                     double extent, int grid_n) {
    if (grid_n < 2) throw std::invalid_argument("write_heatmap: grid too small");
    const double radius = c > 0.0 ? (1.0 / std::sqrt(c)) * (1.0 - 1e-3) : extent;
    const double cell = 2.0 * radius / grid_n;
    std::vector<double> vals(static_cast<std::size_t>(grid_n) * grid_n, 0.0);
    double mass = 0.0, vmax = 0.0;
    for (int i = 0; i < grid_n; ++i) {
        for (int j = 0; j < grid_n; ++j) {
            const double x = -radius + (i + 0.5) * cell;
            const double y = -radius + (j + 0.5) * cell;
            if (c > 0.0 && c * (x * x + y * y) >= (1.0 - 1e-3)) continue;
            const double p = pdf(x, y);
            // metric area element: lambda^2 dx dy (2-D ball), dx dy at c = 0
            const double lam = c > 0.0 ? 2.0 / (1.0 - c * (x * x + y * y)) : 1.0;
            const double dm = c > 0.0 ? lam * lam : 1.0;
            mass += p * dm * cell * cell;
            vals[static_cast<std::size_t>(i) * grid_n + j] = p;
            vmax = std::max(vmax, p);
        }
    }
    const Mapper m{(kView / 2.0 - kMargin) / radius, kView / 2.0, kView / 2.0};
    std::ostringstream body;
    const double px = cell * m.scale;
    for (int i = 0; i < grid_n; ++i) {
        for (int j = 0; j < grid_n; ++j) {
            const double v = vals[static_cast<std::size_t>(i) * grid_n + j];
            if (v <= 0.0) continue;
            const double x = -radius + i * cell;
            const double y = -radius + (j + 1) * cell;
            body << "<rect x=\"" << m.x(x) << "\" y=\"" << m.y(y) << "\" width=\""
                 << px + 0.5 << "\" height=\"" << px + 0.5 << "\" fill=\""
                 << heat_color(vmax > 0.0 ? v / vmax : 0.0) << "\"/>\n";
        }
    }
    if (c > 0.0) {
        body << "<circle cx=\"" << m.cx << "\" cy=\"" << m.cy << "\" r=\""
             << (1.0 / std::sqrt(c)) * m.scale
             << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    }
    save_document(path, body.str());
    return mass;
}

}  // namespace pvae::svg
