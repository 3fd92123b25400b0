#pragma once

#include <functional>
#include <string>
#include <vector>

namespace pvae::svg {

struct ScatterPoint {
    double x, y;
    int group;  // colour index (e.g. tree depth)
};

struct Segment {
    double x1, y1, x2, y2;
};

// Standalone SVG scatter: points coloured by group, straight-chord segments,
// and the ball boundary circle when boundary_radius > 0 (world units).
void write_scatter(const std::string& path, const std::vector<ScatterPoint>& points,
                   const std::vector<Segment>& segments, double boundary_radius);

// Density heatmap of a dM-density over the 2-D ball (curvature c > 0) or a
// square of half-width `extent` (c = 0). Returns the total probability mass
// of the grid, sum of pdf * metric area element per cell.
double write_heatmap(const std::string& path,
                     const std::function<double(double, double)>& pdf, double c,
                     double extent, int grid_n);

}  // namespace pvae::svg
