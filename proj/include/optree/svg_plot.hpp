#pragma once

#include <string>

#include "optree/fee.hpp"
#include "optree/pcdensity.hpp"

namespace optree {

// Partition plot for 2-D trees: one stroked rectangle per leaf, optional
// grayscale fill by log density. Output is deterministic byte for byte.
std::string partition_svg(const HmapTree& tree, bool fill = false, int size_px = 512);

// Density curve for 1-D models: staircase for trees, piecewise-linear
// polyline for FEE densities (unit-cube coordinates).
std::string density_curve_svg(const HmapTree& tree, int width_px = 640, int height_px = 400);
std::string density_curve_svg(const FeeDensity& density, int width_px = 640,
                              int height_px = 400);

}  // namespace optree
