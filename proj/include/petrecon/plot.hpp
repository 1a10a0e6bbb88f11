#pragma once

#include <string>
#include <vector>

#include "petrecon/metrics.hpp"

namespace petrecon::plot {

/// CR (y) against background STD (x) as an SVG line chart, one polyline with
/// markers per method and a legend.
std::string cr_std_svg(const std::vector<eval::Curve>& curves, const std::string& title = "CR vs. background STD");

}  // namespace petrecon::plot
