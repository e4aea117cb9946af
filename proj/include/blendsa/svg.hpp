#ifndef BLENDSA_SVG_HPP
#define BLENDSA_SVG_HPP

#include <string>

#include "blendsa/sweep.hpp"

namespace blendsa {

// Deterministic heat map of one coefficient over a two-axis sweep: x is
// the second axis, y the first (both ascending, y upward), blue-white-red
// ramp across the observed range, grey cells for failures with the error
// in a tooltip, a black outline on the all-zero reference cell, and a
// gradient legend. Same input, same bytes.
std::string render_heatmap_svg(const SweepResult& sweep,
                               const std::string& coefficient);

}  // namespace blendsa

#endif
