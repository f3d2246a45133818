#pragma once

#include <string>

#include "sgs/image.hpp"
#include "sgs/losses.hpp"

namespace sgs {

// [0,1] -> 8-bit PNG, round half up; 3-channel RGB or 1-channel gray.
void export_image(const Image& image, const std::string& path);

// Grayscale PNG normalized by the map maximum; the raw maximum goes to
// the sidecar "<path>.max.txt".
void export_uncertainty(const Image& map, const std::string& path);

// CSV with header "fraction,retained_error", one row per curve point,
// 9 significant digits.
void export_curve(const SparsificationCurve& curve, const std::string& path);

SparsificationCurve read_curve_csv(const std::string& path);

// 8-bit PNG -> [0,1] image (v = byte / 255).
Image import_image(const std::string& path);

}  // namespace sgs
