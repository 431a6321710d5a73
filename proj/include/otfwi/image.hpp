#pragma once

#include <filesystem>

#include "otfwi/field.hpp"

namespace otfwi {

/// Linear map of [lo, hi] to 0..255, rounded and clamped.
unsigned char quantize(double value, double lo, double hi);

/// 8-bit P5 PGM, width nx, height nz, surface row (iz = nz-1) on top.
void render_field(const Field2D& v, const std::filesystem::path& path, double lo, double hi);

}  // namespace otfwi
