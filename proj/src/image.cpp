#include "otfwi/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "otfwi/error.hpp"

namespace otfwi {

unsigned char quantize(double value, double lo, double hi) {
  const double s = (value - lo) / (hi - lo) * 255.0;
  return static_cast<unsigned char>(std::clamp(std::lround(s), 0L, 255L));
}

void render_field(const Field2D& v, const std::filesystem::path& path, double lo, double hi) {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw InvalidArgument("color range needs lo < hi");
  std::string bytes = "P5\n" + std::to_string(v.nx()) + " " + std::to_string(v.nz()) + "\n255\n";
  for (int row = 0; row < v.nz(); ++row)
    for (int ix = 0; ix < v.nx(); ++ix) bytes += static_cast<char>(quantize(v(ix, v.nz() - 1 - row), lo, hi));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace otfwi
