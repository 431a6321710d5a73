#include "otfwi/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "otfwi/error.hpp"

namespace otfwi {

Grid::Grid(int nx_, int nz_, double dx_, double dz_) : nx(nx_), nz(nz_), dx(dx_), dz(dz_) {
  if (nx < 3 || nz < 3) throw InvalidArgument("grid needs at least 3x3 nodes");
  if (!(dx > 0.0) || !(dz > 0.0)) throw InvalidArgument("grid spacing must be positive");
}

VelocityField::VelocityField(Grid g, Field2D v) : grid(g), values(std::move(v)) {
  if (values.nx() != grid.nx || values.nz() != grid.nz) throw InvalidArgument("velocity shape does not match grid");
}

VelocityField::VelocityField(Grid g, double fill) : grid(g), values(g.nx, g.nz, fill) {}

void VelocityField::require_physical() const {
  for (double x : values.values())
    if (!(x > 0.0) || !std::isfinite(x)) throw InvalidArgument("velocity must be finite and positive");
}

void AcquisitionGeometry::validate(const Grid& g) const {
  auto in_grid = [&](const Node& n) { return n.ix >= 0 && n.ix < g.nx && n.iz >= 0 && n.iz < g.nz; };
  if (nt < 1) throw InvalidArgument("nt must be >= 1");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (receivers.empty()) throw InvalidArgument("receiver list is empty");
  if (sources.empty()) throw InvalidArgument("source list is empty");
  for (const auto& n : sources)
    if (!in_grid(n)) throw InvalidArgument("source node outside grid");
  for (const auto& n : receivers)
    if (!in_grid(n)) throw InvalidArgument("receiver node outside grid");
}

SourceWavelet ricker_wavelet(double fp, double t0, int nt, double dt) {
  if (!(fp > 0.0)) throw InvalidArgument("ricker: fp must be positive");
  if (!(dt > 0.0)) throw InvalidArgument("ricker: dt must be positive");
  if (nt < 1) throw InvalidArgument("ricker: nt must be >= 1");
  SourceWavelet w{fp, t0, std::vector<double>(static_cast<std::size_t>(nt))};
  const double a = std::numbers::pi * std::numbers::pi * fp * fp;
  for (int k = 0; k < nt; ++k) {
    const double t = k * dt - t0;
    w.samples[k] = (1.0 - 2.0 * a * t * t) * std::exp(-a * t * t);
  }
  return w;
}

AcquisitionGeometry surface_acquisition(const Grid& grid, int n_sources, int source_stride, int depth_offset, int nt,
                                        double dt) {
  if (n_sources < 1) throw InvalidArgument("need at least one source");
  if (n_sources > 1 && source_stride < 1) throw InvalidArgument("source stride must be >= 1");
  if (n_sources > 1 && static_cast<long>(source_stride) * (n_sources - 1) >= grid.nx)
    throw InvalidArgument("sources do not fit: stride*(n_sources-1) >= nx");
  if (depth_offset < 0 || depth_offset >= grid.nz) throw InvalidArgument("depth offset outside grid");
  AcquisitionGeometry geo;
  const int iz = grid.nz - 1 - depth_offset;
  for (int s = 0; s < n_sources; ++s) geo.sources.push_back({n_sources > 1 ? s * source_stride : 0, iz});
  for (int ix = 0; ix + 1 < grid.nx; ++ix) geo.receivers.push_back({ix, iz});
  geo.nt = nt;
  geo.dt = dt;
  geo.validate(grid);
  return geo;
}

}  // namespace otfwi
