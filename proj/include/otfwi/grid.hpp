#pragma once

#include <vector>

#include "otfwi/field.hpp"

namespace otfwi {

/// Tensor-product grid. iz = nz-1 is the free surface.
struct Grid {
  int nx = 0;
  int nz = 0;
  double dx = 0.0;
  double dz = 0.0;

  Grid() = default;
  Grid(int nx, int nz, double dx, double dz);
  friend bool operator==(const Grid&, const Grid&) = default;
};

struct VelocityField {
  Grid grid;
  Field2D values;

  VelocityField() = default;
  VelocityField(Grid g, Field2D v);
  VelocityField(Grid g, double fill);

  /// Throws unless every value is finite and strictly positive.
  void require_physical() const;
};

struct Node {
  int ix = 0;
  int iz = 0;
  friend bool operator==(const Node&, const Node&) = default;
};

struct AcquisitionGeometry {
  std::vector<Node> sources;
  std::vector<Node> receivers;
  int nt = 0;
  double dt = 0.0;

  int n_sources() const noexcept { return static_cast<int>(sources.size()); }
  int n_receivers() const noexcept { return static_cast<int>(receivers.size()); }
  void validate(const Grid& g) const;
};

struct SourceWavelet {
  double fp = 0.0;
  double t0 = 0.0;
  std::vector<double> samples;
};

SourceWavelet ricker_wavelet(double fp, double t0, int nt, double dt);

/// Sources at ix = 0, stride, 2*stride, ... and receivers at ix = 0..nx-2,
/// all on row iz = nz-1-depth_offset.
AcquisitionGeometry surface_acquisition(const Grid& grid, int n_sources, int source_stride, int depth_offset, int nt,
                                        double dt);

}  // namespace otfwi
