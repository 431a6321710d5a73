#include "otfwi/field.hpp"

#include <algorithm>
#include <cmath>

#include "otfwi/error.hpp"
#include "otfwi/kernels/vector.hpp"

namespace otfwi {

Field2D::Field2D(int nx, int nz, double fill) : nx_(nx), nz_(nz) {
  if (nx < 0 || nz < 0) throw InvalidArgument("Field2D: negative dimensions");
  data_.assign(static_cast<std::size_t>(nx) * nz, fill);
}

Field2D::Field2D(int nx, int nz, std::vector<double> values) : nx_(nx), nz_(nz), data_(std::move(values)) {
  if (nx < 0 || nz < 0 || data_.size() != static_cast<std::size_t>(nx) * nz)
    throw InvalidArgument("Field2D: value count does not match shape");
}

static void require_same(const Field2D& a, const Field2D& b) {
  if (!a.same_shape(b)) throw InvalidArgument("Field2D: shape mismatch");
}

Field2D& Field2D::operator+=(const Field2D& o) {
  require_same(*this, o);
  kernels::active().axpy(data_.size(), 1.0, o.data_.data(), data_.data());
  return *this;
}

Field2D& Field2D::operator-=(const Field2D& o) {
  require_same(*this, o);
  kernels::active().axpy(data_.size(), -1.0, o.data_.data(), data_.data());
  return *this;
}

Field2D& Field2D::operator*=(double a) {
  for (auto& v : data_) v *= a;
  return *this;
}

double Field2D::min() const { return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end()); }
double Field2D::max() const { return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end()); }

double Field2D::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Field2D::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

Field2D operator+(Field2D a, const Field2D& b) { return a += b; }
Field2D operator-(Field2D a, const Field2D& b) { return a -= b; }
Field2D operator*(double s, Field2D a) { return a *= s; }

double dot(const Field2D& a, const Field2D& b) {
  require_same(a, b);
  return kernels::active().dot(a.size(), a.raw().data(), b.raw().data());
}

double norm2(const Field2D& a) { return std::sqrt(dot(a, a)); }

void axpy(double a, const Field2D& x, Field2D& y) {
  require_same(x, y);
  kernels::active().axpy(x.size(), a, x.raw().data(), y.raw().data());
}

Array3D::Array3D(int n0, int n1, int n2, double fill) : n0_(n0), n1_(n1), n2_(n2) {
  if (n0 < 0 || n1 < 0 || n2 < 0) throw InvalidArgument("Array3D: negative dimensions");
  data_.assign(static_cast<std::size_t>(n0) * n1 * n2, fill);
}

}  // namespace otfwi
