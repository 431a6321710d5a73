#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace otfwi {

/// Dense 2D real array indexed (ix, iz); iz is the contiguous axis.
/// Used for velocity values, diffusion states and gradients alike.
class Field2D {
 public:
  Field2D() = default;
  Field2D(int nx, int nz, double fill = 0.0);
  Field2D(int nx, int nz, std::vector<double> values);

  int nx() const noexcept { return nx_; }
  int nz() const noexcept { return nz_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool same_shape(const Field2D& o) const noexcept { return nx_ == o.nx_ && nz_ == o.nz_; }

  double& operator()(int ix, int iz) { return data_[static_cast<std::size_t>(ix) * nz_ + iz]; }
  double operator()(int ix, int iz) const { return data_[static_cast<std::size_t>(ix) * nz_ + iz]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double>& raw() noexcept { return data_; }
  const std::vector<double>& raw() const noexcept { return data_; }

  Field2D& operator+=(const Field2D& o);
  Field2D& operator-=(const Field2D& o);
  Field2D& operator*=(double a);

  double min() const;
  double max() const;
  double max_abs() const;
  double sum() const;

  friend bool operator==(const Field2D&, const Field2D&) = default;

 private:
  int nx_ = 0;
  int nz_ = 0;
  std::vector<double> data_;
};

Field2D operator+(Field2D a, const Field2D& b);
Field2D operator-(Field2D a, const Field2D& b);
Field2D operator*(double s, Field2D a);

double dot(const Field2D& a, const Field2D& b);
double norm2(const Field2D& a);
/// y += a * x
void axpy(double a, const Field2D& x, Field2D& y);

/// Array of shape [n0 × n1 × n2], last axis contiguous.
class Array3D {
 public:
  Array3D() = default;
  Array3D(int n0, int n1, int n2, double fill = 0.0);

  int n0() const noexcept { return n0_; }
  int n1() const noexcept { return n1_; }
  int n2() const noexcept { return n2_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool same_shape(const Array3D& o) const noexcept {
    return n0_ == o.n0_ && n1_ == o.n1_ && n2_ == o.n2_;
  }

  double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(int i, int j) { return {data_.data() + index(i, j, 0), static_cast<std::size_t>(n2_)}; }
  std::span<const double> row(int i, int j) const {
    return {data_.data() + index(i, j, 0), static_cast<std::size_t>(n2_)};
  }
  std::vector<double>& raw() noexcept { return data_; }
  const std::vector<double>& raw() const noexcept { return data_; }

  friend bool operator==(const Array3D&, const Array3D&) = default;

 private:
  std::size_t index(int i, int j, int k) const noexcept {
    return (static_cast<std::size_t>(i) * n1_ + j) * n2_ + k;
  }
  int n0_ = 0, n1_ = 0, n2_ = 0;
  std::vector<double> data_;
};

}  // namespace otfwi
