#include <cstddef>

namespace otfwi::kernels {

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

// Four interleaved partial sums, combined as (s0+s1)+(s2+s3), matching the
// lane layout of the vector variant.
double dot_scalar(std::size_t n, const double* x, const double* y) {
  double s[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int l = 0; l < 4; ++l) s[l] = s[l] + x[i + l] * y[i + l];
  double total = (s[0] + s[1]) + (s[2] + s[3]);
  for (; i < n; ++i) total = total + x[i] * y[i];
  return total;
}

}  // namespace otfwi::kernels
