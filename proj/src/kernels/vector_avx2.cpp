#include <immintrin.h>

#include <cstddef>

namespace otfwi::kernels {

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  alignas(32) double s[4];
  _mm256_store_pd(s, acc);
  double total = (s[0] + s[1]) + (s[2] + s[3]);
  for (; i < n; ++i) total = total + x[i] * y[i];
  return total;
}

}  // namespace otfwi::kernels
