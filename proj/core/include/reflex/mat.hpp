#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace reflex {

// Minimal row-major dense matrix. Heavy linear algebra happens behind the
// library boundary; this type keeps the public headers stdlib-only.
struct Mat {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(size_t r, size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(size_t r, size_t c) { return a[r * cols + c]; }
  double operator()(size_t r, size_t c) const { return a[r * cols + c]; }

  double* row(size_t r) { return a.data() + r * cols; }
  const double* row(size_t r) const { return a.data() + r * cols; }
};

inline Mat identity(size_t d) {
  Mat m(d, d);
  for (size_t i = 0; i < d; ++i) m(i, i) = 1.0;
  return m;
}

inline void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace reflex
