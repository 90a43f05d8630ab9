#pragma once

// Test-side reference implementations, kept independent of the library's
// computation paths on purpose.

#include <cmath>
#include <vector>

#include "treepool/tensor.hpp"

namespace testutil {

using treepool::Tensor;

// naive triple loop, no blocking, no skipping
inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations. Plenty for
// PSD checks on test-sized Gram matrices.
inline std::vector<double> symmetric_eigenvalues(Tensor m, int sweeps = 64) {
  std::size_t n = m.rows();
  for (int s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += m.at(i, j) * m.at(i, j);
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = m.at(p, q);
        if (std::fabs(apq) < 1e-18) continue;
        double app = m.at(p, p), aqq = m.at(q, q);
        double theta = 0.5 * std::atan2(2.0 * apq, aqq - app);
        double c = std::cos(theta), t = std::sin(theta);
        for (std::size_t k = 0; k < n; ++k) {
          double mkp = m.at(k, p), mkq = m.at(k, q);
          m.at(k, p) = c * mkp - t * mkq;
          m.at(k, q) = t * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double mpk = m.at(p, k), mqk = m.at(q, k);
          m.at(p, k) = c * mpk - t * mqk;
          m.at(q, k) = t * mpk + c * mqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = m.at(i, i);
  return ev;
}

inline Tensor random_tensor(treepool::Rng& rng, std::size_t r, std::size_t c, double lo = -2.0,
                            double hi = 2.0) {
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace testutil
