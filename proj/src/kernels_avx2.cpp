#include "seqtag/kernels.hpp"

// AVX2+FMA variants, 4 doubles per lane group. Tails fall back to scalar
// loops. This translation unit is compiled with -mavx2 -mfma; callers must
// route through active_ops() so the instructions never execute on hosts
// without AVX2.

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cmath>

namespace seqtag::kernels {
namespace {

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scal_avx2(double a, double* x, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= a;
}

// C row accumulation with a broadcast A element, shared by nn/tn.
inline void fmadd_row(double av, const double* brow, double* crow,
                      std::size_t n) {
  const __m256d avv = _mm256_set1_pd(av);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d cv = _mm256_loadu_pd(crow + j);
    cv = _mm256_fmadd_pd(avv, _mm256_loadu_pd(brow + j), cv);
    _mm256_storeu_pd(crow + j, cv);
  }
  for (; j < n; ++j) crow[j] += av * brow[j];
}

void matmul_nn_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      fmadd_row(arow[l], b + l * n, crow, n);
    }
  }
}

void matmul_nt_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      crow[j] += dot_avx2(arow, b + j * k, k);
    }
  }
}

void matmul_tn_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t l = 0; l < k; ++l) {
    const double* arow = a + l * m;
    const double* brow = b + l * n;
    for (std::size_t i = 0; i < m; ++i) {
      fmadd_row(arow[i], brow, c + i * n, n);
    }
  }
}

void adam_step_avx2(double* p, const double* g, double* m, double* v,
                    std::size_t n, double lr, double beta1, double beta2,
                    double eps, double inv_bc1, double inv_bc2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b1c = _mm256_set1_pd(1.0 - beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d b2c = _mm256_set1_pd(1.0 - beta2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d bc1 = _mm256_set1_pd(inv_bc1);
  const __m256d bc2 = _mm256_set1_pd(inv_bc2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_fmadd_pd(b1, mv, _mm256_mul_pd(b1c, gv));
    vv = _mm256_fmadd_pd(b2, vv, _mm256_mul_pd(b2c, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(mv, bc1);
    const __m256d denom =
        _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vv, bc2)), epsv);
    __m256d pv = _mm256_loadu_pd(p + i);
    pv = _mm256_sub_pd(pv, _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom));
    _mm256_storeu_pd(p + i, pv);
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] * inv_bc1) / (std::sqrt(v[i] * inv_bc2) + eps);
  }
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops = {
      "avx2",         dot_avx2,       axpy_avx2,      scal_avx2,
      matmul_nn_avx2, matmul_nt_avx2, matmul_tn_avx2, adam_step_avx2,
  };
  return ops;
}

}  // namespace seqtag::kernels

#else  // non-x86: no AVX2 table, dispatch keeps the scalar one

namespace seqtag::kernels {

const Ops& avx2_ops() { return scalar_ops(); }

}  // namespace seqtag::kernels

#endif
