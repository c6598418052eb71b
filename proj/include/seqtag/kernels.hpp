#pragma once

#include <cstddef>
#include <string>

// Double-precision arithmetic kernels behind the encoder, heads and optimizer.
// Every kernel exists twice: a scalar reference implementation and an AVX2
// variant. The active table is selected once at startup from the host CPU
// (override with SEQTAG_KERNELS=scalar|avx2 or set_backend()).

namespace seqtag::kernels {

struct Ops {
  const char* name;

  // sum_i x[i]*y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);

  // y[i] += a*x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  // x[i] *= a
  void (*scal)(double a, double* x, std::size_t n);

  // C += A*B        A: m x k, B: k x n, C: m x n, all row-major
  void (*matmul_nn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);

  // C += A*B^T      A: m x k, B: n x k, C: m x n
  void (*matmul_nt)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);

  // C += A^T*B      A: k x m, B: k x n, C: m x n
  void (*matmul_tn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);

  // One Adam update. inv_bc1 = 1/(1-beta1^t), inv_bc2 = 1/(1-beta2^t).
  //   m = beta1*m + (1-beta1)*g
  //   v = beta2*v + (1-beta2)*g*g
  //   p -= lr * (m*inv_bc1) / (sqrt(v*inv_bc2) + eps)
  void (*adam_step)(double* p, const double* g, double* m, double* v,
                    std::size_t n, double lr, double beta1, double beta2,
                    double eps, double inv_bc1, double inv_bc2);
};

enum class Backend { kAuto, kScalar, kAvx2 };

bool avx2_supported();

const Ops& scalar_ops();
const Ops& avx2_ops();  // only valid to call through if avx2_supported()

// Table selected by set_backend()/environment; defaults to the best
// supported backend.
const Ops& active_ops();
void set_backend(Backend b);  // throws std::runtime_error if unsupported
Backend active_backend();
std::string backend_name();

}  // namespace seqtag::kernels
