#include "seqtag/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace seqtag::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend env_backend() {
  const char* env = std::getenv("SEQTAG_KERNELS");
  if (env == nullptr) return Backend::kAuto;
  const std::string v(env);
  if (v == "scalar") return Backend::kScalar;
  if (v == "avx2") return Backend::kAvx2;
  if (v == "auto" || v.empty()) return Backend::kAuto;
  throw std::runtime_error("SEQTAG_KERNELS must be scalar, avx2 or auto, got '" + v + "'");
}

Backend resolve(Backend b) {
  if (b == Backend::kAuto) return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
  return b;
}

Backend& current() {
  static Backend b = resolve(env_backend());
  return b;
}

}  // namespace

bool avx2_supported() { return cpu_has_avx2(); }

const Ops& active_ops() {
  return current() == Backend::kAvx2 ? avx2_ops() : scalar_ops();
}

void set_backend(Backend b) {
  b = resolve(b);
  if (b == Backend::kAvx2 && !cpu_has_avx2()) {
    throw std::runtime_error("AVX2 kernels requested but the CPU lacks avx2/fma");
  }
  current() = b;
}

Backend active_backend() { return current(); }

std::string backend_name() { return active_ops().name; }

}  // namespace seqtag::kernels
