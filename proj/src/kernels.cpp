#include "anneal/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace anneal::kernels {

bool avx2_compiled(); // defined in kernels_avx2.cpp

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  return avx2_compiled() && __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

std::atomic<const Ops*> g_ops{nullptr};

const Ops* pick_default() {
  if (const char* env = std::getenv("ANNEAL_KERNEL")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_ops();
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return &avx2_ops();
  }
  return avx2_supported() ? &avx2_ops() : &scalar_ops();
}

} // namespace

const Ops& ops() {
  const Ops* p = g_ops.load(std::memory_order_acquire);
  if (p == nullptr) {
    p = pick_default();
    g_ops.store(p, std::memory_order_release);
  }
  return *p;
}

void select_backend(Backend b) {
  switch (b) {
    case Backend::automatic:
      g_ops.store(pick_default(), std::memory_order_release);
      return;
    case Backend::scalar:
      g_ops.store(&scalar_ops(), std::memory_order_release);
      return;
    case Backend::avx2:
      if (!avx2_supported()) throw std::invalid_argument("avx2 backend not available");
      g_ops.store(&avx2_ops(), std::memory_order_release);
      return;
  }
  throw std::invalid_argument("unknown kernel backend");
}

} // namespace anneal::kernels
