#include <atomic>

#include "dflow/simd.hpp"

namespace dflow::simd {

namespace {

Isa detect() {
#if defined(DFLOW_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::avx2;
#endif
    return Isa::scalar;
}

std::atomic<Isa>& selected() {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

std::string to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool available(Isa isa) { return isa == Isa::scalar || detect() == Isa::avx2; }

Isa active() { return selected().load(std::memory_order_relaxed); }

void force(Isa isa) { selected().store(available(isa) ? isa : Isa::scalar); }

void reset() { selected().store(detect()); }

#if defined(DFLOW_HAVE_AVX2)
#define DFLOW_DISPATCH(call) \
    if (active() == Isa::avx2) return avx2::call; \
    return scalar::call
#else
#define DFLOW_DISPATCH(call) return scalar::call
#endif

void minplus_relax(double* y, int* arg, const double* x, double c, int tag, std::size_t n) {
    DFLOW_DISPATCH(minplus_relax(y, arg, x, c, tag, n));
}

void minplus_relax(double* y, const double* x, double c, std::size_t n) {
    DFLOW_DISPATCH(minplus_relax(y, x, c, n));
}

ArgMin min_difference(const double* a, const double* b, std::size_t n) {
    DFLOW_DISPATCH(min_difference(a, b, n));
}

}  // namespace dflow::simd

#if !defined(DFLOW_HAVE_AVX2)
namespace dflow::simd::avx2 {

void minplus_relax(double* y, int* arg, const double* x, double c, int tag, std::size_t n) {
    scalar::minplus_relax(y, arg, x, c, tag, n);
}

void minplus_relax(double* y, const double* x, double c, std::size_t n) { scalar::minplus_relax(y, x, c, n); }

ArgMin min_difference(const double* a, const double* b, std::size_t n) { return scalar::min_difference(a, b, n); }

}  // namespace dflow::simd::avx2
#endif
