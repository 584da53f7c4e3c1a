#include <immintrin.h>

#include <limits>

#include "dflow/simd.hpp"

namespace dflow::simd::avx2 {

void minplus_relax(double* y, int* arg, const double* x, double c, int tag, std::size_t n) {
    const __m256d vc = _mm256_set1_pd(c);
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        const __m256d cand = _mm256_add_pd(_mm256_loadu_pd(x + k), vc);
        const __m256d cur = _mm256_loadu_pd(y + k);
        const __m256d lt = _mm256_cmp_pd(cand, cur, _CMP_LT_OQ);
        const int mask = _mm256_movemask_pd(lt);
        if (mask) {
            _mm256_storeu_pd(y + k, _mm256_blendv_pd(cur, cand, lt));
            if (mask & 1) arg[k] = tag;
            if (mask & 2) arg[k + 1] = tag;
            if (mask & 4) arg[k + 2] = tag;
            if (mask & 8) arg[k + 3] = tag;
        }
    }
    scalar::minplus_relax(y + k, arg + k, x + k, c, tag, n - k);
}

void minplus_relax(double* y, const double* x, double c, std::size_t n) {
    const __m256d vc = _mm256_set1_pd(c);
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        const __m256d cand = _mm256_add_pd(_mm256_loadu_pd(x + k), vc);
        const __m256d cur = _mm256_loadu_pd(y + k);
        const __m256d lt = _mm256_cmp_pd(cand, cur, _CMP_LT_OQ);
        _mm256_storeu_pd(y + k, _mm256_blendv_pd(cur, cand, lt));
    }
    scalar::minplus_relax(y + k, x + k, c, n - k);
}

ArgMin min_difference(const double* a, const double* b, std::size_t n) {
    ArgMin best{std::numeric_limits<double>::infinity(), 0};
    std::size_t k = 0;
    if (n >= 4) {
        __m256d vbest = _mm256_set1_pd(std::numeric_limits<double>::infinity());
        __m256d vidx = _mm256_setzero_pd();
        __m256d lane = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
        const __m256d four = _mm256_set1_pd(4.0);
        for (; k + 4 <= n; k += 4) {
            const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k));
            const __m256d lt = _mm256_cmp_pd(d, vbest, _CMP_LT_OQ);
            vbest = _mm256_blendv_pd(vbest, d, lt);
            vidx = _mm256_blendv_pd(vidx, lane, lt);
            lane = _mm256_add_pd(lane, four);
        }
        alignas(32) double vals[4];
        alignas(32) double idx[4];
        _mm256_store_pd(vals, vbest);
        _mm256_store_pd(idx, vidx);
        for (int l = 0; l < 4; ++l) {
            const auto i = static_cast<std::size_t>(idx[l]);
            if (vals[l] < best.value || (vals[l] == best.value && i < best.index)) best = {vals[l], i};
        }
    }
    for (; k < n; ++k) {
        const double d = a[k] - b[k];
        if (d < best.value) best = {d, k};
    }
    return best;
}

}  // namespace dflow::simd::avx2
