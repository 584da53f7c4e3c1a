#include <limits>

#include "dflow/simd.hpp"

namespace dflow::simd::scalar {

void minplus_relax(double* y, int* arg, const double* x, double c, int tag, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        const double cand = x[k] + c;
        if (cand < y[k]) {
            y[k] = cand;
            arg[k] = tag;
        }
    }
}

void minplus_relax(double* y, const double* x, double c, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        const double cand = x[k] + c;
        if (cand < y[k]) y[k] = cand;
    }
}

ArgMin min_difference(const double* a, const double* b, std::size_t n) {
    ArgMin best{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t k = 0; k < n; ++k) {
        const double d = a[k] - b[k];
        if (d < best.value) best = {d, k};
    }
    return best;
}

}  // namespace dflow::simd::scalar
