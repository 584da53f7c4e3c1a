#pragma once

#include <array>
#include <cmath>

namespace dflow {

/// Composite 8-point Gauss-Legendre rule on [a, b] with `panels` equal panels.
template <class F>
double gauss_legendre(F&& f, double a, double b, int panels = 32) {
    static constexpr std::array<double, 4> x = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                                0.9602898564975363};
    static constexpr std::array<double, 4> w = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                                0.1012285362903763};
    if (a == b) return 0.0;
    const double width = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * width, half = 0.5 * width;
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += w[k] * (f(mid - half * x[k]) + f(mid + half * x[k]));
        total += s * half;
    }
    return total;
}

}  // namespace dflow
