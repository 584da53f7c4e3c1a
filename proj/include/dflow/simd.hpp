#pragma once

#include <cstddef>
#include <string>

namespace dflow::simd {

enum class Isa { scalar, avx2 };

std::string to_string(Isa isa);
bool available(Isa isa);
/// Instruction set used by the dispatching entry points.
Isa active();
/// Overrides the runtime choice; an unavailable request falls back to scalar.
void force(Isa isa);
/// Restores detection-based selection.
void reset();

/// y[k] = min(y[k], x[k] + c); where the minimum changes, arg[k] = tag. Ties keep the old entry.
void minplus_relax(double* y, int* arg, const double* x, double c, int tag, std::size_t n);

/// Same without argument tracking.
void minplus_relax(double* y, const double* x, double c, std::size_t n);

/// Minimum of a[k] - b[k] and its lowest attaining index.
struct ArgMin {
    double value;
    std::size_t index;
};
ArgMin min_difference(const double* a, const double* b, std::size_t n);

namespace scalar {
void minplus_relax(double* y, int* arg, const double* x, double c, int tag, std::size_t n);
void minplus_relax(double* y, const double* x, double c, std::size_t n);
ArgMin min_difference(const double* a, const double* b, std::size_t n);
}  // namespace scalar

namespace avx2 {
void minplus_relax(double* y, int* arg, const double* x, double c, int tag, std::size_t n);
void minplus_relax(double* y, const double* x, double c, std::size_t n);
ArgMin min_difference(const double* a, const double* b, std::size_t n);
}  // namespace avx2

}  // namespace dflow::simd
