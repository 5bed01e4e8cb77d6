#pragma once

// Vector variants of cos/sin from glibc's libmvec. <cmath> only declares them
// under -ffast-math, which would also break NaN/inf handling elsewhere, so we
// repeat the declarations with the simd attribute here. Without errno side
// effects (-fno-math-errno) and with -fopenmp-simd the mode loops below then
// vectorize; on other toolchains they simply stay scalar.

#include <cmath>

#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__) && defined(__GLIBC__) && \
    !defined(__FAST_MATH__)
extern "C" {
__attribute__((__simd__("notinbranch"))) double cos(double) noexcept;
__attribute__((__simd__("notinbranch"))) double sin(double) noexcept;
__attribute__((__simd__("notinbranch"))) double exp(double) noexcept;
}
#endif

#if defined(_OPENMP) || defined(__GNUC__)
#define HOMFLUCT_PRAGMA(x) _Pragma(#x)
#define HOMFLUCT_SIMD_REDUCE(...) HOMFLUCT_PRAGMA(omp simd reduction(+ : __VA_ARGS__))
#else
#define HOMFLUCT_SIMD_REDUCE(...)
#endif
