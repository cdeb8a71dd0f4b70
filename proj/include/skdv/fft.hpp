#pragma once

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <utility>

#include "skdv/common.hpp"

namespace skdv::fft {

namespace detail {

// Plans are built once per (size, sign) under a lock; executing a plan on
// caller-owned arrays through the new-array interface is thread safe.
inline fftw_plan plan_for(int n, int sign) {
    static std::mutex mtx;
    static std::map<std::pair<int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto key = std::make_pair(n, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    fftw_plan p = fftw_plan_dft_1d(n, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    cache.emplace(key, p);
    return p;
}

/// Two-dimensional plan for row-major n0 x n1 arrays.
inline fftw_plan plan_2d(int n0, int n1, int sign) {
    static std::mutex mtx;
    static std::map<std::tuple<int, int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto key = std::make_tuple(n0, n1, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n0 * n1));
    fftw_plan p = fftw_plan_dft_2d(n0, n1, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    cache.emplace(key, p);
    return p;
}

}  // namespace detail

/// In-place unnormalized 2-d DFT of a row-major n0 x n1 array.
inline void execute_2d(cplx* data, int n0, int n1, int sign) {
    fftw_plan p = detail::plan_2d(n0, n1, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD);
    auto* d = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(p, d, d);
}

/// In-place unnormalized DFT; sign = -1 is e^{-2 pi i jk/n}.
inline void execute(cplx* data, int n, int sign) {
    fftw_plan p = detail::plan_for(n, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD);
    auto* d = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(p, d, d);
}

}  // namespace skdv::fft
