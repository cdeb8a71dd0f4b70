#pragma once

#include <complex>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace skdv {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

/// Bad input: shapes, ranges, schema, compatibility.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A requested parameter set violates an estimate or lemma hypothesis.
struct HypothesisError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Startup self-check of a numerical convention failed.
struct ConfigurationError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Picard iteration stopped contracting.
struct NonContractionError : std::runtime_error {
    NonContractionError(const std::string& msg, std::string term)
        : std::runtime_error(msg), dominant_term(std::move(term)) {}
    std::string dominant_term;
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

/// Worker cap from SKDV_THREADS (0 or unset means "let the runtime decide").
inline int worker_threads() {
    if (const char* s = std::getenv("SKDV_THREADS")) {
        int n = std::atoi(s);
        if (n > 0) return n;
    }
    return 0;
}

inline double l2(const cvec& a) {
    double s = 0;
    for (auto& z : a) s += std::norm(z);
    return std::sqrt(s);
}

inline double l2_diff(const cvec& a, const cvec& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
    return std::sqrt(s);
}

inline double max_abs(const cvec& a) {
    double m = 0;
    for (auto& z : a) m = std::max(m, std::abs(z));
    return m;
}

}  // namespace skdv
