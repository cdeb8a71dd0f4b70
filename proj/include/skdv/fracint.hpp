#pragma once

#include <array>
#include <cmath>
#include <mutex>

#include <boost/math/quadrature/gauss.hpp>

#include "skdv/grid.hpp"

namespace skdv {

namespace detail {

using Poly4 = std::array<double, 4>;

// Monomial coefficients of the Lagrange basis on nodes u[0..m-1] (m <= 4).
inline std::array<Poly4, 4> lagrange_basis(const double* u, int m) {
    std::array<Poly4, 4> out{};
    for (int q = 0; q < m; ++q) {
        Poly4 p{1, 0, 0, 0};
        double den = 1;
        for (int r = 0; r < m; ++r) {
            if (r == q) continue;
            Poly4 nx{};
            for (int k = 0; k < 3; ++k) {
                nx[k + 1] += p[k];
                nx[k] -= u[r] * p[k];
            }
            p = nx;
            den *= u[q] - u[r];
        }
        for (auto& c : p) c /= den;
        out[q] = p;
    }
    return out;
}

// M_k(d) = int_0^1 (d + 1 - u)^{alpha - 1} u^k du, k = 0..3.
inline Poly4 kernel_moments(int d, double alpha) {
    Poly4 m{};
    if (d == 0) {
        for (int k = 0; k < 4; ++k) m[k] = std::exp(std::lgamma(k + 1.0) + std::lgamma(alpha) - std::lgamma(k + 1.0 + alpha));
        return m;
    }
    using GL = boost::math::quadrature::gauss<double, 20>;
    for (int k = 0; k < 4; ++k)
        m[k] = GL::integrate([&](double u) { return std::pow(d + 1 - u, alpha - 1) * std::pow(u, k); }, 0.0, 1.0);
    return m;
}

inline Poly4 weights(const std::array<Poly4, 4>& basis, const Poly4& mom, int m) {
    Poly4 w{};
    for (int q = 0; q < m; ++q)
        for (int k = 0; k < 4; ++k) w[q] += basis[q][k] * mom[k];
    return w;
}

// Fornberg weights for the order-th derivative at z from nodes x[0..n-1].
inline rvec fd_weights(double z, const rvec& x, int order) {
    const int n = int(x.size());
    std::vector<rvec> c(n, rvec(order + 1, 0.0));
    double c1 = 1, c4 = x[0] - z;
    c[0][0] = 1;
    for (int i = 1; i < n; ++i) {
        int mn = std::min(i, order);
        double c2 = 1, c5 = c4;
        c4 = x[i] - z;
        for (int j = 0; j < i; ++j) {
            double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    rvec w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][order];
    return w;
}

}  // namespace detail

/// I_alpha f on nodes t_n = n dt, f supported in t >= 0, alpha >= 0.
/// Piecewise-cubic product integration against (t - s)^{alpha - 1}.
inline cvec rl_integral(const cvec& f, double dt, double alpha) {
    require(alpha >= 0, "rl_integral needs alpha >= 0");
    require(alpha <= 4, "fractional order outside [-4, 4]");
    const int N = int(f.size());
    if (alpha == 0 || N == 0) return f;
    cvec out(N);
    const double pref = std::pow(dt, alpha) / std::tgamma(alpha);

    const double u_left[4] = {0, 1, 2, 3}, u_mid[4] = {-1, 0, 1, 2}, u_right[4] = {-2, -1, 0, 1};
    auto B_left = detail::lagrange_basis(u_left, 4), B_mid = detail::lagrange_basis(u_mid, 4);
    auto B_right = detail::lagrange_basis(u_right, 4);

    std::vector<detail::Poly4> mom(N);
    for (int d = 0; d < N; ++d) mom[d] = detail::kernel_moments(d, alpha);
    std::vector<detail::Poly4> w_mid(N), w_left(N);
    for (int d = 0; d < N; ++d) {
        w_mid[d] = detail::weights(B_mid, mom[d], 4);
        w_left[d] = detail::weights(B_left, mom[d], 4);
    }
    const auto w_right = detail::weights(B_right, mom[0], 4);

    // Startup steps borrow the first four nodes, so the rule stays cubic on [0, 3 dt].
    for (int n = 1; n < std::min(N, 3); ++n) {
        if (N < 4) {
            // too short for a cubic: linear on each interval
            const double u_lin[2] = {0, 1};
            auto B = detail::lagrange_basis(u_lin, 2);
            cplx acc{};
            for (int j = 0; j < n; ++j) {
                auto w = detail::weights(B, mom[n - j - 1], 2);
                acc += w[0] * f[j] + w[1] * f[j + 1];
            }
            out[n] = pref * acc;
            continue;
        }
        cplx acc{};
        for (int j = 0; j < n; ++j) {
            double u[4] = {double(-j), double(1 - j), double(2 - j), double(3 - j)};
            auto w = detail::weights(detail::lagrange_basis(u, 4), mom[n - j - 1], 4);
            for (int q = 0; q < 4; ++q) acc += w[q] * f[q];
        }
        out[n] = pref * acc;
    }
    for (int n = 3; n < N; ++n) {
        cplx acc{};
        const auto& wl = w_left[n - 1];
        for (int q = 0; q < 4; ++q) acc += wl[q] * f[q];
        for (int j = 1; j <= n - 2; ++j) {
            const auto& w = w_mid[n - j - 1];
            acc += w[0] * f[j - 1] + w[1] * f[j] + w[2] * f[j + 1] + w[3] * f[j + 2];
        }
        for (int q = 0; q < 4; ++q) acc += w_right[q] * f[n - 3 + q];
        out[n] = pref * acc;
    }
    return out;
}

/// k-th derivative on a uniform grid, 6th-order Fornberg stencils (one-sided at the ends).
inline cvec fd_derivative(const cvec& f, double dt, int k) {
    const int N = int(f.size());
    if (k == 0) return f;
    const int p = std::min(N, 6 + k);
    require(N >= k + 1, "too few samples for the requested derivative");
    cvec out(N);
    std::vector<rvec> cache(p);  // weights keyed by offset of the evaluation point in the stencil
    for (int n = 0; n < N; ++n) {
        int start = std::clamp(n - p / 2, 0, N - p);
        int off = n - start;
        if (cache[off].empty()) {
            rvec x(p);
            for (int i = 0; i < p; ++i) x[i] = i;
            cache[off] = detail::fd_weights(off, x, k);
        }
        cplx acc{};
        for (int i = 0; i < p; ++i) acc += cache[off][i] * f[start + i];
        out[n] = acc / std::pow(dt, k);
    }
    return out;
}

/// I_{-alpha} f = d^k/dt^k I_{k - alpha} f, k = ceil(alpha).
inline cvec rl_derivative(const cvec& f, double dt, double alpha) {
    require(alpha >= 0, "rl_derivative needs alpha >= 0");
    require(alpha <= 4, "fractional order outside [-4, 4]");
    int k = int(std::ceil(alpha - 1e-14));
    return fd_derivative(rl_integral(f, dt, k - alpha), dt, k);
}

/// I_alpha for any real alpha in [-4, 4].
inline cvec rl_apply(const cvec& f, double dt, double alpha) {
    return alpha >= 0 ? rl_integral(f, dt, alpha) : rl_derivative(f, dt, -alpha);
}

inline bool nonnegative_support_ok(const TimeTrace& f) { return f.support == Support::nonnegative; }

/// True when f and its first order-1 derivatives are negligible at t = 0,
/// judged by one-sided differences scaled to the trace length.
inline bool vanishes_to_order(const cvec& f, double dt, int order, double tol = 1e-6) {
    const int N = int(f.size());
    const int p = std::min(N, 7);
    double m = max_abs(f), T = N * dt;
    if (m == 0) return true;
    rvec x(p);
    for (int i = 0; i < p; ++i) x[i] = i * dt;
    for (int k = 0; k < order && k < p; ++k) {
        auto w = detail::fd_weights(0.0, x, k);
        cplx d{};
        for (int i = 0; i < p; ++i) d += w[i] * f[i];
        if (std::abs(d) * std::pow(T, k) > tol * m) return false;
    }
    return true;
}

inline TimeTrace frac_derivative(const TimeTrace& f, double alpha, bool* accuracy_warning = nullptr);

inline TimeTrace frac_integral(const TimeTrace& f, double alpha) {
    require(nonnegative_support_ok(f), "fractional integral needs a nonnegative-support trace");
    if (alpha < 0) return frac_derivative(f, -alpha);
    return TimeTrace(f.grid, Support::nonnegative, rl_integral(f.values, f.dt(), alpha));
}

inline TimeTrace frac_derivative(const TimeTrace& f, double alpha, bool* accuracy_warning) {
    require(nonnegative_support_ok(f), "fractional derivative needs a nonnegative-support trace");
    require(alpha > 0, "frac_derivative needs alpha > 0");
    if (accuracy_warning) *accuracy_warning = !vanishes_to_order(f.values, f.dt(), int(std::ceil(alpha)));
    return TimeTrace(f.grid, Support::nonnegative, rl_derivative(f.values, f.dt(), alpha));
}

// ----------------------------------------------------------- spectral route

enum class SpectralPrefactor { printed_real, with_imaginary_unit };

namespace detail {

// Damped periodic evaluation: e^{-s t} I_a f = (t_+^{a-1} e^{-s t}/Gamma(a)) * (e^{-s t} f),
// whose kernel has transform c(a) (tau - i s)^{-a}.
inline cvec spectral_rl(const cvec& f, double dt, double alpha, SpectralPrefactor which) {
    const int N = int(f.size());
    if (alpha == 0 || N == 0) return f;
    const double T = N * dt, sigma = 3.0 / T;
    int M = 1;
    while (M < 12 * N) M *= 2;
    cvec g(M);
    for (int j = 0; j < N; ++j) g[j] = f[j] * std::exp(-sigma * j * dt);
    fft::execute(g.data(), M, -1);
    const cplx pref = which == SpectralPrefactor::with_imaginary_unit ? std::exp(-I * (pi * alpha / 2))
                                                                     : cplx(std::exp(-pi * alpha / 2), 0);
    auto symbol = [&](double tau) { return pref * std::pow(cplx(tau, -sigma), -alpha); };
    const double dtau = 2 * pi / (M * dt);
    for (int k = 0; k < M; ++k) {
        if (k == M / 2) {
            double K = dtau * M / 2;
            g[k] *= 0.5 * (symbol(K) + symbol(-K));
            continue;
        }
        g[k] *= symbol(dtau * (k < M / 2 ? k : k - M));
    }
    fft::execute(g.data(), M, +1);
    cvec out(N);
    for (int j = 0; j < N; ++j) out[j] = g[j] / double(M) * std::exp(sigma * j * dt);
    return out;
}

inline double rel_l2(const cvec& a, const cvec& ref) {
    double r = l2(ref);
    return r > 0 ? l2_diff(a, ref) / r : l2(a);
}

}  // namespace detail

/// Which prefactor reproduced the time-domain definition, and by how much each missed.
struct SpectralCalibration {
    SpectralPrefactor chosen;
    double defect_printed;
    double defect_imaginary;
};

/// Runs once: compares both prefactors against product integration on t^3 e^{-t}, alpha = 1/2.
inline const SpectralCalibration& spectral_calibration() {
    static const SpectralCalibration cal = [] {
        const int N = 1025;
        const double dt = 40.0 / (N - 1), alpha = 0.5;
        cvec f(N);
        for (int j = 0; j < N; ++j) {
            double t = j * dt;
            f[j] = t * t * t * std::exp(-t);
        }
        cvec ref = rl_integral(f, dt, alpha);
        double dp = detail::rel_l2(detail::spectral_rl(f, dt, alpha, SpectralPrefactor::printed_real), ref);
        double di = detail::rel_l2(detail::spectral_rl(f, dt, alpha, SpectralPrefactor::with_imaginary_unit), ref);
        SpectralCalibration c{di <= dp ? SpectralPrefactor::with_imaginary_unit : SpectralPrefactor::printed_real, dp, di};
        if (std::min(dp, di) > 1e-4)
            throw ConfigurationError("spectral fractional integral: no branch reproduces the time-domain integral");
        return c;
    }();
    return cal;
}

inline cvec rl_integral_spectral(const cvec& f, double dt, double alpha) {
    require(std::abs(alpha) <= 4, "fractional order outside [-4, 4]");
    return detail::spectral_rl(f, dt, alpha, spectral_calibration().chosen);
}

inline TimeTrace frac_integral_spectral(const TimeTrace& f, double alpha) {
    require(nonnegative_support_ok(f), "fractional integral needs a nonnegative-support trace");
    return TimeTrace(f.grid, Support::nonnegative, rl_integral_spectral(f.values, f.dt(), alpha));
}

}  // namespace skdv
