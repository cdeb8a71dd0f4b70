#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "skdv/common.hpp"
#include "skdv/fft.hpp"

namespace skdv {

/// Truncated periodic domain [-L, L) with Nx nodes and time nodes t_n = n dt on [0, T_max].
struct SpaceTimeGrid {
    double L = 1;
    int Nx = 16;
    double T_max = 1;
    int Nt = 2;
    double dx = 0.125;
    double dt = 1;

    double x(int j) const { return -L + j * dx; }
    double t(int n) const { return n * dt; }
    int zero_index() const { return Nx / 2; }
    double dxi() const { return pi / L; }
    /// Frequency of FFT-ordered index k (m = k or k - Nx).
    double xi(int k) const { return dxi() * (k < Nx / 2 ? k : k - Nx); }
    int nyquist_index() const { return Nx / 2; }
    /// Period of the time axis when treated as a periodic signal.
    double period() const { return Nt * dt; }

    bool operator==(const SpaceTimeGrid&) const = default;
};

inline SpaceTimeGrid make_grid(double L, int Nx, double T_max, int Nt) {
    require(L > 0 && T_max > 0, "L and T_max must be positive");
    require(Nx > 0 && Nt > 0, "grid dimensions must be positive");
    require(Nx % 2 == 0, "Nx must be even");
    require(Nx >= 16, "Nx must be at least 16");
    require(Nt >= 2, "Nt must be at least 2");
    SpaceTimeGrid g;
    g.L = L;
    g.Nx = Nx;
    g.T_max = T_max;
    g.Nt = Nt;
    g.dx = 2 * L / Nx;
    g.dt = T_max / (Nt - 1);
    return g;
}

enum class FieldKind { schrodinger, kdv, generic };
enum class Side { right, left };
enum class Support { two_sided, nonnegative };

inline std::string to_string(Side s) { return s == Side::right ? "right" : "left"; }

/// Complex samples on a grid; values[n * Nx + j] is the value at (x_j, t_n).
/// A single slice has nt == 1.
struct SampledField {
    SpaceTimeGrid grid;
    FieldKind kind = FieldKind::generic;
    int nt = 1;
    cvec values;

    SampledField() = default;
    SampledField(const SpaceTimeGrid& g, FieldKind k, int slices)
        : grid(g), kind(k), nt(slices), values(size_t(g.Nx) * slices) {}

    static SampledField full(const SpaceTimeGrid& g, FieldKind k = FieldKind::generic) {
        return SampledField(g, k, g.Nt);
    }
    static SampledField slice(const SpaceTimeGrid& g, FieldKind k = FieldKind::generic) {
        return SampledField(g, k, 1);
    }

    cplx& operator()(int j, int n = 0) { return values[size_t(n) * grid.Nx + j]; }
    const cplx& operator()(int j, int n = 0) const { return values[size_t(n) * grid.Nx + j]; }
    cplx* row(int n) { return values.data() + size_t(n) * grid.Nx; }
    const cplx* row(int n) const { return values.data() + size_t(n) * grid.Nx; }
    cvec slice_at(int n) const { return cvec(row(n), row(n) + grid.Nx); }

    /// Largest |Im| relative to the largest modulus.
    double imag_ratio() const {
        double mi = 0, mm = 0;
        for (auto& z : values) {
            mi = std::max(mi, std::abs(z.imag()));
            mm = std::max(mm, std::abs(z));
        }
        return mm > 0 ? mi / mm : 0.0;
    }
};

/// Samples of a time series at a fixed point on the grid's time nodes.
struct TimeTrace {
    SpaceTimeGrid grid;
    Support support = Support::nonnegative;
    cvec values;

    TimeTrace() = default;
    TimeTrace(const SpaceTimeGrid& g, Support s) : grid(g), support(s), values(g.Nt) {}
    TimeTrace(const SpaceTimeGrid& g, Support s, cvec v) : grid(g), support(s), values(std::move(v)) {
        require(int(values.size()) == g.Nt, "trace length must equal Nt");
    }
    double dt() const { return grid.dt; }
};

// ---------------------------------------------------------------- transforms

/// phi_hat(xi_m) ~ integral of e^{-i xi x} phi(x) dx, returned in FFT order.
inline cvec forward_transform(const cplx* phi, const SpaceTimeGrid& g) {
    cvec h(phi, phi + g.Nx);
    fft::execute(h.data(), g.Nx, -1);
    for (int k = 0; k < g.Nx; ++k) h[k] *= (k % 2 ? -g.dx : g.dx);
    return h;
}

inline cvec forward_transform(const cvec& phi, const SpaceTimeGrid& g) {
    require(int(phi.size()) == g.Nx, "profile length must equal Nx");
    return forward_transform(phi.data(), g);
}

inline cvec forward_transform(const SampledField& f, int n = 0) {
    return forward_transform(f.row(n), f.grid);
}

inline cvec inverse_transform(cvec h, const SpaceTimeGrid& g) {
    require(int(h.size()) == g.Nx, "spectrum length must equal Nx");
    const double c = 1.0 / (2 * g.L);
    for (int k = 0; k < g.Nx; ++k) h[k] *= (k % 2 ? -c : c);
    fft::execute(h.data(), g.Nx, +1);
    return h;
}

/// Multiply each slice by a spectral symbol m(k) given in FFT order.
inline void apply_symbol(cplx* row, const cvec& sym, const SpaceTimeGrid& g) {
    cvec h = forward_transform(row, g);
    for (int k = 0; k < g.Nx; ++k) h[k] *= sym[k];
    h = inverse_transform(std::move(h), g);
    std::copy(h.begin(), h.end(), row);
}

/// Spectral d/dx; the Nyquist mode is dropped (odd symbol).
inline cvec spectral_derivative(const cvec& phi, const SpaceTimeGrid& g, int order = 1) {
    cvec h = forward_transform(phi, g);
    for (int k = 0; k < g.Nx; ++k) h[k] *= std::pow(I * g.xi(k), order);
    if (order % 2) h[g.nyquist_index()] = 0;
    return inverse_transform(std::move(h), g);
}

// --------------------------------------------------------------------- norms

/// sqrt(dx sum |phi|^2).
inline double l2_norm(const cvec& phi, const SpaceTimeGrid& g) { return l2(phi) * std::sqrt(g.dx); }

/// ||<xi>^s phi_hat||_{L^2} / sqrt(2 pi), so s = 0 is the L^2 norm.
inline double sobolev_norm(const cvec& phi, const SpaceTimeGrid& g, double s) {
    cvec h = forward_transform(phi, g);
    double acc = 0;
    for (int k = 0; k < g.Nx; ++k) acc += std::pow(1 + std::abs(g.xi(k)), 2 * s) * std::norm(h[k]);
    return std::sqrt(acc * g.dxi() / (2 * pi));
}

inline double sobolev_norm(const SampledField& f, double s, int n = 0) {
    return sobolev_norm(f.slice_at(n), f.grid, s);
}

/// H^sigma(R_t) norm of samples on a uniform time axis, zero padded to kill wraparound.
inline double time_sobolev_norm(const cvec& v, double dt, double sigma) {
    int M = 1;
    while (M < 2 * int(v.size())) M *= 2;
    cvec h(M);
    std::copy(v.begin(), v.end(), h.begin());
    fft::execute(h.data(), M, -1);
    const double dtau = 2 * pi / (M * dt);
    double acc = 0;
    for (int k = 0; k < M; ++k) {
        double tau = dtau * (k < M / 2 ? k : k - M);
        acc += std::pow(1 + std::abs(tau), 2 * sigma) * std::norm(dt * h[k]);
    }
    return std::sqrt(acc * dtau / (2 * pi));
}

// ------------------------------------------------------------------- cutoffs

/// Smooth step: 0 at y <= 0, 1 at y >= 1.
inline double smooth_step(double y) {
    if (y <= 0) return 0;
    if (y >= 1) return 1;
    double a = std::exp(-1 / y), b = std::exp(-1 / (1 - y));
    return a / (a + b);
}

/// psi = 1 on |t| <= 1, 0 on |t| >= 2, monotone in between.
inline double cutoff_psi(double t) { return 1 - smooth_step(std::abs(t) - 1); }

inline double cutoff_psi_T(double t, double T) {
    require(T > 0, "cutoff width T must be positive");
    return cutoff_psi(t / T);
}

// ------------------------------------------------------------ half lines

/// Right: nodes x = 0 .. L - dx. Left: nodes x = -L .. 0. Both include x = 0.
inline cvec restrict_half_line(const cvec& phi, const SpaceTimeGrid& g, Side side) {
    require(int(phi.size()) == g.Nx, "profile length must equal Nx");
    const int z = g.zero_index();
    if (side == Side::right) return cvec(phi.begin() + z, phi.end());
    return cvec(phi.begin(), phi.begin() + z + 1);
}

namespace detail {

// Half-line sample at distance i*dx from 0 on the given side; zero beyond the grid.
inline cplx half_at(const cvec& half, Side side, int i) {
    if (side == Side::right) return i < int(half.size()) ? half[i] : cplx{};
    int z = int(half.size()) - 1;
    return i <= z ? half[z - i] : cplx{};
}

template <class Reflect>
cvec extend_with(const cvec& half, const SpaceTimeGrid& g, Side side, Reflect refl) {
    const int z = g.zero_index();
    require(int(half.size()) == (side == Side::right ? g.Nx - z : z + 1),
            "half-line sample count does not match the grid");
    cvec out(g.Nx);
    for (int j = 0; j < g.Nx; ++j) {
        int i = j - z;
        bool own = side == Side::right ? i >= 0 : i <= 0;
        if (own) {
            out[j] = detail::half_at(half, side, std::abs(i));
            continue;
        }
        double chi = cutoff_psi(4 * std::abs(g.x(j)) / g.L);
        if (chi == 0) continue;
        out[j] = chi * refl(std::abs(i));
    }
    return out;
}

}  // namespace detail

/// C^1 reflection 3u(-x) - 2u(-2x) on the far side, cut off to [-L/2, L/2].
inline cvec extend_half_line(const cvec& half, const SpaceTimeGrid& g, Side side) {
    return detail::extend_with(half, g, side, [&](int i) {
        return 3.0 * detail::half_at(half, side, i) - 2.0 * detail::half_at(half, side, 2 * i);
    });
}

/// Half-line H^s norm, evaluated on the even reflection (bounded for |s| < 3/2).
inline double half_line_norm(const cvec& half, const SpaceTimeGrid& g, Side side, double s) {
    cvec even = detail::extend_with(half, g, side, [&](int i) { return detail::half_at(half, side, i); });
    return sobolev_norm(even, g, s);
}

/// Largest ||extension||_{H^s} / ||u||_{H^s(half line)} over random smooth inputs.
inline double measure_extension_constant(const SpaceTimeGrid& g, double s, int trials, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1, 1), W(0.5, 3.0);
    const int z = g.zero_index();
    double worst = 0;
    for (int tr = 0; tr < trials; ++tr) {
        // sum of a few decaying smooth atoms with random widths, centers, phases
        cvec half(g.Nx - z);
        for (int a = 0; a < 4; ++a) {
            double w = W(rng), c = 2 * std::abs(U(rng)), om = 3 * U(rng);
            cplx amp{U(rng), U(rng)};
            for (int i = 0; i < int(half.size()); ++i) {
                double x = i * g.dx;
                half[i] += amp * std::exp(-(x - c) * (x - c) / (w * w)) * std::exp(I * om * x);
            }
        }
        double num = sobolev_norm(extend_half_line(half, g, Side::right), g, s);
        double den = half_line_norm(half, g, Side::right, s);
        if (den > 0) worst = std::max(worst, num / den);
    }
    return worst;
}

}  // namespace skdv
