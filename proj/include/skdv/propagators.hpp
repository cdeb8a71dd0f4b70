#pragma once

#include <boost/math/special_functions/airy.hpp>

#include "skdv/grid.hpp"

namespace skdv {

/// schrodinger: multiplier e^{-it xi^2}; airy: multiplier e^{it xi^3}.
enum class PropagatorKind { schrodinger, airy };

/// omega(xi) with the group written as e^{-it omega}. At Nyquist the odd part is dropped.
inline double dispersion(PropagatorKind kind, const SpaceTimeGrid& g, int k) {
    double xi = g.xi(k);
    if (kind == PropagatorKind::schrodinger) return xi * xi;
    return k == g.nyquist_index() ? 0.0 : -xi * xi * xi;
}

inline cvec propagator_symbol(PropagatorKind kind, const SpaceTimeGrid& g, double t) {
    cvec m(g.Nx);
    for (int k = 0; k < g.Nx; ++k) m[k] = std::exp(-I * (t * dispersion(kind, g, k)));
    return m;
}

inline cvec evolve(PropagatorKind kind, const cvec& phi, const SpaceTimeGrid& g, double t) {
    cvec h = forward_transform(phi, g);
    auto m = propagator_symbol(kind, g, t);
    for (int k = 0; k < g.Nx; ++k) h[k] *= m[k];
    return inverse_transform(std::move(h), g);
}

inline SampledField evolve(PropagatorKind kind, const SampledField& phi, double t) {
    SampledField out = phi;
    out.nt = 1;
    auto v = evolve(kind, phi.slice_at(0), phi.grid, t);
    out.values = v;
    return out;
}

/// e^{it d_x^2} phi or e^{-t d_x^3} phi sampled at every time node.
inline SampledField free_evolution(PropagatorKind kind, const cvec& phi, const SpaceTimeGrid& g) {
    auto out = SampledField::full(g, kind == PropagatorKind::airy ? FieldKind::kdv : FieldKind::schrodinger);
    cvec h = forward_transform(phi, g);
    for (int n = 0; n < g.Nt; ++n) {
        auto m = propagator_symbol(kind, g, g.t(n));
        cvec hn(g.Nx);
        for (int k = 0; k < g.Nx; ++k) hn[k] = h[k] * m[k];
        hn = inverse_transform(std::move(hn), g);
        std::copy(hn.begin(), hn.end(), out.row(n));
    }
    return out;
}

/// A(x) = (1/2pi) int e^{ix xi + i xi^3} d xi = 3^{-1/3} Ai(3^{-1/3} x).
inline double airy_function(double x) {
    require(std::abs(x) <= 50, "airy_function: |x| must be at most 50");
    const double c = std::cbrt(1.0 / 3);
    return c * boost::math::airy_ai(c * x);
}

inline double airy_function_prime(double x) {
    require(std::abs(x) <= 50, "airy_function_prime: |x| must be at most 50");
    const double c = std::cbrt(1.0 / 3);
    return c * c * boost::math::airy_ai_prime(c * x);
}

// ------------------------------------------------------ exponential integrator

/// Per-mode weights for E(t) = int_0^t e^{-i omega (t - s)} d(s) ds with d piecewise linear:
/// E_{n+1} = decay E_n + w_old d_n + w_new d_{n+1}. Exact for piecewise-linear d.
struct ExpStep {
    cplx decay, w_old, w_new;

    ExpStep(double omega, double h) {
        cplx z = I * (omega * h);
        cplx e = std::exp(-z), p1, p2;
        if (std::abs(z) < 0.5) {
            // p1 = sum (-z)^k/(k+1)!, p2 = sum (-z)^k/(k! (k+2))
            cplx term = 1.0;
            for (int k = 0; k < 24; ++k) {
                p1 += term / double(k + 1);
                p2 += term / double(k + 2);
                term *= -z / double(k + 1);
            }
        } else {
            p1 = (1.0 - e) / z;
            p2 = (1.0 - e - z * e) / (z * z);
        }
        decay = e;
        w_old = h * p2;
        w_new = h * (p1 - p2);
    }
};

/// Rows of spatial spectra in FFT order, one per time node.
inline std::vector<cvec> spectra(const SampledField& w) {
    std::vector<cvec> out(w.nt);
    for (int n = 0; n < w.nt; ++n) out[n] = forward_transform(w.row(n), w.grid);
    return out;
}

inline SampledField from_spectra(const std::vector<cvec>& h, const SpaceTimeGrid& g, FieldKind kind) {
    SampledField out(g, kind, int(h.size()));
    for (size_t n = 0; n < h.size(); ++n) {
        auto v = inverse_transform(h[n], g);
        std::copy(v.begin(), v.end(), out.row(int(n)));
    }
    return out;
}

/// Time convolution with e^{-i omega t} per mode, in place on spectra.
inline void exp_convolve(PropagatorKind kind, std::vector<cvec>& h, const SpaceTimeGrid& g) {
    const int nt = int(h.size());
    for (int k = 0; k < g.Nx; ++k) {
        ExpStep st(dispersion(kind, g, k), g.dt);
        cplx E = 0, prev = h[0][k];
        h[0][k] = 0;
        for (int n = 1; n < nt; ++n) {
            cplx cur = h[n][k];
            E = st.decay * E + st.w_old * prev + st.w_new * cur;
            h[n][k] = E;
            prev = cur;
        }
    }
}

/// S w = -i int_0^t e^{i(t-s) d_x^2} w(s) ds.
inline SampledField duhamel_S(const SampledField& w) {
    require(w.nt == w.grid.Nt, "duhamel_S needs a full space-time field");
    auto h = spectra(w);
    exp_convolve(PropagatorKind::schrodinger, h, w.grid);
    for (auto& row : h)
        for (auto& z : row) z *= -I;
    return from_spectra(h, w.grid, FieldKind::schrodinger);
}

/// K w = int_0^t e^{-(t-s) d_x^3} w(s) ds.
inline SampledField duhamel_K(const SampledField& w) {
    require(w.nt == w.grid.Nt, "duhamel_K needs a full space-time field");
    auto h = spectra(w);
    exp_convolve(PropagatorKind::airy, h, w.grid);
    auto out = from_spectra(h, w.grid, w.kind == FieldKind::kdv ? FieldKind::kdv : FieldKind::generic);
    return out;
}

}  // namespace skdv
