#pragma once

#include <utility>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "skdv/fracint.hpp"
#include "skdv/propagators.hpp"

namespace skdv {

enum class Equation { schrodinger, kdv };

/// plus convolves with x_-^{lambda-1}/Gamma(lambda), minus with x_+^{lambda-1}/Gamma(lambda).
enum class Family { plus, minus };

struct ForcingLambda {
    double lambda = 0;
    Family sign = Family::minus;
    Equation equation = Equation::schrodinger;
};

inline void check_lambda(const ForcingLambda& c) {
    require(c.equation == Equation::schrodinger ? c.lambda > -2 : c.lambda > -3, "lambda out of range");
    require(c.lambda <= 1, "lambda out of range");
}

/// Left cutoff (1 - psi(t / 4dt)): pushes the numerical support strictly inside t > 0.
inline TimeTrace surrogate(const TimeTrace& f) {
    TimeTrace out = f;
    out.support = Support::nonnegative;
    const double eps = 4 * f.dt();
    for (int n = 0; n < f.grid.Nt; ++n) out.values[n] *= 1 - cutoff_psi(f.grid.t(n) / eps);
    return out;
}

namespace detail {

// Decay rate of the closed-form profiles used to split off the non-smooth part of a field.
inline constexpr double reg_mu = 2.0;

// sum_{j<4} (a)_j mu^j/j! (mu + sigma i xi)^{-q-a-j}, which matches (mu + sigma i xi)^{-q} (sigma i xi)^{-a}
// up to O(xi^{-q-a-4}).
inline cvec reg_spectrum(double q, double a, int sigma, const SpaceTimeGrid& g) {
    cvec out(g.Nx);
    for (int k = 0; k < g.Nx; ++k) {
        if (k == g.nyquist_index()) continue;
        cplx z(reg_mu, sigma * g.xi(k));
        double c = 1;
        for (int j = 0; j < 4; ++j) {
            out[k] += c * std::pow(z, -q - a - j);
            c *= (a + j) * reg_mu / (j + 1);
        }
    }
    return out;
}

// Periodized inverse transform of reg_spectrum: sum_j (a)_j mu^j/j! x_sigma^{p_j} e^{-mu |x|}/Gamma(p_j + 1),
// p_j = q + a + j - 1. At x = 0 a step takes its midpoint and an integrable singularity is dropped.
inline cvec reg_profile(double q, double a, int sigma, const SpaceTimeGrid& g) {
    cvec out(g.Nx);
    for (int j0 = 0; j0 < g.Nx; ++j0) {
        double acc = 0;
        for (int m = -2; m <= 2; ++m) {
            double x = sigma * (g.x(j0) + 2 * g.L * m);
            if (x < 0) continue;
            double c = 1;
            for (int j = 0; j < 4; ++j) {
                double p = q + a + j - 1;
                if (x > 0)
                    acc += c * std::exp(p * std::log(x) - reg_mu * x - std::lgamma(p + 1)) * (std::tgamma(p + 1) < 0 ? -1 : 1);
                else if (p == 0)
                    acc += c * 0.5;
                c *= (a + j) * reg_mu / (j + 1);
            }
        }
        out[j0] = acc;
    }
    return out;
}

// Spectral symbol (mu + sigma i xi)^{-q} (sigma i xi)^p, averaged over +-K at Nyquist.
inline cvec symbol_values(double q, int p, int sigma, const SpaceTimeGrid& g) {
    cvec m(g.Nx);
    for (int k = 0; k < g.Nx; ++k) {
        auto at = [&](double xi) { return std::pow(cplx(reg_mu, sigma * xi), -q) * std::pow(cplx(0, sigma * xi), p); };
        if (k == g.nyquist_index())
            m[k] = 0.5 * (at(g.xi(k)) + at(-g.xi(k)));
        else
            m[k] = at(g.xi(k));
    }
    return m;
}

// c0 ph S(xi) int_0^t e^{-i omega (t-s)} d(s) ds with S = (mu + sigma i xi)^{-q} (sigma i xi)^p. The part of the
// spectrum decaying like a power of xi is subtracted and added back in physical space.
inline SampledField boundary_field(Equation eq, double q, int p, int sigma, cplx ph, const cvec& d, const SpaceTimeGrid& g) {
    const bool schr = eq == Equation::schrodinger;
    const auto kind = schr ? PropagatorKind::schrodinger : PropagatorKind::airy;
    const cplx c0 = schr ? 2.0 * std::exp(I * (pi / 4)) : cplx(3.0);
    const int Nt = g.Nt;
    const cvec dp = fd_derivative(d, g.dt, 1);

    // E ~ d/(i omega) - d'/(i omega)^2, written as multiples of (sigma i xi)^{-n}
    struct Term {
        double n;
        cplx scale;
        const cvec* src;
    };
    std::vector<Term> terms;
    if (schr)
        terms = {{2, c0 * ph * I, &d}, {4, c0 * ph, &dp}};
    else
        terms = {{3, c0 * ph * double(sigma), &d}, {6, -c0 * ph, &dp}};
    std::vector<cvec> reg, phys;
    for (auto& t : terms) {
        require(t.n - p > 0, "unsupported forcing order");
        reg.push_back(reg_spectrum(q, t.n - p, sigma, g));
        phys.push_back(reg_profile(q, t.n - p, sigma, g));
    }

    const cvec sym = symbol_values(q, p, sigma, g);
    std::vector<ExpStep> steps;
    steps.reserve(g.Nx);
    for (int k = 0; k < g.Nx; ++k) steps.emplace_back(dispersion(kind, g, k), g.dt);

    auto out = SampledField::full(g, schr ? FieldKind::schrodinger : (ph == 1.0 ? FieldKind::kdv : FieldKind::generic));
    cvec E(g.Nx), h(g.Nx);
    for (int n = 1; n < Nt; ++n) {
        for (int k = 0; k < g.Nx; ++k) {
            E[k] = steps[k].decay * E[k] + steps[k].w_old * d[n - 1] + steps[k].w_new * d[n];
            cplx r = c0 * ph * sym[k] * E[k];
            for (size_t i = 0; i < terms.size(); ++i) r -= terms[i].scale * (*terms[i].src)[n] * reg[i][k];
            h[k] = r;
        }
        h[g.nyquist_index()] = 0;
        cvec v = inverse_transform(h, g);
        for (int j = 0; j < g.Nx; ++j) {
            cplx acc = v[j];
            for (size_t i = 0; i < terms.size(); ++i) acc += terms[i].scale * (*terms[i].src)[n] * phys[i][j];
            out(j, n) = acc;
        }
    }
    return out;
}

// Weights W_m = int K(y) hat_m(y) dy for K(y) = y^{lambda-1}(1 - e^{-mu y})/Gamma(lambda), y > 0,
// hat_m the piecewise-linear basis function at m dx. Needs lambda > -1.
inline rvec tail_weights(double lambda, double dx, int M) {
    auto K = [&](double y) { return -std::pow(y, lambda - 1) * std::expm1(-reg_mu * y) / std::tgamma(lambda); };
    rvec W(M + 1);
    boost::math::quadrature::tanh_sinh<double> ts;
    for (int c = 0; c < M; ++c) {
        double a = c * dx, lo, hi;
        auto left = [&](double y) { return K(y) * (1 - (y - a) / dx); };
        auto right = [&](double y) { return K(y) * ((y - a) / dx); };
        if (c == 0) {
            // y = dx u^beta removes the y^lambda endpoint behaviour
            const double beta = 1 / (lambda + 1);
            auto phi = [&](double y) { return y > 0 ? -std::expm1(-reg_mu * y) / y : reg_mu; };
            auto sub = [&](double u, bool r) {
                double y = dx * std::pow(u, beta), w = y / dx;
                return std::pow(dx, lambda + 1) * beta * phi(y) / std::tgamma(lambda) * (r ? w : 1 - w);
            };
            lo = ts.integrate([&](double u) { return sub(u, false); }, 0.0, 1.0);
            hi = ts.integrate([&](double u) { return sub(u, true); }, 0.0, 1.0);
        } else {
            using GL = boost::math::quadrature::gauss<double, 10>;
            lo = GL::integrate(left, a, a + dx);
            hi = GL::integrate(right, a, a + dx);
        }
        W[c] += lo;
        W[c + 1] += hi;
    }
    W.resize(M);
    return W;
}

// (K * G)(x) = int_0^inf K(y) G(x - sigma y) dy row by row, with G taken as zero outside the grid.
inline SampledField tail_convolve(const SampledField& G, double lambda, int sigma) {
    const auto& g = G.grid;
    const int N = g.Nx, P = 2 * N;
    rvec W = tail_weights(lambda, g.dx, N);
    cvec Wh(P);
    for (int m = 0; m < N; ++m) Wh[m] = W[m];
    fft::execute(Wh.data(), P, -1);
    SampledField out(g, G.kind, G.nt);
    cvec buf(P);
    for (int n = 0; n < G.nt; ++n) {
        std::fill(buf.begin(), buf.end(), cplx(0));
        for (int j = 0; j < N; ++j) buf[j] = G(sigma > 0 ? j : N - 1 - j, n);
        fft::execute(buf.data(), P, -1);
        for (int k = 0; k < P; ++k) buf[k] *= Wh[k] / double(P);
        fft::execute(buf.data(), P, +1);
        for (int j = 0; j < N; ++j) out(sigma > 0 ? j : N - 1 - j, n) = buf[j];
    }
    return out;
}

inline void zero_before_support(cvec& d, const cvec& f) {
    for (size_t n = 0; n < f.size() && f[n] == cplx(0); ++n) d[n] = 0;
}

}  // namespace detail

/// Forcing operator of order lambda for either equation; lambda = 0 gives L or V.
/// The kernel x_pm^{lambda-1}/Gamma(lambda) is split into an exponentially damped part, applied as the
/// symbol (mu + sigma i xi)^{-lambda}, and a smooth slowly decaying rest, applied by convolution in x.
inline SampledField forcing_field(const TimeTrace& f, const ForcingLambda& cfg) {
    require(f.support == Support::nonnegative, "boundary forcing needs a nonnegative-support trace");
    check_lambda(cfg);
    const auto& g = f.grid;
    const bool schr = cfg.equation == Equation::schrodinger;
    const double lam = cfg.lambda;
    const int sigma = cfg.sign == Family::minus ? 1 : -1;
    const cplx ph = (!schr && cfg.sign == Family::plus) ? std::exp(I * (pi * lam)) : cplx(1.0);
    const bool integer = lam == std::round(lam);
    require(integer || lam > -2, "lambda out of range");

    cvec d = rl_apply(f.values, g.dt, schr ? -(1 + lam) / 2 : -(2 + lam) / 3);
    detail::zero_before_support(d, f.values);
    if (integer) return detail::boundary_field(cfg.equation, 0.0, int(-lam), sigma, ph, d, g);

    // below -1 the kernel is sigma d_x of the kernel of order lambda + 1
    const bool shifted = lam < -1;
    const double q = shifted ? lam + 1 : lam;
    auto out = detail::boundary_field(cfg.equation, q, shifted ? 1 : 0, sigma, ph, d, g);
    auto G = detail::boundary_field(cfg.equation, 0.0, 0, 1, 1.0, d, g);
    auto R = detail::tail_convolve(G, q, sigma);
    for (int n = 0; n < g.Nt; ++n)
        for (int j = 0; j < g.Nx; ++j) {
            cplx r = R(j, n);
            if (shifted) {
                int a = std::max(j - 1, 0), b = std::min(j + 1, g.Nx - 1);
                r = double(sigma) * (R(b, n) - R(a, n)) / ((b - a) * g.dx);
            }
            out(j, n) += ph * r;
        }
    return out;
}

/// L f: Schrodinger boundary forcing with trace f.
inline SampledField L_forcing(const TimeTrace& f) { return forcing_field(f, {0.0, Family::minus, Equation::schrodinger}); }

inline SampledField L_lambda(const TimeTrace& f, const ForcingLambda& cfg) {
    require(cfg.equation == Equation::schrodinger, "L_lambda needs a Schrodinger configuration");
    require(cfg.lambda > -2 && cfg.lambda <= 1, "lambda out of range");
    return forcing_field(f, cfg);
}

/// V g: KdV boundary forcing with trace g.
inline SampledField V_forcing(const TimeTrace& g) { return forcing_field(g, {0.0, Family::minus, Equation::kdv}); }

/// V^{-1} g = d_x V I_{1/3} g.
inline SampledField V_inv(const TimeTrace& g) { return forcing_field(g, {-1.0, Family::minus, Equation::kdv}); }

/// V^lambda_pm. The plus family carries the phase e^{i pi lambda}, so V_+^0 = V and V_+^{-1} = V^{-1}.
inline SampledField V_lambda(const TimeTrace& g, const ForcingLambda& cfg) {
    require(cfg.equation == Equation::kdv, "V_lambda needs a KdV configuration");
    require(cfg.lambda > -2 && cfg.lambda <= 1, "lambda out of range");
    return forcing_field(g, cfg);
}

// ------------------------------------------------------------ boundary values

/// One-sided limit at x = 0 of the order-th x-derivative, from nodes 0..order+4 on the given side.
/// right uses x >= 0, left uses x <= 0. With skip_zero the node at x = 0 is left out (value jumps).
inline cplx one_sided_limit(const SampledField& w, int n, Side side, int order = 0, bool skip_zero = false) {
    const auto& g = w.grid;
    const int z = g.zero_index(), p = order + 5, s = side == Side::right ? 1 : -1, o = skip_zero ? 1 : 0;
    rvec x(p);
    for (int i = 0; i < p; ++i) x[i] = s * (i + o) * g.dx;
    auto wts = detail::fd_weights(0.0, x, order);
    cplx acc = 0;
    for (int i = 0; i < p; ++i) acc += wts[i] * w(z + s * (i + o), n);
    return acc;
}

/// Time trace of one_sided_limit.
inline TimeTrace boundary_trace(const SampledField& w, Side side, int order = 0, bool skip_zero = false) {
    TimeTrace out(w.grid, Support::nonnegative);
    for (int n = 0; n < w.nt; ++n) out.values[n] = one_sided_limit(w, n, side, order, skip_zero);
    return out;
}

/// Value at the x = 0 node.
inline TimeTrace trace_at_zero(const SampledField& w) {
    TimeTrace out(w.grid, Support::nonnegative);
    for (int n = 0; n < w.nt; ++n) out.values[n] = w(w.grid.zero_index(), n);
    return out;
}

// ------------------------------------------------------- left-side assembly

/// (h1, h2) for v = V h1 + V^{-1} h2 with v(0,t) = g - trace and d_x v(0-,t) = h - dtrace.
inline std::pair<TimeTrace, TimeTrace> assemble_left_kdv_constant(const TimeTrace& g_target, const TimeTrace& h_target,
                                                                  const TimeTrace& v0_trace, const TimeTrace& v0_dtrace) {
    const auto& grid = g_target.grid;
    TimeTrace G(grid, Support::nonnegative), H(grid, Support::nonnegative);
    for (int n = 0; n < grid.Nt; ++n) {
        G.values[n] = g_target.values[n] - v0_trace.values[n];
        H.values[n] = h_target.values[n] - v0_dtrace.values[n];
    }
    auto IH = frac_integral(H, 1.0 / 3);
    TimeTrace h1(grid, Support::nonnegative), h2(grid, Support::nonnegative);
    for (int n = 0; n < grid.Nt; ++n) {
        h1.values[n] = (2.0 * G.values[n] - IH.values[n]) / 3.0;
        h2.values[n] = (-G.values[n] - IH.values[n]) / 3.0;
    }
    return {h1, h2};
}

using Mat2 = std::array<std::array<double, 2>, 2>;

/// Rows: traces of V_-^{lam} and of d_x V_-^{lam} I_{1/3} at x = 0.
inline Mat2 left_sine_matrix(double l2, double l3) {
    auto up = [](double l) { return 2 * std::sin(pi * l / 3 + pi / 6); };
    auto dn = [](double l) { return 2 * std::sin(pi * l / 3 - pi / 6); };
    return {{{up(l2), up(l3)}, {dn(l2), dn(l3)}}};
}

inline Mat2 left_matrix_A(double l2, double l3) {
    double r = std::remainder(l2 - l3, 3.0);
    require(std::abs(r) > 1e-12, "determinant vanishes: lambda2 - lambda3 is a multiple of 3");
    auto M = left_sine_matrix(l2, l3);
    double det = M[0][0] * M[1][1] - M[0][1] * M[1][0];
    return {{{M[1][1] / det, -M[0][1] / det}, {-M[1][0] / det, M[0][0] / det}}};
}

/// (h2, h3) for v = V_-^{l2} h2 + V_-^{l3} h3 with the same targets as the constant case.
inline std::pair<TimeTrace, TimeTrace> assemble_left_kdv_lambda(double l2, double l3, const TimeTrace& g_target,
                                                                const TimeTrace& h_target, const TimeTrace& v0_trace,
                                                                const TimeTrace& v0_dtrace) {
    require(l2 > -1 && l2 < 1 && l3 > -1 && l3 < 1, "lambda2, lambda3 must lie in (-1, 1)");
    auto A = left_matrix_A(l2, l3);
    const auto& grid = g_target.grid;
    TimeTrace H(grid, Support::nonnegative);
    for (int n = 0; n < grid.Nt; ++n) H.values[n] = h_target.values[n] - v0_dtrace.values[n];
    auto IH = frac_integral(H, 1.0 / 3);
    TimeTrace h2(grid, Support::nonnegative), h3(grid, Support::nonnegative);
    for (int n = 0; n < grid.Nt; ++n) {
        cplx G = g_target.values[n] - v0_trace.values[n];
        h2.values[n] = A[0][0] * G + A[0][1] * IH.values[n];
        h3.values[n] = A[1][0] * G + A[1][1] * IH.values[n];
    }
    return {h2, h3};
}

}  // namespace skdv
