#pragma once

// Picard iteration of the contraction maps for the coupled Schrodinger-KdV boundary value problems,
// linear half-line solves and the KdV flux identities.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skdv/bourgain.hpp"
#include "skdv/forcing.hpp"
#include "skdv/propagators.hpp"

namespace skdv {

struct IBVPData {
    Side side = Side::right;
    cvec u0, v0;  // half-line samples, restrict_half_line layout
    TimeTrace f, g;
    std::optional<TimeTrace> h;  // left side only
    double alpha_c = 0, beta_c = 0, gamma_c = 0;
    RegularityPair reg;
};

/// Data after validation, with the region and trace exponents attached.
struct ValidatedData {
    IBVPData data;
    SpaceTimeGrid grid;
    Region region;
    double f_exponent = 0, g_exponent = 0, h_exponent = 0;
};

enum class Variant { standard, small_data };

inline std::string to_string(Variant v) { return v == Variant::standard ? "standard" : "small-data"; }

struct SolverConfig {
    SpaceTimeGrid grid;
    double T_local = 0.25;
    double tol = 1e-10;
    int max_iter = 60;
    EstimateParams params;
    double delta = 1.0;  // smallness gate on the KdV data
    int max_halvings = 10;
    std::optional<Variant> variant;  // default follows the region
    std::optional<double> lambda1, lambda2, lambda3;
};

struct IterationReport {
    int iterates = 0;
    bool converged = false;
    std::vector<double> residual_history;
    double contraction_ratio = 0;
    double T_local = 0;
    int halvings = 0;
    std::map<std::string, double> trace_errors;
    std::map<std::string, double> pde_residuals;
    std::map<std::string, double> constants;
    double M1 = 0, M2 = 0;
    double max_imag_ratio = 0;  // of the v iterates
    std::string region, variant, dominant_term;
};

// ------------------------------------------------------------------ validation

namespace detail {

inline cplx half_value_at_zero(const cvec& half, Side side) { return side == Side::right ? half.front() : half.back(); }

inline double max_imag(const cvec& v) {
    double m = 0;
    for (auto& z : v) m = std::max(m, std::abs(z.imag()));
    return m;
}

}  // namespace detail

inline ValidatedData validate(const IBVPData& d) {
    const auto& g = d.f.grid;
    const int z = g.zero_index();
    const size_t half = d.side == Side::right ? size_t(g.Nx - z) : size_t(z + 1);
    require(d.g.grid == g, "f and g must live on the same grid");
    require(d.u0.size() == half && d.v0.size() == half, "u0 and v0 must be half-line samples of the grid");
    require(d.f.support == Support::nonnegative && d.g.support == Support::nonnegative,
            "boundary traces need nonnegative support");
    if (d.side == Side::left) {
        require(d.h.has_value(), "left side requires the trace h");
        require(d.h->grid == g && d.h->support == Support::nonnegative, "h must be a nonnegative-support trace on the grid");
    } else {
        require(!d.h.has_value(), "right side takes no trace h");
    }
    auto realness = [](const cvec& v, const char* name) {
        require(detail::max_imag(v) <= 1e-12 * std::max(1.0, max_abs(v)), std::string(name) + " must be real");
    };
    realness(d.v0, "v0");
    realness(d.g.values, "g");
    if (d.h) realness(d.h->values, "h");

    const double s = d.reg.s, k = d.reg.k;
    if (s > 0.5)
        require(std::abs(detail::half_value_at_zero(d.u0, d.side) - d.f.values[0]) <= 1e-8, "compatibility u0(0)=f(0)");
    if (k > 0.5)
        require(std::abs(detail::half_value_at_zero(d.v0, d.side) - d.g.values[0]) <= 1e-8, "compatibility v0(0)=g(0)");

    ValidatedData out{d, g, classify_region(d.side, s, k), d.reg.schrodinger_trace(), d.reg.kdv_trace(), d.reg.kdv_dtrace()};
    if (out.region.beta_zero_required)
        require(d.beta_c == 0, "beta must vanish in region " + to_string(out.region.tag));
    return out;
}

/// KdV data size compared with the smallness gate.
inline double kdv_data_norm(const ValidatedData& vd) {
    const auto& d = vd.data;
    double n = half_line_norm(d.v0, vd.grid, d.side, d.reg.k) + time_sobolev_norm(d.g.values, vd.grid.dt, vd.g_exponent);
    if (d.h) n += time_sobolev_norm(d.h->values, vd.grid.dt, vd.h_exponent);
    return n;
}

inline void validate_config(const SolverConfig& c, const SpaceTimeGrid& g) {
    require(c.grid == g, "solver grid differs from the data grid");
    require(c.tol > 0, "tol must be positive");
    require(c.max_iter >= 1, "max_iter must be at least 1");
    require(c.T_local > 0 && c.T_local <= g.T_max / 4, "T_local must lie in (0, T_max/4]");
    require(c.T_local <= 1, "T_local must not exceed 1");
}

// ------------------------------------------------------------------ nonlinearity

namespace detail {

/// Zeroes the top third of the spatial modes of each row, optionally differentiating.
inline void dealias(SampledField& w, bool derivative) {
    const auto& g = w.grid;
    const int cut = g.Nx / 3;
    for (int n = 0; n < w.nt; ++n) {
        cvec h = forward_transform(w.row(n), g);
        for (int k = 0; k < g.Nx; ++k) {
            int m = k < g.Nx / 2 ? k : k - g.Nx;
            if (std::abs(m) > cut || k == g.nyquist_index()) h[k] = 0;
            else if (derivative) h[k] *= I * g.xi(k);
        }
        auto v = inverse_transform(h, g);
        std::copy(v.begin(), v.end(), w.row(n));
    }
}

inline rvec time_cutoff(const SpaceTimeGrid& g, double T) {
    rvec c(g.Nt);
    for (int n = 0; n < g.Nt; ++n) c[n] = T > 0 ? cutoff_psi_T(g.t(n), T) : cutoff_psi(g.t(n));
    return c;
}

inline void scale_rows(SampledField& w, const rvec& c) {
    for (int n = 0; n < w.nt; ++n)
        for (int j = 0; j < w.grid.Nx; ++j) w(j, n) *= c[n];
}

inline double spacetime_l2(const SampledField& w) {
    return l2(w.values) * std::sqrt(w.grid.dx * w.grid.dt);
}

}  // namespace detail

/// Terms of the Duhamel right-hand sides, kept apart for the divergence diagnostic.
struct NonlinearTerms {
    SampledField coupling_uv, cubic, kdv_self, coupling_dx;  // alpha u v, beta |u|^2 u, -1/2 d_x v^2, gamma d_x |u|^2
};

inline NonlinearTerms nonlinear_terms(const SampledField& u, const SampledField& v, double alpha, double beta,
                                      double gamma, double T, Variant variant) {
    const auto& g = u.grid;
    const rvec cT = detail::time_cutoff(g, T);
    NonlinearTerms t{SampledField::full(g), SampledField::full(g), SampledField::full(g), SampledField::full(g)};
    for (int n = 0; n < g.Nt; ++n)
        for (int j = 0; j < g.Nx; ++j) {
            cplx a = u(j, n), b = v(j, n);
            double uu = std::norm(a);
            t.coupling_uv(j, n) = alpha * a * b;
            t.cubic(j, n) = beta * uu * a;
            t.kdv_self(j, n) = -0.5 * b * b;
            // the small-data construction cuts u before squaring and leaves v^2 uncut
            t.coupling_dx(j, n) = gamma * (variant == Variant::small_data ? cT[n] * cT[n] * uu : uu);
        }
    detail::dealias(t.coupling_uv, false);
    detail::dealias(t.cubic, false);
    detail::dealias(t.kdv_self, true);
    detail::dealias(t.coupling_dx, true);
    detail::scale_rows(t.coupling_uv, cT);
    detail::scale_rows(t.cubic, cT);
    if (variant == Variant::standard) {
        detail::scale_rows(t.kdv_self, cT);
        detail::scale_rows(t.coupling_dx, cT);
    }
    return t;
}

/// Name of the term with the largest space-time L^2 norm.
inline std::string dominant_term(const NonlinearTerms& t) {
    std::pair<double, std::string> c[] = {{detail::spacetime_l2(t.coupling_uv), "coupling alpha*u*v"},
                                          {detail::spacetime_l2(t.cubic), "cubic beta*|u|^2*u"},
                                          {detail::spacetime_l2(t.kdv_self), "KdV self-interaction d_x(v^2)/2"},
                                          {detail::spacetime_l2(t.coupling_dx), "coupling gamma*d_x|u|^2"}};
    return std::max_element(std::begin(c), std::end(c))->second;
}

// ------------------------------------------------------------------ boundary defects

/// Which boundary operators a solve uses.
struct Construction {
    Variant variant = Variant::standard;
    double lambda1 = 0, lambda2 = 0, lambda3 = 0;
    bool left_lambda = false;  // V_-^{l2}, V_-^{l3} instead of V, V^{-1}
};

struct BoundaryDefects {
    TimeTrace h1, h2;
    std::optional<TimeTrace> h3;
};

/// Defects between the prescribed traces and the traces of the non-forcing parts u_nf, v_nf.
/// Right: scalar defects. Left: the KdV pair goes through the 2x2 assembly.
inline BoundaryDefects reconstruct_boundary_defect(const ValidatedData& vd, const SampledField& u_nf,
                                                   const SampledField& v_nf, const Construction& c) {
    const auto& g = vd.grid;
    const auto& d = vd.data;
    TimeTrace h1(g, Support::nonnegative), G(g, Support::nonnegative), H(g, Support::nonnegative);
    const int z = g.zero_index();
    for (int n = 0; n < g.Nt; ++n) {
        double p = cutoff_psi(g.t(n));
        h1.values[n] = p * d.f.values[n] - u_nf(z, n);
        G.values[n] = p * d.g.values[n] - v_nf(z, n);
        if (d.h) H.values[n] = p * d.h->values[n] - one_sided_limit(v_nf, n, Side::left, 1);
    }
    h1 = surrogate(h1);
    G = surrogate(G);
    if (d.side == Side::right) return {h1, G, std::nullopt};
    H = surrogate(H);
    TimeTrace zero(g, Support::nonnegative);
    auto [a, b] = c.left_lambda ? assemble_left_kdv_lambda(c.lambda2, c.lambda3, G, H, zero, zero)
                                : assemble_left_kdv_constant(G, H, zero, zero);
    return {h1, a, b};
}

namespace detail {

inline void add_scaled(SampledField& acc, const SampledField& w, cplx c = 1.0) {
    for (size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += c * w.values[i];
}

/// Sum of the boundary forcing fields for the given defects.
inline std::pair<SampledField, SampledField> forcing_fields(Side side, const BoundaryDefects& b, const Construction& c) {
    const Family fam = side == Side::right ? Family::plus : Family::minus;
    auto fu = forcing_field(b.h1, {c.lambda1, fam, Equation::schrodinger});
    for (auto& z : fu.values) z *= std::exp(-I * (c.lambda1 * pi / 4));
    SampledField fv;
    if (side == Side::right) {
        fv = forcing_field(b.h2, {c.lambda2, Family::plus, Equation::kdv});
        const cplx ph = std::exp(-I * (pi * c.lambda2));
        for (auto& z : fv.values) z *= ph;
    } else if (c.left_lambda) {
        fv = forcing_field(b.h2, {c.lambda2, Family::minus, Equation::kdv});
        add_scaled(fv, forcing_field(*b.h3, {c.lambda3, Family::minus, Equation::kdv}));
    } else {
        fv = V_forcing(b.h2);
        add_scaled(fv, V_inv(*b.h3));
    }
    return {std::move(fu), std::move(fv)};
}

inline double sup_sobolev(const SampledField& w, double s) {
    double m = 0;
    for (int n = 0; n < w.nt; ++n) m = std::max(m, sobolev_norm(w, s, n));
    return m;
}

inline double sup_sobolev_diff(const SampledField& a, const SampledField& b, double s) {
    double m = 0;
    cvec r(a.grid.Nx);
    for (int n = 0; n < a.nt; ++n) {
        for (int j = 0; j < a.grid.Nx; ++j) r[j] = a(j, n) - b(j, n);
        m = std::max(m, sobolev_norm(r, a.grid, s));
    }
    return m;
}

/// Rows low-passed by e^{-(xi/xc)^2} and differentiated order times, spectrally.
inline SampledField low_pass(const SampledField& w, double xc, int order) {
    const auto& g = w.grid;
    cvec sym(g.Nx);
    for (int k = 0; k < g.Nx; ++k) {
        double xi = g.xi(k);
        sym[k] = std::exp(-(xi / xc) * (xi / xc)) * std::pow(I * xi, order);
        if (k == g.nyquist_index()) sym[k] = 0;
    }
    SampledField out = w;
    for (int n = 0; n < w.nt; ++n) {
        cvec h = forward_transform(w.row(n), g);
        for (int k = 0; k < g.Nx; ++k) h[k] *= sym[k];
        auto v = inverse_transform(h, g);
        std::copy(v.begin(), v.end(), out.row(n));
    }
    return out;
}

inline bool interior_node(const SpaceTimeGrid& g, Side side, int j) {
    double x = g.x(j);
    double a = side == Side::right ? x : -x;
    return a >= 2 && a <= g.L / 2;
}

// Relative L^2(0, t_end) mismatch; absolute when the target vanishes.
inline double rel_time_l2(const cvec& got, const cvec& want, int n_end, double dt) {
    double e = 0, r = 0;
    for (int n = 0; n <= n_end; ++n) {
        e += std::norm(got[n] - want[n]);
        r += std::norm(want[n]);
    }
    return r > 0 ? std::sqrt(e / r) : std::sqrt(e * dt);
}

inline int last_index_before(const SpaceTimeGrid& g, double T) {
    return std::min(g.Nt - 1, int(std::floor(T / g.dt + 1e-9)));
}

}  // namespace detail

// ------------------------------------------------------------------ residuals

/// Interior residuals of both equations on 2 <= |x| <= L/2 of the half-line and 0 < t < T, relative to the
/// time-derivative term. The equations are tested on the band |xi| <~ 4: each term is low-passed in x first, since
/// the boundary sends grid-scale waves into the interior whose frequencies central time differences cannot resolve.
/// Pass nullptr to skip an equation; linear drops d_x(v^2)/2.
inline std::pair<double, double> pde_residuals(const SampledField* u, const SampledField* v, Side side, double alpha,
                                               double beta, double gamma, double T, bool linear = false) {
    constexpr double xc = 4;
    const auto& g = u ? u->grid : v->grid;
    const int nmax = std::min(g.Nt - 2, detail::last_index_before(g, T) - 1);
    SampledField Pu, D2u, PNu, Pv, D3v, DNv;
    if (u) {
        SampledField nu = *u;
        for (size_t i = 0; i < nu.values.size(); ++i) {
            cplx a = u->values[i];
            nu.values[i] = alpha * a * (v ? v->values[i] : cplx(0)) + beta * std::norm(a) * a;
        }
        Pu = detail::low_pass(*u, xc, 0);
        D2u = detail::low_pass(*u, xc, 2);
        PNu = detail::low_pass(nu, xc, 0);
    }
    if (v) {
        SampledField nv = *v;
        for (size_t i = 0; i < nv.values.size(); ++i) {
            cplx b = v->values[i];
            nv.values[i] = (linear ? cplx(0) : 0.5 * b * b) - (u ? gamma * std::norm(u->values[i]) : 0.0);
        }
        Pv = detail::low_pass(*v, xc, 0);
        D3v = detail::low_pass(*v, xc, 3);
        DNv = detail::low_pass(nv, xc, 1);
    }
    double ru = 0, nu = 0, rv = 0, nv = 0;
    for (int n = 1; n <= nmax; ++n)
        for (int j = 0; j < g.Nx; ++j) {
            if (!detail::interior_node(g, side, j)) continue;
            if (u) {
                cplx dt = I * (Pu(j, n + 1) - Pu(j, n - 1)) / (2 * g.dt);
                ru += std::norm(dt + D2u(j, n) - PNu(j, n));
                nu += std::norm(dt);
            }
            if (v) {
                cplx dt = (Pv(j, n + 1) - Pv(j, n - 1)) / (2 * g.dt);
                rv += std::norm(dt + D3v(j, n) + DNv(j, n));
                nv += std::norm(dt);
            }
        }
    return {nu > 0 ? std::sqrt(ru / nu) : 0.0, nv > 0 ? std::sqrt(rv / nv) : 0.0};
}

// ------------------------------------------------------------------ linear solves

struct LinearOptions {
    double lambda1 = 0;
    std::optional<std::pair<double, double>> left_lambdas;  // V_-^{l2}, V_-^{l3} instead of V, V^{-1}
};

struct LinearSolution {
    SampledField field;  // whole line
    IterationReport report;
};

/// Free evolution of the extended datum plus the boundary forcing of the trace defect.
inline LinearSolution solve_linear(Side side, Equation eq, const ValidatedData& vd, const LinearOptions& opt = {}) {
    const auto& g = vd.grid;
    const auto& d = vd.data;
    require(d.side == side, "side does not match the data");
    const bool schr = eq == Equation::schrodinger;
    cvec ext = extend_half_line(schr ? d.u0 : d.v0, g, side);
    auto free = free_evolution(schr ? PropagatorKind::schrodinger : PropagatorKind::airy, ext, g);

    Construction c;
    c.lambda1 = opt.lambda1;
    if (opt.left_lambdas) {
        c.left_lambda = true;
        std::tie(c.lambda2, c.lambda3) = *opt.left_lambdas;
    }
    auto b = reconstruct_boundary_defect(vd, free, free, c);
    auto [fu, fv] = detail::forcing_fields(side, b, c);
    SampledField out = free;
    detail::add_scaled(out, schr ? fu : fv);
    out.kind = schr ? FieldKind::schrodinger : FieldKind::kdv;

    LinearSolution sol{std::move(out), {}};
    auto& r = sol.report;
    r.iterates = 1;
    r.converged = true;
    r.T_local = g.T_max;
    r.region = to_string(vd.region.tag);
    r.variant = "linear";
    const int ne = g.Nt - 1;
    if (schr) {
        r.trace_errors["u"] = detail::rel_time_l2(trace_at_zero(sol.field).values, d.f.values, ne, g.dt);
        r.pde_residuals["schrodinger"] = pde_residuals(&sol.field, nullptr, side, 0, 0, 0, g.T_max, true).first;
    } else {
        r.trace_errors["v"] = detail::rel_time_l2(trace_at_zero(sol.field).values, d.g.values, ne, g.dt);
        if (side == Side::left)
            r.trace_errors["v_x"] =
                detail::rel_time_l2(boundary_trace(sol.field, Side::left, 1).values, d.h->values, ne, g.dt);
        r.pde_residuals["kdv"] = pde_residuals(nullptr, &sol.field, side, 0, 0, 0, g.T_max, true).second;
        r.max_imag_ratio = sol.field.imag_ratio();
    }
    return sol;
}

// ------------------------------------------------------------------ nonlinear solve

struct Solution {
    SampledField u, v;  // whole line; restrict with restrict_output
    IterationReport report;
};

/// Default construction for a region: small-data placement of the cutoff in Dt, Dt0 and the Et regions,
/// V_-^{l2}, V_-^{l3} on the left outside E and E0.
inline Construction default_construction(const ValidatedData& vd, const SolverConfig& cfg) {
    using R = RegionTag;
    const auto t = vd.region.tag;
    Construction c;
    const bool small = t == R::Dt || t == R::Dt0 || t == R::Et1 || t == R::Et2 || t == R::Et10 || t == R::Et20;
    c.variant = cfg.variant.value_or(small ? Variant::small_data : Variant::standard);
    c.lambda1 = cfg.lambda1.value_or(0.0);
    if (is_left_region(t) && t != R::E && t != R::E0) {
        c.left_lambda = true;
        c.lambda2 = cfg.lambda2.value_or(cfg.params.lambda2);
        c.lambda3 = cfg.lambda3.value_or(cfg.params.lambda3);
    } else {
        c.lambda2 = cfg.lambda2.value_or(0.0);
        c.lambda3 = cfg.lambda3.value_or(0.0);
    }
    return c;
}

namespace detail {

/// Operator constants measured on this grid: extension, group, boundary forcing, Duhamel.
inline std::map<std::string, double> calibrate_constants(const ValidatedData& vd) {
    const auto& g = vd.grid;
    const double s = vd.data.reg.s, k = vd.data.reg.k;
    std::map<std::string, double> c;
    c["extension_s"] = measure_extension_constant(g, s, 4, 11);
    c["extension_k"] = measure_extension_constant(g, k, 4, 13);

    cvec gauss(g.Nx);
    for (int j = 0; j < g.Nx; ++j) gauss[j] = std::exp(-g.x(j) * g.x(j));
    auto S0 = free_evolution(PropagatorKind::schrodinger, gauss, g);
    auto A0 = free_evolution(PropagatorKind::airy, gauss, g);
    c["group"] = std::max(sup_sobolev(S0, s) / sobolev_norm(gauss, g, s), sup_sobolev(A0, k) / sobolev_norm(gauss, g, k));

    TimeTrace p(g, Support::nonnegative);
    for (int n = 0; n < g.Nt; ++n) p.values[n] = g.t(n) * g.t(n) * std::exp(-g.t(n));
    p = surrogate(p);
    c["forcing_L"] = sup_sobolev(L_forcing(p), s) / time_sobolev_norm(p.values, g.dt, vd.f_exponent);
    c["forcing_V"] = sup_sobolev(V_forcing(p), k) / time_sobolev_norm(p.values, g.dt, vd.g_exponent);

    SampledField w = SampledField::full(g);
    double l1s = 0, l1k = 0;
    for (int n = 0; n < g.Nt; ++n) {
        double ps = cutoff_psi_T(g.t(n), g.T_max / 4);
        for (int j = 0; j < g.Nx; ++j) w(j, n) = ps * gauss[j];
        l1s += ps * sobolev_norm(gauss, g, s) * g.dt;
        l1k += ps * sobolev_norm(gauss, g, k) * g.dt;
    }
    c["duhamel"] = std::max(sup_sobolev(duhamel_S(w), s) / l1s, sup_sobolev(duhamel_K(w), k) / l1k);
    return c;
}

inline double fitted_ratio(const std::vector<double>& r) {
    // least-squares slope of log r over the positive entries after the first
    std::vector<std::pair<double, double>> pts;
    for (size_t i = 1; i < r.size(); ++i)
        if (r[i] > 0) pts.push_back({double(i), std::log(r[i])});
    if (pts.size() < 2) return 0;
    double mx = 0, my = 0;
    for (auto& [x, y] : pts) mx += x, my += y;
    mx /= pts.size();
    my /= pts.size();
    double sxy = 0, sxx = 0;
    for (auto& [x, y] : pts) sxy += (x - mx) * (y - my), sxx += (x - mx) * (x - mx);
    return std::exp(sxy / sxx);
}

}  // namespace detail

/// Fixed point of Lambda = (Lambda_1, Lambda_2) on whole-line fields.
inline Solution solve(const ValidatedData& vd, const SolverConfig& cfg) {
    const auto& g = vd.grid;
    const auto& d = vd.data;
    validate_config(cfg, g);
    if (vd.region.tag == RegionTag::none)
        throw ValidationError("(s,k) = (" + std::to_string(d.reg.s) + ", " + std::to_string(d.reg.k) +
                              ") lies in no admissible region on the " + to_string(d.side) + " half-line");
    if (vd.region.smallness_required) {
        double n = kdv_data_norm(vd);
        if (n > cfg.delta)
            throw ValidationError("smallness violated: KdV data norm " + std::to_string(n) + " exceeds delta = " +
                                  std::to_string(cfg.delta));
    }
    const Construction con = default_construction(vd, cfg);
    const double s = d.reg.s, k = d.reg.k;

    IterationReport rep;
    rep.region = to_string(vd.region.tag);
    rep.variant = to_string(con.variant);
    rep.constants = detail::calibrate_constants(vd);
    double c = 0;
    for (auto& [name, val] : rep.constants) c = std::max(c, val);
    rep.M1 = 2 * c * (half_line_norm(d.u0, g, d.side, s) + time_sobolev_norm(d.f.values, g.dt, vd.f_exponent));
    rep.M2 = 2 * c * kdv_data_norm(vd);

    const rvec psi = detail::time_cutoff(g, 0);
    auto U_free = free_evolution(PropagatorKind::schrodinger, extend_half_line(d.u0, g, d.side), g);
    auto V_free = free_evolution(PropagatorKind::airy, extend_half_line(d.v0, g, d.side), g);
    detail::scale_rows(U_free, psi);
    detail::scale_rows(V_free, psi);

    double T = cfg.T_local;
    // one application of Lambda; also returns the nonlinear terms of the input
    auto apply = [&](const SampledField& u, const SampledField& v, NonlinearTerms* terms) {
        auto nl = nonlinear_terms(u, v, d.alpha_c, d.beta_c, d.gamma_c, T, con.variant);
        SampledField wu = nl.coupling_uv, wv = nl.kdv_self;
        detail::add_scaled(wu, nl.cubic);
        detail::add_scaled(wv, nl.coupling_dx);
        SampledField un = U_free, vn = V_free;
        auto Su = duhamel_S(wu), Kv = duhamel_K(wv);
        detail::scale_rows(Su, psi);
        detail::scale_rows(Kv, psi);
        detail::add_scaled(un, Su);
        detail::add_scaled(vn, Kv);
        auto b = reconstruct_boundary_defect(vd, un, vn, con);
        auto [fu, fv] = detail::forcing_fields(d.side, b, con);
        detail::scale_rows(fu, psi);
        detail::scale_rows(fv, psi);
        detail::add_scaled(un, fu);
        detail::add_scaled(vn, fv);
        un.kind = FieldKind::schrodinger;
        vn.kind = FieldKind::kdv;
        if (terms) *terms = std::move(nl);
        return std::pair{std::move(un), std::move(vn)};
    };
    auto distance = [&](const SampledField& u1, const SampledField& v1, const SampledField& u0, const SampledField& v0) {
        return detail::sup_sobolev_diff(u1, u0, s) + detail::sup_sobolev_diff(v1, v0, k);
    };

    SampledField u, v;
    for (;;) {
        rep.residual_history.clear();
        rep.max_imag_ratio = 0;
        u = SampledField::full(g, FieldKind::schrodinger);
        v = SampledField::full(g, FieldKind::kdv);
        bool restart = false;
        int growing = 0;
        rep.converged = false;
        for (int it = 1; it <= cfg.max_iter; ++it) {
            NonlinearTerms terms;
            auto [un, vn] = apply(u, v, &terms);
            double r = distance(un, vn, u, v);
            double size = detail::sup_sobolev(un, s) + detail::sup_sobolev(vn, k);
            rep.max_imag_ratio = std::max(rep.max_imag_ratio, vn.imag_ratio());
            rep.residual_history.push_back(r);
            u = std::move(un);
            v = std::move(vn);
            rep.iterates = it;
            if (r <= cfg.tol * size || r == 0) {
                rep.converged = true;
                break;
            }
            const auto& h = rep.residual_history;
            const size_t m = h.size();
            // the first two iterations after Lambda(0) must contract
            if (m == 3 && (h[1] >= h[0] || h[2] >= h[1])) {
                restart = true;
                rep.dominant_term = dominant_term(terms);
                break;
            }
            growing = m >= 2 && h[m - 1] >= h[m - 2] ? growing + 1 : 0;
            if (growing >= 5)
                throw NonContractionError("iteration stopped contracting; dominant term: " + dominant_term(terms),
                                          dominant_term(terms));
        }
        if (!restart) break;
        if (rep.halvings == cfg.max_halvings)
            throw NonContractionError("no contraction after " + std::to_string(cfg.max_halvings) +
                                          " halvings of T; dominant term: " + rep.dominant_term,
                                      rep.dominant_term);
        T /= 2;
        ++rep.halvings;
    }
    rep.T_local = T;
    rep.contraction_ratio = detail::fitted_ratio(rep.residual_history);
    {
        NonlinearTerms terms = nonlinear_terms(u, v, d.alpha_c, d.beta_c, d.gamma_c, T, con.variant);
        rep.dominant_term = dominant_term(terms);
    }

    const int ne = detail::last_index_before(g, T);
    rep.trace_errors["u"] = detail::rel_time_l2(trace_at_zero(u).values, d.f.values, ne, g.dt);
    rep.trace_errors["v"] = detail::rel_time_l2(trace_at_zero(v).values, d.g.values, ne, g.dt);
    if (d.side == Side::left)
        rep.trace_errors["v_x"] = detail::rel_time_l2(boundary_trace(v, Side::left, 1).values, d.h->values, ne, g.dt);
    auto [ru, rv] = pde_residuals(&u, &v, d.side, d.alpha_c, d.beta_c, d.gamma_c, T);
    rep.pde_residuals["schrodinger"] = ru;
    rep.pde_residuals["kdv"] = rv;
    return {std::move(u), std::move(v), std::move(rep)};
}

/// Half-line part of a whole-line field on 0 <= t <= T.
inline SampledField restrict_output(const SampledField& w, Side side, double T) {
    const auto& g = w.grid;
    const int z = g.zero_index(), ne = detail::last_index_before(g, T);
    const int j0 = side == Side::right ? z : 0, j1 = side == Side::right ? g.Nx : z + 1;
    // kept as a full-width field; nodes off the half-line are zero
    SampledField out(g, w.kind, ne + 1);
    for (int n = 0; n <= ne; ++n)
        for (int j = j0; j < j1; ++j) out(j, n) = w(j, n);
    return out;
}

// ------------------------------------------------------------------ flux identities

struct FluxReport {
    double mass_T = 0, mass_0 = 0, boundary_integral = 0;
    double lhs = 0, rhs = 0;
    double defect = 0;  // relative
};

/// Both sides of the half-line L^2 balance for real linear KdV fields:
/// right: int v^2(T) = int v^2(0) + int_0^T [2 v v_xx - v_x^2](0,t) dt, left with the opposite sign.
inline FluxReport flux_identity_check(const SampledField& v, Side side, double T) {
    const auto& g = v.grid;
    const int z = g.zero_index(), ne = detail::last_index_before(g, T);
    auto mass = [&](int n) {
        double acc = 0;
        const int j0 = side == Side::right ? z : 0, j1 = side == Side::right ? g.Nx - 1 : z;
        for (int j = j0; j <= j1; ++j) {
            double w = (j == j0 || j == j1) ? 0.5 : 1.0;
            acc += w * std::pow(v(j, n).real(), 2);
        }
        // Euler-Maclaurin end correction at x = 0 with (v^2)' = 2 v v_x; the far end is negligible
        double a = one_sided_limit(v, n, side, 0).real(), a1 = one_sided_limit(v, n, side, 1).real();
        double corr = g.dx * g.dx / 12 * 2 * a * a1;
        return acc * g.dx + (side == Side::right ? corr : -corr);
    };
    std::vector<double> B(ne + 1);
    for (int n = 0; n <= ne; ++n) {
        double a = one_sided_limit(v, n, side, 0).real(), a1 = one_sided_limit(v, n, side, 1).real(),
               a2 = one_sided_limit(v, n, side, 2).real();
        B[n] = 2 * a * a2 - a1 * a1;
    }
    FluxReport r;
    for (int n = 0; n < ne; ++n) r.boundary_integral += 0.5 * (B[n] + B[n + 1]) * g.dt;
    r.mass_0 = mass(0);
    r.mass_T = mass(ne);
    r.lhs = r.mass_T;
    r.rhs = r.mass_0 + (side == Side::right ? 1 : -1) * r.boundary_integral;
    double scale = std::max(std::abs(r.lhs), std::abs(r.rhs));
    r.defect = scale > 0 ? std::abs(r.lhs - r.rhs) / scale : 0.0;
    return r;
}

/// Observed order log2(coarse / fine) of two defects from grids one halving apart.
inline double refinement_order(double coarse, double fine) {
    if (fine <= 0) return INFINITY;
    return std::log2(coarse / fine);
}

}  // namespace skdv
