#pragma once

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>

#include "skdv/grid.hpp"

namespace skdv {

// ------------------------------------------------------------------ types

struct RegularityPair {
    double s = 0;
    double k = 0;
    double schrodinger_trace() const { return (2 * s + 1) / 4; }
    double kdv_trace() const { return (k + 1) / 3; }
    double kdv_dtrace() const { return k / 3; }
};

struct EstimateParams {
    double a = 0.45;
    double b = 0.47;
    double alpha = 0.6;
    double lambda1 = 0;
    double lambda2 = 0;
    double lambda3 = -0.5;
    double d() const { return -a; }
};

enum class RegionTag { D, D0, Dt, Dt0, E, E0, Et1, Et2, Et10, Et20, none };

inline std::string to_string(RegionTag t) {
    static const char* names[] = {"D", "D0", "Dt", "Dt0", "E", "E0", "Et1", "Et2", "Et10", "Et20", "none"};
    return names[int(t)];
}

struct Region {
    RegionTag tag = RegionTag::none;
    bool smallness_required = false;
    bool beta_zero_required = false;
};

inline Region make_region(RegionTag t) {
    using R = RegionTag;
    Region r;
    r.tag = t;
    r.smallness_required = t == R::Dt || t == R::Dt0 || t == R::Et1 || t == R::Et2 || t == R::Et10 || t == R::Et20;
    r.beta_zero_required = t == R::D0 || t == R::Dt0 || t == R::E0 || t == R::Et10 || t == R::Et20;
    return r;
}

inline bool is_left_region(RegionTag t) { return t >= RegionTag::E && t != RegionTag::none; }

// ------------------------------------------------------------------ norms

enum class Space { X, Y, W, U, Valpha };

inline std::string to_string(Space sp) {
    static const char* names[] = {"X", "Y", "W", "U", "Valpha"};
    return names[int(sp)];
}

/// Two-dimensional transform, rows = time frequency tau_m = 2 pi m / P, columns in the x FFT order.
/// Scaled by dx dt so that sum |hat|^2 dxi dtau / (2 pi)^2 is the space-time L^2 norm squared.
inline cvec spacetime_spectrum(const SampledField& w) {
    const auto& g = w.grid;
    require(w.nt == g.Nt, "bourgain norms need a full space-time field");
    cvec h = w.values;
    fft::execute_2d(h.data(), g.Nt, g.Nx, -1);
    const double c = g.dx * g.dt;
    for (int n = 0; n < g.Nt; ++n)
        for (int k = 0; k < g.Nx; ++k) h[size_t(n) * g.Nx + k] *= (k % 2 ? -c : c);
    return h;
}

/// Inverse of spacetime_spectrum.
inline SampledField field_from_spectrum(cvec h, const SpaceTimeGrid& g) {
    require(h.size() == size_t(g.Nx) * g.Nt, "spectrum size must be Nx * Nt");
    const double c = 1.0 / (2 * g.L * g.period());
    for (int n = 0; n < g.Nt; ++n)
        for (int k = 0; k < g.Nx; ++k) h[size_t(n) * g.Nx + k] *= (k % 2 ? -c : c);
    fft::execute_2d(h.data(), g.Nt, g.Nx, +1);
    SampledField w = SampledField::full(g);
    w.values = std::move(h);
    return w;
}

inline double bracket(double x) { return 1 + std::abs(x); }

inline double tau_freq(const SpaceTimeGrid& g, int m) {
    return 2 * pi / g.period() * (m < g.Nt / 2 ? m : m - g.Nt);
}

/// Squared weight of a space at (xi, tau).
inline double weight_sq(Space sp, double xi, double tau, double sk, double b) {
    switch (sp) {
        case Space::X: return std::pow(bracket(xi), 2 * sk) * std::pow(bracket(tau + xi * xi), 2 * b);
        case Space::Y: return std::pow(bracket(xi), 2 * sk) * std::pow(bracket(tau - xi * xi * xi), 2 * b);
        case Space::W: return std::pow(bracket(tau), sk) * std::pow(bracket(tau + xi * xi), 2 * b);
        case Space::U: return std::pow(bracket(tau), 2 * sk / 3) * std::pow(bracket(tau - xi * xi * xi), 2 * b);
        case Space::Valpha: return std::pow(bracket(tau), 2 * b);
    }
    return 0;
}

/// Squared weights times the cell measure dxi dtau / (2 pi)^2, in spectrum layout.
/// Nyquist rows and columns average the weight over the two aliases.
inline rvec norm_weights(const SpaceTimeGrid& g, Space sp, double sk, double b) {
    const int kn = g.Nx / 2, mn = g.Nt % 2 == 0 ? g.Nt / 2 : -1;
    const double cell = g.dxi() * (2 * pi / g.period()) / (4 * pi * pi);
    rvec w(size_t(g.Nx) * g.Nt);
    for (int m = 0; m < g.Nt; ++m) {
        double tau = tau_freq(g, m);
        for (int k = 0; k < g.Nx; ++k) {
            double xi = g.xi(k), wsum = 0;
            int cnt = 0;
            for (double xs : {xi, -xi}) {
                if (xs != xi && k != kn) continue;
                for (double ts : {tau, -tau}) {
                    if (ts != tau && m != mn) continue;
                    wsum += weight_sq(sp, xs, ts, sk, b);
                    ++cnt;
                }
            }
            w[size_t(m) * g.Nx + k] = wsum / cnt * cell;
        }
    }
    return w;
}

inline double weighted_norm(const cvec& h, const rvec& w) {
    double acc = 0;
    for (size_t i = 0; i < h.size(); ++i) acc += w[i] * std::norm(h[i]);
    return std::sqrt(acc);
}

/// Weighted L^2 of the space-time transform. For Valpha the exponent alpha goes in b and sk is unused.
inline double bourgain_norm_from_spectrum(const cvec& h, const SpaceTimeGrid& g, Space sp, double sk, double b) {
    return weighted_norm(h, norm_weights(g, sp, sk, b));
}

inline double bourgain_norm(const SampledField& w, Space sp, double sk, double b) {
    return bourgain_norm_from_spectrum(spacetime_spectrum(w), w.grid, sp, sk, b);
}

// --------------------------------------------------------- classification

/// Membership in one admissibility region, strict inequalities as printed.
inline bool in_region(RegionTag t, double s, double k) {
    using R = RegionTag;
    if (!std::isfinite(s) || !std::isfinite(k)) return false;
    switch (t) {
        case R::D: return 0 <= s && s < 0.5 && std::max(-0.75, s - 1) < k && k < std::min(4 * s - 0.5, 0.5);
        case R::D0: return 0.5 < s && s < 1 && s - 1 < k && k < 0.5;
        case R::Dt: return 0.25 < s && s < 0.5 && 0.5 < k && k < std::min(4 * s - 0.5, s + 0.5);
        case R::Dt0: return 0.5 < s && s < 1 && 0.5 < k && k < s + 0.5;
        case R::E: return 0.125 < s && s < 0.5 && 0 <= k && k < std::min(4 * s - 0.5, 0.5);
        case R::E0: return 0.5 < s && s < 1 && 0 <= k && k < 0.5;
        case R::Et1: return 0 < s && s < 0.5 && std::max(-0.75, s - 1) < k && k < std::min(0.0, 4 * s - 0.5);
        case R::Et2: return 0.25 < s && s < 0.5 && 0.5 < k && k < std::min(4 * s - 0.5, s + 0.5);
        case R::Et10: return 0.5 < s && s < 1 && s - 1 < k && k < 0;
        case R::Et20: return 0.5 < s && s < 1 && 0.5 < k && k <= s + 0.5;
        case R::none: return false;
    }
    return false;
}

/// Regions of a side in classification order.
inline std::vector<RegionTag> side_regions(Side side) {
    using R = RegionTag;
    if (side == Side::right) return {R::D, R::D0, R::Dt, R::Dt0};
    return {R::E, R::E0, R::Et1, R::Et2, R::Et10, R::Et20};
}

/// Every region of the side containing (s, k).
inline std::vector<RegionTag> region_members(Side side, double s, double k) {
    std::vector<RegionTag> out;
    for (auto t : side_regions(side))
        if (in_region(t, s, k)) out.push_back(t);
    return out;
}

inline Region classify_region(Side side, double s, double k) {
    for (auto t : side_regions(side))
        if (in_region(t, s, k)) return make_region(t);
    return make_region(RegionTag::none);
}

// ------------------------------------------------------ estimate hypotheses

enum class Estimate { trilinear_51, kdv_bilinear_52, prop_51, prop_52, prop_53, prop_54a, prop_54b };

inline const std::array<Estimate, 7>& all_estimates() {
    static const std::array<Estimate, 7> e = {Estimate::trilinear_51, Estimate::kdv_bilinear_52, Estimate::prop_51,
                                              Estimate::prop_52,      Estimate::prop_53,         Estimate::prop_54a,
                                              Estimate::prop_54b};
    return e;
}

inline std::string to_string(Estimate e) {
    static const char* names[] = {"trilinear-5.1", "kdv-bilinear-5.2", "prop-5.1", "prop-5.2",
                                  "prop-5.3",      "prop-5.4a",        "prop-5.4b"};
    return names[int(e)];
}

inline Estimate parse_estimate(const std::string& s) {
    for (auto e : all_estimates())
        if (to_string(e) == s) return e;
    throw ValidationError("unknown estimate '" + s + "'");
}

struct Inequality {
    std::string text;
    bool holds = false;
};

struct HypothesisReport {
    Estimate which{};
    std::vector<Inequality> checks;
    bool ok() const {
        return std::all_of(checks.begin(), checks.end(), [](const Inequality& q) { return q.holds; });
    }
    /// First violated inequality, empty when all hold.
    std::string violated() const {
        for (auto& q : checks)
            if (!q.holds) return q.text;
        return {};
    }
};

namespace detail {
// Non-strict comparisons absorb rounding in decimal parameter grids such as 2 * 0.49 - 0.5 <= 0.48.
inline constexpr double slack = 1e-12;
inline bool le(double x, double y) { return x <= y + slack; }
}  // namespace detail

/// The printed hypotheses of each estimate, evaluated at (s, k, a, b, alpha).
inline HypothesisReport check_hypotheses(Estimate e, const RegularityPair& r, const EstimateParams& p) {
    using detail::le;
    const double s = r.s, k = r.k, a = p.a, b = p.b;
    HypothesisReport rep;
    rep.which = e;
    auto add = [&](std::string t, bool h) { rep.checks.push_back({std::move(t), h}); };
    switch (e) {
        case Estimate::trilinear_51:
            add("3/8<b<1/2", 0.375 < b && b < 0.5);
            add("s>=0", s >= 0);
            add("0<a<1/2", 0 < a && a < 0.5);
            break;
        case Estimate::kdv_bilinear_52:
            add("k>-3/4", k > -0.75);
            add("alpha>1/2", p.alpha > 0.5);
            add("max{5/12-k/9, 1/4-k/3, 3/10-k/15, 1/4}<b<1/2",
                std::max({5.0 / 12 - k / 9, 0.25 - k / 3, 0.3 - k / 15, 0.25}) < b && b < 0.5);
            break;
        case Estimate::prop_51:
            add("7/18<2b-1/2", 7.0 / 18 < 2 * b - 0.5);
            add("2b-1/2<=a", le(2 * b - 0.5, a));
            add("a<b", a < b);
            add("k-|s|>max{2-6b, 5/2-9a}", k - std::abs(s) > std::max(2 - 6 * b, 2.5 - 9 * a));
            break;
        case Estimate::prop_52:
            add("1/2<s<=2a", 0.5 < s && le(s, 2 * a));
            add("1/3<a<b<1/2", 1.0 / 3 < a && a < b && b < 0.5);
            add("k>s-2a", k > s - 2 * a);
            break;
        case Estimate::prop_53:
            add("s>=0", s >= 0);
            add("3/8<a<=b<1/2", 0.375 < a && le(a, b) && b < 0.5);
            add("k<=min{s+6b+3a-7/2, s+3b-1, 4s+2a-3/2, 4s+3a+6b-7/2}",
                le(k, std::min({s + 6 * b + 3 * a - 3.5, s + 3 * b - 1, 4 * s + 2 * a - 1.5, 4 * s + 3 * a + 6 * b - 3.5})));
            break;
        case Estimate::prop_54a:
            add("1/4<b<1/2", 0.25 < b && b < 0.5);
            add("s>1/4", s > 0.25);
            add("0<=k<=min{3a, 2s+6b+3a-7/2}", 0 <= k && le(k, std::min(3 * a, 2 * s + 6 * b + 3 * a - 3.5)));
            break;
        case Estimate::prop_54b:
            add("1/4<b<1/2", 0.25 < b && b < 0.5);
            add("1-2b<s<=3a-1/2", 1 - 2 * b < s && le(s, 3 * a - 0.5));
            add("k<=0", k <= 0);
            break;
    }
    return rep;
}

inline void require_hypotheses(Estimate e, const RegularityPair& r, const EstimateParams& p) {
    auto rep = check_hypotheses(e, r, p);
    if (!rep.ok()) throw HypothesisError(to_string(e) + " requires " + rep.violated());
}

/// Estimates the contraction argument invokes in a region.
inline std::vector<Estimate> estimates_for(RegionTag t, const RegularityPair& r) {
    using R = RegionTag;
    std::vector<Estimate> out;
    Region reg = make_region(t);
    if (!reg.beta_zero_required) out.push_back(Estimate::trilinear_51);
    out.push_back(Estimate::kdv_bilinear_52);
    out.push_back(Estimate::prop_51);
    if (r.s > 0.5) out.push_back(Estimate::prop_52);
    out.push_back(Estimate::prop_53);
    if (t == R::Et1 || t == R::Et10)
        out.push_back(Estimate::prop_54b);
    else if (r.k >= 0)
        out.push_back(Estimate::prop_54a);
    return out;
}

struct ParamChoice {
    EstimateParams params;
    std::vector<HypothesisReport> reports;
    bool ok() const {
        return std::all_of(reports.begin(), reports.end(), [](const HypothesisReport& h) { return h.ok(); });
    }
};

inline ParamChoice default_params(RegionTag t, const RegularityPair& r) {
    require(t != RegionTag::none, "default_params needs a region");
    auto needed = estimates_for(t, r);
    EstimateParams p;
    p.alpha = 0.6;
    // Forcing orders: lambda1 = 0 on the right; on the left two distinct orders in (-1, min{1/2, k+1/2}).
    p.lambda1 = 0;
    double top = std::min(0.5, r.k + 0.5);
    p.lambda2 = -1 + 0.75 * (top + 1);
    p.lambda3 = -1 + 0.25 * (top + 1);

    auto feasible = [&](double a, double b) {
        p.a = a;
        p.b = b;
        for (auto e : needed)
            if (!check_hypotheses(e, r, p).ok()) return false;
        return true;
    };
    // Decimal grid first; finer grids only near region edges where the coarse grid has no point.
    for (int denom : {100, 1000, 10000}) {
        int lo = int(0.30 * denom), hi = denom / 2 - 1;
        for (int ib = hi; ib >= lo; --ib)
            for (int ia = ib - 1; ia >= lo; --ia)
                if (feasible(double(ia) / denom, double(ib) / denom)) {
                    ParamChoice c;
                    c.params = p;
                    for (auto e : needed) c.reports.push_back(check_hypotheses(e, r, p));
                    if (!c.ok()) throw std::logic_error("default_params produced parameters that fail a hypothesis");
                    return c;
                }
    }
    // name the estimates that no (a, b) on the decimal grid satisfies on their own
    std::string alone;
    for (auto e : needed) {
        bool any = false;
        for (int ib = 49; ib >= 30 && !any; --ib)
            for (int ia = ib - 1; ia >= 30 && !any; --ia) {
                p.a = ia / 100.0;
                p.b = ib / 100.0;
                any = check_hypotheses(e, r, p).ok();
            }
        if (!any) alone += (alone.empty() ? "" : ", ") + to_string(e) + " (" + check_hypotheses(e, r, p).violated() + ")";
    }
    char where[96];
    std::snprintf(where, sizeof where, "(s, k) = (%g, %g) in region %s", r.s, r.k, to_string(t).c_str());
    throw ConfigurationError(std::string("no (a, b) satisfies the estimates needed at ") + where +
                             (alone.empty() ? ": the hypotheses have no common point" : ": unsatisfiable " + alone));
}

// ------------------------------------------------------ Monte-Carlo harness

/// Test-field box: x-period 4 pi, t-period pi, so dxi = 1/2 and dtau = 2. Fields are band limited to
/// half-Nyquist of an (Nx, Nt) grid and stored on a grid twice as fine so that products up to cubic
/// are computed without aliasing.
struct HarnessBox {
    int Nx = 32;
    int Nt = 32;
    SpaceTimeGrid fine() const {
        double dt = pi / (2 * Nt);
        return make_grid(2 * pi, 2 * Nx, (2 * Nt - 1) * dt, 2 * Nt);
    }
};

/// Band-limited noise concentrated around tau = -xi^2 (schrodinger) or tau = xi^3 with the envelope
/// <tau - curve>^{-p}; p = 0 is white noise.
inline SampledField random_field(const HarnessBox& box, std::mt19937_64& rng, bool airy, double p, bool real) {
    auto g = box.fine();
    std::normal_distribution<double> N01;
    cvec h(size_t(g.Nx) * g.Nt);
    const int bx = box.Nx / 4, bt = box.Nt / 4;
    for (int mm = -bt + 1; mm < bt; ++mm)
        for (int kk = -bx + 1; kk < bx; ++kk) {
            int m = mm < 0 ? mm + g.Nt : mm, k = kk < 0 ? kk + g.Nx : kk;
            double xi = g.xi(k), tau = tau_freq(g, m);
            double curve = airy ? xi * xi * xi : -xi * xi;
            h[size_t(m) * g.Nx + k] = cplx(N01(rng), N01(rng)) * std::pow(bracket(tau - curve), -p);
        }
    auto w = field_from_spectrum(h, g);
    if (real)
        for (auto& z : w.values) z = z.real();
    return w;
}

inline SampledField pointwise(const SampledField& a, const SampledField& b, bool conj_b) {
    SampledField c = a;
    for (size_t i = 0; i < c.values.size(); ++i) c.values[i] *= conj_b ? std::conj(b.values[i]) : b.values[i];
    return c;
}

/// d/dx applied to a space-time spectrum; the Nyquist column is dropped.
inline void spectral_dx(cvec& h, const SpaceTimeGrid& g) {
    for (int m = 0; m < g.Nt; ++m)
        for (int k = 0; k < g.Nx; ++k) h[size_t(m) * g.Nx + k] *= k == g.nyquist_index() ? 0.0 : I * g.xi(k);
}

/// Weight tables keyed by grid shape and exponents, shared by the trials of one harness run.
class WeightCache {
public:
    const rvec& get(const SpaceTimeGrid& g, Space sp, double sk, double b) {
        auto key = std::make_tuple(g.Nx, g.Nt, g.L, g.period(), int(sp), sk, b);
        std::lock_guard<std::mutex> lock(mtx_);
        auto it = tables_.find(key);
        if (it == tables_.end()) it = tables_.emplace(key, norm_weights(g, sp, sk, b)).first;
        return it->second;
    }

private:
    std::mutex mtx_;
    std::map<std::tuple<int, int, double, double, int, double, double>, rvec> tables_;
};

/// left norm / product of right norms for given inputs; empty when an input has zero norm.
/// Inputs: trilinear (u1, u2, u3); kdv bilinear (v1, v2); prop-5.1/5.2 (u, v); prop-5.3/5.4 (u1, u2).
inline std::optional<double> estimate_ratio(Estimate e, const RegularityPair& r, const EstimateParams& p,
                                            const std::vector<SampledField>& in, WeightCache* cache = nullptr) {
    WeightCache local;
    WeightCache& wc = cache ? *cache : local;
    const double s = r.s, k = r.k, a = p.a, b = p.b;
    const auto& g = in.at(0).grid;
    auto norm = [&](const cvec& h, Space sp, double sk, double bb) { return weighted_norm(h, wc.get(g, sp, sk, bb)); };
    auto X = [&](const SampledField& w) { return norm(spacetime_spectrum(w), Space::X, s, b); };
    auto Y = [&](const cvec& h) { return norm(h, Space::Y, k, b); };
    std::vector<double> rhs;
    double lhs = 0;
    switch (e) {
        case Estimate::trilinear_51: {
            require(in.size() == 3, "trilinear estimate takes three fields");
            rhs = {X(in[0]), X(in[1]), X(in[2])};
            if (rhs[0] * rhs[1] * rhs[2] == 0) return std::nullopt;
            lhs = norm(spacetime_spectrum(pointwise(pointwise(in[0], in[1], false), in[2], true)), Space::X, s, -a);
            break;
        }
        case Estimate::kdv_bilinear_52: {
            require(in.size() == 2, "bilinear estimate takes two fields");
            for (auto& v : in) {
                cvec h = spacetime_spectrum(v);
                rhs.push_back(Y(h) + norm(h, Space::Valpha, 0, p.alpha));
            }
            if (rhs[0] * rhs[1] == 0) return std::nullopt;
            cvec h = spacetime_spectrum(pointwise(in[0], in[1], false));
            spectral_dx(h, g);
            lhs = norm(h, Space::Y, k, -b);
            break;
        }
        case Estimate::prop_51:
        case Estimate::prop_52: {
            require(in.size() == 2, "coupling estimate takes two fields");
            rhs = {X(in[0]), Y(spacetime_spectrum(in[1]))};
            if (rhs[0] * rhs[1] == 0) return std::nullopt;
            cvec h = spacetime_spectrum(pointwise(in[0], in[1], false));
            lhs = e == Estimate::prop_51 ? norm(h, Space::X, s, -a) : norm(h, Space::W, s, -a);
            break;
        }
        case Estimate::prop_53:
        case Estimate::prop_54a:
        case Estimate::prop_54b: {
            require(in.size() == 2, "coupling estimate takes two fields");
            rhs = {X(in[0]), X(in[1])};
            if (rhs[0] * rhs[1] == 0) return std::nullopt;
            cvec h = spacetime_spectrum(pointwise(in[0], in[1], true));
            spectral_dx(h, g);
            lhs = e == Estimate::prop_53 ? norm(h, Space::Y, k, -a) : norm(h, Space::U, k, -a);
            break;
        }
    }
    double prod = 1;
    for (double x : rhs) prod *= x;
    return lhs / prod;
}

struct HarnessOptions {
    int trials = 200;
    std::uint64_t seed = 7;
    HarnessBox base{};
};

struct CutoffStats {
    int cutoff = 1;
    double max_ratio = 0;
    double median = 0;
    double p90 = 0;
    int skipped = 0;
};

struct EstimateReport {
    Estimate which{};
    RegularityPair reg;
    EstimateParams params;
    int trials = 0;
    std::uint64_t seed = 0;
    std::vector<CutoffStats> cutoffs;  // 1x, 2x, 4x
    double max_ratio() const { return cutoffs.front().max_ratio; }
    /// Largest ratio of maxima between consecutive cutoff doublings.
    double growth() const {
        double g = 0;
        for (size_t i = 1; i < cutoffs.size(); ++i) g = std::max(g, cutoffs[i].max_ratio / cutoffs[i - 1].max_ratio);
        return g;
    }
};

namespace detail {
inline std::uint64_t trial_seed(std::uint64_t seed, int trial) {
    std::seed_seq sq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(trial)};
    std::array<std::uint32_t, 2> out{};
    sq.generate(out.begin(), out.end());
    return (std::uint64_t(out[0]) << 32) | out[1];
}
}  // namespace detail

/// Inputs of one trial. The same trial seed gives statistically matching fields at every cutoff.
inline std::vector<SampledField> trial_fields(Estimate e, const HarnessBox& box, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U01;
    double p = U01(rng);
    auto schr = [&] { return random_field(box, rng, false, p, false); };
    auto kdv = [&] { return random_field(box, rng, true, p, true); };
    switch (e) {
        case Estimate::trilinear_51: return {schr(), schr(), schr()};
        case Estimate::kdv_bilinear_52: return {kdv(), kdv()};
        case Estimate::prop_51:
        case Estimate::prop_52: {
            auto u = schr();
            return {u, kdv()};
        }
        default: {
            auto u1 = schr();
            return {u1, schr()};
        }
    }
}

inline EstimateReport verify_estimate(Estimate e, const RegularityPair& r, const EstimateParams& p,
                                      const HarnessOptions& opt) {
    require(opt.trials >= 1, "trials must be at least 1");
    require(0 < p.a && p.a < p.b && p.b < 0.5, "parameters must satisfy 0<a<b<1/2");
    require_hypotheses(e, r, p);
    EstimateReport rep;
    rep.which = e;
    rep.reg = r;
    rep.params = p;
    rep.trials = opt.trials;
    rep.seed = opt.seed;
    for (int c : {1, 2, 4}) {
        HarnessBox box{opt.base.Nx * c, opt.base.Nt * c};
        std::vector<double> ratio(opt.trials, -1);
        WeightCache cache;
        const int threads = worker_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads > 0 ? threads : 1) if (threads != 1)
        for (int t = 0; t < opt.trials; ++t) {
            auto in = trial_fields(e, box, detail::trial_seed(opt.seed, t));
            auto q = estimate_ratio(e, r, p, in, &cache);
            if (q) ratio[t] = *q;
        }
        CutoffStats st;
        st.cutoff = c;
        std::vector<double> ok;
        for (double q : ratio)
            if (q >= 0) ok.push_back(q);
        st.skipped = opt.trials - int(ok.size());
        if (!ok.empty()) {
            std::sort(ok.begin(), ok.end());
            st.max_ratio = ok.back();
            st.median = ok[ok.size() / 2];
            st.p90 = ok[std::min(ok.size() - 1, size_t(0.9 * ok.size()))];
        }
        rep.cutoffs.push_back(st);
    }
    return rep;
}

inline std::string csv_header() { return "which,s,k,a,b,alpha,trials,max_ratio,growth,seed"; }

inline std::string csv_row(const EstimateReport& r) {
    char buf[320];
    std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%.6g,%.6g,%.6g,%d,%.10e,%.10e,%llu", to_string(r.which).c_str(),
                  r.reg.s, r.reg.k, r.params.a, r.params.b, r.params.alpha, r.trials, r.max_ratio(), r.growth(),
                  static_cast<unsigned long long>(r.seed));
    return buf;
}

// ----------------------------------------------------- integral lemma checks

enum class IntegralLemma { quadratic, cubic, gtv, holmer };

inline std::string to_string(IntegralLemma l) {
    static const char* names[] = {"quadratic-2.5", "cubic-2.5", "gtv-2.7", "holmer-2.8"};
    return names[int(l)];
}

inline IntegralLemma parse_integral_lemma(const std::string& s) {
    for (auto l : {IntegralLemma::quadratic, IntegralLemma::cubic, IntegralLemma::gtv, IntegralLemma::holmer})
        if (to_string(l) == s) return l;
    throw ValidationError("unknown integral lemma '" + s + "'");
}

struct IntegralReport {
    IntegralLemma which{};
    std::vector<double> integrals;
    std::vector<double> ratios;  // integral / claimed bound without its constant
    double sup_ratio = 0;
    size_t argmax = 0;
    double headroom = 0;
    int flagged = 0;
};

namespace detail {

/// Real roots of x^3 + c2 x^2 + c1 x + c0.
inline rvec real_cubic_roots(double c2, double c1, double c0) {
    const double q = (3 * c1 - c2 * c2) / 9, r = (9 * c2 * c1 - 27 * c0 - 2 * c2 * c2 * c2) / 54;
    const double disc = q * q * q + r * r, shift = -c2 / 3;
    rvec out;
    if (disc > 0) {
        double sq = std::sqrt(disc);
        out.push_back(shift + std::cbrt(r + sq) + std::cbrt(r - sq));
    } else {
        double th = q < 0 ? std::acos(std::clamp(r / std::sqrt(-q * q * q), -1.0, 1.0)) : 0.0, m = 2 * std::sqrt(-q);
        for (int j = 0; j < 3; ++j) out.push_back(shift + m * std::cos((th + 2 * pi * j) / 3));
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Integral over the real line split at the given breakpoints: tanh_sinh on finite pieces, exp_sinh on tails.
inline double line_integral(const std::function<double(double)>& f, rvec cuts) {
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    boost::math::quadrature::tanh_sinh<double> ts;
    boost::math::quadrature::exp_sinh<double> es;
    double acc = es.integrate([&](double y) { return f(cuts.back() + y); }, 0.0, std::numeric_limits<double>::infinity());
    acc += es.integrate([&](double y) { return f(cuts.front() - y); }, 0.0, std::numeric_limits<double>::infinity());
    for (size_t i = 0; i + 1 < cuts.size(); ++i)
        if (cuts[i + 1] > cuts[i]) acc += ts.integrate(f, cuts[i], cuts[i + 1]);
    return acc;
}

}  // namespace detail

/// Adaptive quadrature of each elementary integral over its parameter samples.
/// Exponents: quadratic/cubic {b}; gtv {b1, b2}; holmer {b}. Samples: quadratic (a0, a1); cubic (a0, a1, a2);
/// gtv (alpha, beta); holmer (alpha, beta).
inline IntegralReport integral_bound_check(IntegralLemma which, const rvec& ex, const std::vector<rvec>& samples,
                                           double headroom = 50) {
    auto refuse = [&](bool ok, const std::string& cond) {
        if (!ok) throw HypothesisError(to_string(which) + " requires " + cond);
    };
    const size_t want_ex = which == IntegralLemma::gtv ? 2 : 1;
    require(ex.size() == want_ex, "wrong number of exponents for " + to_string(which));
    switch (which) {
        case IntegralLemma::quadratic: refuse(ex[0] > 0.5, "b>1/2"); break;
        case IntegralLemma::cubic: refuse(ex[0] > 1.0 / 3, "b>1/3"); break;
        case IntegralLemma::gtv:
            refuse(0 <= ex[0] && ex[0] < 0.5 && 0 <= ex[1] && ex[1] < 0.5, "0<=b1,b2<1/2");
            refuse(ex[0] + ex[1] > 0.5, "b1+b2>1/2");
            break;
        case IntegralLemma::holmer: refuse(ex[0] < 0.5, "b<1/2"); break;
    }
    IntegralReport rep;
    rep.which = which;
    rep.headroom = headroom;
    for (const auto& q : samples) {
        double val = 0, bound = 1;
        switch (which) {
            case IntegralLemma::quadratic: {
                require(q.size() == 2, "quadratic samples are (a0, a1)");
                const double b = ex[0];
                rvec cuts = {-q[1] / 2};
                double disc = q[1] * q[1] - 4 * q[0];
                if (disc > 0) cuts = {(-q[1] - std::sqrt(disc)) / 2, -q[1] / 2, (-q[1] + std::sqrt(disc)) / 2};
                val = detail::line_integral(
                    [&](double x) { return std::pow(bracket(q[0] + q[1] * x + x * x), -b); }, cuts);
                break;
            }
            case IntegralLemma::cubic: {
                require(q.size() == 3, "cubic samples are (a0, a1, a2)");
                const double b = ex[0];
                rvec cuts = detail::real_cubic_roots(q[2], q[1], q[0]);
                // stationary points of the cubic bound the flat stretches
                double d = q[2] * q[2] - 3 * q[1];
                if (d > 0)
                    for (double sg : {-1.0, 1.0}) cuts.push_back((-q[2] + sg * std::sqrt(d)) / 3);
                val = detail::line_integral(
                    [&](double x) { return std::pow(bracket(q[0] + x * (q[1] + x * (q[2] + x))), -b); }, cuts);
                break;
            }
            case IntegralLemma::gtv: {
                require(q.size() == 2, "gtv samples are (alpha, beta)");
                const double b1 = ex[0], b2 = ex[1];
                val = detail::line_integral(
                    [&](double y) { return std::pow(bracket(y - q[0]), -2 * b1) * std::pow(bracket(y - q[1]), -2 * b2); },
                    {q[0], q[1]});
                bound = std::pow(bracket(q[0] - q[1]), -(2 * b1 + 2 * b2 - 1));
                break;
            }
            case IntegralLemma::holmer: {
                require(q.size() == 2 && q[1] > 0, "holmer samples are (alpha, beta) with beta>0");
                const double b = ex[0], al = q[0], be = q[1];
                auto f = [&](double x) { return std::pow(bracket(x), 1 - 4 * b) / std::sqrt(std::abs(al - x)); };
                rvec cuts = {-be, be};
                if (std::abs(al) < be) cuts.push_back(al);
                if (0 > -be && 0 < be) cuts.push_back(0.0);
                std::sort(cuts.begin(), cuts.end());
                boost::math::quadrature::tanh_sinh<double> ts;
                for (size_t i = 0; i + 1 < cuts.size(); ++i) val += ts.integrate(f, cuts[i], cuts[i + 1]);
                bound = std::pow(1 + be, 2 - 4 * b) / std::sqrt(bracket(al));
                break;
            }
        }
        rep.integrals.push_back(val);
        rep.ratios.push_back(val / bound);
    }
    for (size_t i = 0; i < rep.ratios.size(); ++i) {
        if (rep.ratios[i] > rep.sup_ratio) {
            rep.sup_ratio = rep.ratios[i];
            rep.argmax = i;
        }
        if (rep.ratios[i] > headroom) ++rep.flagged;
    }
    return rep;
}

// ----------------------------------------------------- time localization

struct LocalizationReport {
    rvec T;
    rvec norms;  // ||psi_T w||_{X^{s,b'}}
    double reference = 0;  // ||w||_{X^{s,b}}
    double slope = 0;
    double defect = 0;  // slope - (b - b')
};

/// psi(t / T) centred on the middle of the time window.
inline SampledField localize(const SampledField& w, double T) {
    SampledField out = w;
    const double tc = (w.grid.Nt / 2) * w.grid.dt;
    for (int n = 0; n < w.grid.Nt; ++n) {
        double c = cutoff_psi((w.grid.t(n) - tc) / T);
        for (int j = 0; j < w.grid.Nx; ++j) out(j, n) *= c;
    }
    return out;
}

inline LocalizationReport time_localization_check(const SampledField& w, double s, double b, double bprime,
                                                  const rvec& Ts) {
    bool pos = 0 <= bprime && bprime < b && b < 0.5;
    bool neg = -0.5 < bprime && bprime < b && b <= 0;
    if (!pos && !neg) throw HypothesisError("time localization requires 0<=b'<b<1/2 or -1/2<b'<b<=0");
    require(Ts.size() >= 2, "need at least two localization times");
    LocalizationReport rep;
    rep.T = Ts;
    rep.reference = bourgain_norm(w, Space::X, s, b);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (double T : Ts) {
        double v = bourgain_norm(localize(w, T), Space::X, s, bprime);
        rep.norms.push_back(v);
        if (v > 0) {
            double lx = std::log(T), ly = std::log(v);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++n;
        }
    }
    if (n >= 2) rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    rep.defect = rep.slope - (b - bprime);
    return rep;
}

}  // namespace skdv
