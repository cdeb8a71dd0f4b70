#pragma once

// Named analytic data profiles and a plain-text sample reader.

#include <fstream>
#include <sstream>
#include <string>

#include "skdv/grid.hpp"
#include "skdv/propagators.hpp"

namespace skdv {

enum class ProfileKind { zero, gaussian, sech, airy_bump, poly_exp, samples };

inline std::string to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::zero: return "zero";
        case ProfileKind::gaussian: return "gaussian";
        case ProfileKind::sech: return "sech";
        case ProfileKind::airy_bump: return "airy-bump";
        case ProfileKind::poly_exp: return "poly-exp";
        case ProfileKind::samples: return "samples";
    }
    return "?";
}

inline ProfileKind parse_profile_kind(const std::string& s) {
    for (auto k : {ProfileKind::zero, ProfileKind::gaussian, ProfileKind::sech, ProfileKind::airy_bump,
                   ProfileKind::poly_exp, ProfileKind::samples})
        if (to_string(k) == s) return k;
    throw ValidationError("unknown profile '" + s + "'");
}

/// amp * shape((y - center) / width) * e^{i freq y}, with y = x or t.
/// poly-exp is amp * (y - center)_+^power * e^{-rate (y - center)}.
struct Profile {
    ProfileKind kind = ProfileKind::zero;
    double amp = 1, center = 0, width = 1, freq = 0;
    double power = 2, rate = 1;
    std::string file;  // samples: one value per line, "re" or "re im", linearly interpolated

    Profile() = default;
    Profile(ProfileKind k, double amp_ = 1, double center_ = 0, double width_ = 1, double freq_ = 0, double power_ = 2,
            double rate_ = 1)
        : kind(k), amp(amp_), center(center_), width(width_), freq(freq_), power(power_), rate(rate_) {}

    cplx operator()(double y) const {
        const double z = (y - center) / width;
        double r = 0;
        switch (kind) {
            case ProfileKind::zero: return 0;
            case ProfileKind::gaussian: r = std::exp(-z * z); break;
            case ProfileKind::sech: r = 1 / std::cosh(z); break;
            case ProfileKind::airy_bump: r = std::abs(z) > 50 ? 0 : airy_function(z) * std::exp(-z * z / 16); break;
            case ProfileKind::poly_exp: {
                double d = y - center;
                r = d > 0 ? std::pow(d, power) * std::exp(-rate * d) : 0.0;
                break;
            }
            case ProfileKind::samples: throw ValidationError("sample profiles are read through sample_half_line or sample_trace");
        }
        return amp * r * std::exp(I * (freq * y));
    }
};

namespace detail {

inline cvec read_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open sample file '" + path + "'");
    cvec out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        for (auto& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        double re = 0, im = 0;
        if (!(ls >> re)) throw ValidationError("malformed line in '" + path + "': " + line);
        ls >> im;
        out.push_back({re, im});
    }
    if (out.size() < 2) throw ValidationError("sample file '" + path + "' needs at least two values");
    return out;
}

// samples spread uniformly over [a, b]
inline cplx interpolate(const cvec& v, double a, double b, double y) {
    if (y <= a) return v.front();
    if (y >= b) return v.back();
    double p = (y - a) / (b - a) * double(v.size() - 1);
    size_t i = std::min(size_t(p), v.size() - 2);
    double w = p - double(i);
    return (1 - w) * v[i] + w * v[i + 1];
}

}  // namespace detail

/// Half-line samples of a spatial profile (x measured from 0 on the given side, so left uses x <= 0).
/// Sample files span the half-line from x = 0 to |x| = L.
inline cvec sample_half_line(const Profile& p, const SpaceTimeGrid& g, Side side) {
    const int z = g.zero_index();
    const int n = side == Side::right ? g.Nx - z : z + 1;
    cvec out(n);
    cvec file;
    if (p.kind == ProfileKind::samples) file = detail::read_samples(p.file);
    for (int i = 0; i < n; ++i) {
        int j = side == Side::right ? z + i : i;
        double x = g.x(j);
        out[i] = p.kind == ProfileKind::samples ? detail::interpolate(file, 0, g.L, std::abs(x)) : p(x);
    }
    return out;
}

/// Boundary trace on the time nodes. Sample files span [0, T_max].
inline TimeTrace sample_trace(const Profile& p, const SpaceTimeGrid& g) {
    TimeTrace out(g, Support::nonnegative);
    cvec file;
    if (p.kind == ProfileKind::samples) file = detail::read_samples(p.file);
    for (int n = 0; n < g.Nt; ++n)
        out.values[n] = p.kind == ProfileKind::samples ? detail::interpolate(file, 0, g.T_max, g.t(n)) : p(g.t(n));
    return out;
}

}  // namespace skdv
