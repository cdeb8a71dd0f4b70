#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "solver_fixtures.hpp"

using namespace skdv;
using fixtures::DataShape;

namespace {

double half_l2_at(const SampledField& w, Side side, int n) {
    auto r = restrict_half_line(w.slice_at(n), w.grid, side);
    return l2(r) * std::sqrt(w.grid.dx);
}

double half_max(const SampledField& w, Side side) {
    const int z = w.grid.zero_index();
    double m = 0;
    for (int n = 0; n < w.nt; ++n)
        for (int j = 0; j < w.grid.Nx; ++j)
            if (side == Side::right ? j >= z : j <= z) m = std::max(m, std::abs(w(j, n)));
    return m;
}

// Relative half-line difference over 0 <= t <= T.
double half_rel_diff(const SampledField& a, const SampledField& b, Side side, double T) {
    auto ra = restrict_output(a, side, T), rb = restrict_output(b, side, T);
    return l2_diff(ra.values, rb.values) / l2(rb.values);
}

IBVPData zero_data(Side side, RegularityPair reg, const SpaceTimeGrid& g) {
    DataShape sh;
    sh.u_data = sh.v_data = false;
    return fixtures::smooth_data(side, reg, g, sh);
}

}  // namespace

TEST_CASE("validate: side, compatibility and beta checks") {
    auto g = fixtures::solver_grid(64);

    auto d = zero_data(Side::right, {0.75, 0.2}, g);
    d.beta_c = 0;
    d.u0[0] = 1;
    CHECK_THROWS_WITH_AS(validate(d), "compatibility u0(0)=f(0)", ValidationError);
    d.u0[0] = 1e-9;
    CHECK_NOTHROW(validate(d));

    // s, k < 1/2 carry no pointwise condition
    d = zero_data(Side::right, {0, -0.6}, g);
    d.u0[0] = 1;
    d.f.values[0] = 0;
    auto vd = validate(d);
    CHECK(vd.region.tag == RegionTag::D);
    CHECK(vd.f_exponent == doctest::Approx(0.25));
    CHECK(vd.g_exponent == doctest::Approx(0.4 / 3));

    d = zero_data(Side::right, {0.75, 0.9}, g);
    d.beta_c = 0;
    d.v0[0] = 0.5;
    CHECK_THROWS_WITH_AS(validate(d), "compatibility v0(0)=g(0)", ValidationError);

    d = zero_data(Side::left, {0.3, 0.2}, g);
    d.h.reset();
    CHECK_THROWS_WITH_AS(validate(d), doctest::Contains("requires the trace h"), ValidationError);
    d = zero_data(Side::right, {0, -0.6}, g);
    d.h = d.f;
    CHECK_THROWS_WITH_AS(validate(d), doctest::Contains("takes no trace h"), ValidationError);

    // D0 demands beta = 0
    d = zero_data(Side::right, {0.75, 0.2}, g);
    CHECK_THROWS_WITH_AS(validate(d), "beta must vanish in region D0", ValidationError);
    d.beta_c = 0;
    CHECK(validate(d).region.beta_zero_required);

    d = zero_data(Side::right, {0, -0.6}, g);
    d.v0[3] = cplx(0, 1);
    CHECK_THROWS_WITH_AS(validate(d), "v0 must be real", ValidationError);
}

TEST_CASE("linear right KdV with zero data vanishes on x > 0") {
    auto g = fixtures::solver_grid(256);
    auto vd = validate(zero_data(Side::right, {0, -0.6}, g));
    auto sol = solve_linear(Side::right, Equation::kdv, vd);
    CHECK(half_max(sol.field, Side::right) <= 1e-8);
}

TEST_CASE("linear left KdV: zero v0 and g with h != 0 gives a nonzero solution") {
    auto g = fixtures::solver_grid(512);
    auto d = zero_data(Side::left, {0.3, 0.2}, g);
    d.h = sample_trace(Profile{ProfileKind::poly_exp, 1.0, 0, 1, 0, 2, 1}, g);
    auto sol = solve_linear(Side::left, Equation::kdv, validate(d));
    const double tol = 1e-2;
    CHECK(sol.report.trace_errors.at("v") <= tol);  // absolute, g = 0
    CHECK(sol.report.trace_errors.at("v_x") <= tol);
    double norm_T = half_l2_at(sol.field, Side::left, g.Nt - 1);
    MESSAGE("||v(T)||_{L2(x<0)} = " << norm_T);
    CHECK(norm_T > 10 * tol);
    CHECK(sol.report.max_imag_ratio <= 1e-8);
}

TEST_CASE("linear Schrodinger with the free trace reproduces free evolution") {
    auto g = fixtures::solver_grid(256);
    auto d = fixtures::smooth_data(Side::right, {0, -0.6}, g, {.center = 3, .width = 1});
    auto free = free_evolution(PropagatorKind::schrodinger, extend_half_line(d.u0, g, Side::right), g);
    d.f = trace_at_zero(free);
    auto sol = solve_linear(Side::right, Equation::schrodinger, validate(d));
    CHECK(l2_diff(sol.field.values, free.values) <= 1e-6 * l2(free.values));
}

TEST_CASE("linear solves match their traces and refine") {
    double prev[2] = {0, 0};
    for (int N : {256, 512}) {
        auto g = fixtures::solver_grid(N);
        auto vd = validate(fixtures::smooth_data(Side::left, {0.3, 0.2}, g));
        auto s = solve_linear(Side::left, Equation::schrodinger, vd);
        auto k = solve_linear(Side::left, Equation::kdv, vd);
        CHECK(s.report.trace_errors.at("u") <= 1e-2);
        CHECK(k.report.trace_errors.at("v") <= 1e-2);
        double r[2] = {s.report.pde_residuals.at("schrodinger"), k.report.pde_residuals.at("kdv")};
        MESSAGE("N = " << N << " residuals " << r[0] << ", " << r[1]);
        if (N == 512)
            for (int i = 0; i < 2; ++i) CHECK(refinement_order(prev[i], r[i]) >= 1);
        prev[0] = r[0];
        prev[1] = r[1];
    }
}

TEST_CASE("zero data converges to zero in at most two iterations") {
    auto g = fixtures::solver_grid(128);
    for (auto [side, reg] : {std::pair{Side::right, RegularityPair{0, -0.6}}, std::pair{Side::left, RegularityPair{0.3, 0.2}}}) {
        auto vd = validate(zero_data(side, reg, g));
        auto sol = solve(vd, fixtures::config_for(vd));
        CHECK(sol.report.converged);
        CHECK(sol.report.iterates <= 2);
        CHECK(max_abs(sol.u.values) == 0.0);
        CHECK(max_abs(sol.v.values) == 0.0);

        // first defects of zero data vanish
        auto b = reconstruct_boundary_defect(vd, sol.u, sol.v, default_construction(vd, fixtures::config_for(vd)));
        CHECK(max_abs(b.h1.values) == 0.0);
        CHECK(max_abs(b.h2.values) == 0.0);
    }
}

TEST_CASE("right side, region D: contraction, traces, residual order, realness") {
    double prev[2] = {0, 0};
    for (int N : {256, 512}) {
        auto g = fixtures::solver_grid(N);
        auto vd = validate(fixtures::smooth_data(Side::right, {0, -0.6}, g));
        auto sol = solve(vd, fixtures::config_for(vd));
        const auto& r = sol.report;
        CHECK(r.converged);
        CHECK(r.contraction_ratio < 0.9);
        CHECK(r.trace_errors.at("u") <= 1e-2);
        CHECK(r.trace_errors.at("v") <= 1e-2);
        CHECK(r.max_imag_ratio <= 1e-8);
        CHECK(r.M1 > 0);
        CHECK(r.M2 > 0);
        for (size_t i = 0; i + 1 < r.residual_history.size(); ++i) CHECK(r.residual_history[i] > 0);
        double res[2] = {r.pde_residuals.at("schrodinger"), r.pde_residuals.at("kdv")};
        if (N == 512)
            for (int i = 0; i < 2; ++i) CHECK(refinement_order(prev[i], res[i]) >= 1);
        prev[0] = res[0];
        prev[1] = res[1];
    }
}

TEST_CASE("left side, region E: all three traces") {
    auto g = fixtures::solver_grid(512);
    auto vd = validate(fixtures::smooth_data(Side::left, {0.3, 0.2}, g));
    auto sol = solve(vd, fixtures::config_for(vd));
    const auto& r = sol.report;
    CHECK(r.region == "E");
    CHECK(r.converged);
    CHECK(r.contraction_ratio < 0.9);
    for (auto key : {"u", "v", "v_x"}) CHECK(r.trace_errors.at(key) <= 1e-2);
    CHECK(r.max_imag_ratio <= 1e-8);
}

TEST_CASE("without couplings the iteration reproduces the linear solves") {
    auto g = fixtures::solver_grid(512);
    auto vd = validate(fixtures::smooth_data(Side::right, {0, -0.6}, g, {.alpha = 0, .beta = 0, .gamma = 0}));
    // the KdV self-interaction stays, so compare the Schrodinger component only
    auto sol = solve(vd, fixtures::config_for(vd));
    auto lin = solve_linear(Side::right, Equation::schrodinger, vd);
    CHECK(l2_diff(sol.u.values, lin.field.values) <= 1e-12 * l2(lin.field.values));
    CHECK(sol.report.trace_errors.at("u") <= 1e-3);
}

TEST_CASE("gauge test: alpha = gamma = 0 decouples the components") {
    auto g = fixtures::solver_grid(256);
    for (auto side : {Side::right, Side::left}) {
        RegularityPair reg = side == Side::right ? RegularityPair{0, -0.6} : RegularityPair{0.3, 0.2};
        auto coupled = validate(fixtures::smooth_data(side, reg, g, {.alpha = 0, .gamma = 0}));
        auto kdv_only = validate(fixtures::smooth_data(side, reg, g, {.alpha = 0, .gamma = 0, .u_data = false}));
        auto nls_only = validate(fixtures::smooth_data(side, reg, g, {.alpha = 0, .gamma = 0, .v_data = false}));
        auto a = solve(coupled, fixtures::config_for(coupled));
        auto b = solve(kdv_only, fixtures::config_for(kdv_only));
        auto c = solve(nls_only, fixtures::config_for(nls_only));
        CHECK(max_abs(b.u.values) == 0.0);
        CHECK(half_rel_diff(a.v, b.v, side, g.T_max) <= 1e-6);
        CHECK(half_rel_diff(a.u, c.u, side, g.T_max) <= 1e-6);
    }
}

TEST_CASE("smallness gate refuses before any computation") {
    auto g = fixtures::solver_grid(128);
    // (0.4, 0.6) lies in Dt, which needs small KdV data
    auto d = fixtures::smooth_data(Side::right, {0.4, 0.6}, g, {.width = 2.5});
    auto vd = validate(d);
    REQUIRE(vd.region.smallness_required);
    double n = kdv_data_norm(vd);
    auto cfg = fixtures::config_for(vd);
    cfg.delta = n / 2;
    CHECK_THROWS_WITH_AS(solve(vd, cfg), doctest::Contains("smallness violated"), ValidationError);
    cfg.delta = 2 * n;
    CHECK(solve(vd, cfg).report.converged);
}

TEST_CASE("region none is refused") {
    auto g = fixtures::solver_grid(64);
    auto vd = validate(zero_data(Side::right, {-0.05, 0}, g));
    CHECK(vd.region.tag == RegionTag::none);
    SolverConfig cfg;
    cfg.grid = g;
    CHECK_THROWS_WITH_AS(solve(vd, cfg), doctest::Contains("no admissible region"), ValidationError);
}

TEST_CASE("large data: T is halved, and without halvings the iteration fails naming a term") {
    auto g = fixtures::solver_grid(128);
    auto vd = validate(fixtures::smooth_data(Side::right, {0, -0.6}, g, {.amp = 3, .center = 4, .width = 1.5}));
    auto cfg = fixtures::config_for(vd);
    cfg.max_halvings = 0;
    try {
        solve(vd, cfg);
        FAIL("expected a non-contraction failure");
    } catch (const NonContractionError& e) {
        MESSAGE(std::string(e.what()));
        CHECK(!e.dominant_term.empty());
        CHECK(std::string(e.what()).find(e.dominant_term) != std::string::npos);
    }
    cfg.max_halvings = 10;
    auto sol = solve(vd, cfg);
    CHECK(sol.report.halvings >= 1);
    CHECK(sol.report.T_local < cfg.T_local);
    CHECK(sol.report.converged);
}

TEST_CASE("standard and small-data constructions agree across k = 1/2") {
    auto g = fixtures::solver_grid(256);
    DataShape sh{.width = 2.5};
    auto below = validate(fixtures::smooth_data(Side::right, {0.4, 0.49}, g, sh));
    auto above = validate(fixtures::smooth_data(Side::right, {0.4, 0.51}, g, sh));
    REQUIRE(below.region.tag == RegionTag::D);
    REQUIRE(above.region.tag == RegionTag::Dt);
    auto ca = fixtures::config_for(above);
    ca.delta = 10;
    auto a = solve(below, fixtures::config_for(below));
    auto b = solve(above, ca);
    CHECK(a.report.variant == "standard");
    CHECK(b.report.variant == "small-data");
    const double T = std::min(a.report.T_local, b.report.T_local);
    CHECK(half_rel_diff(a.u, b.u, Side::right, T) <= 3e-2);
    CHECK(half_rel_diff(a.v, b.v, Side::right, T) <= 3e-2);
}

TEST_CASE("left lambda construction also meets the traces") {
    auto g = fixtures::solver_grid(512);
    // (0.2, -0.4) is Et1: V_-^{l2}, V_-^{l3} with the default lambdas
    auto vd = validate(fixtures::smooth_data(Side::left, {0.2, -0.4}, g));
    REQUIRE(vd.region.tag == RegionTag::Et1);
    auto cfg = fixtures::config_for(vd);
    cfg.delta = 10;
    auto con = default_construction(vd, cfg);
    CHECK(con.left_lambda);
    CHECK(con.lambda2 != con.lambda3);
    auto sol = solve(vd, cfg);
    CHECK(sol.report.converged);
    for (auto key : {"u", "v", "v_x"}) CHECK(sol.report.trace_errors.at(key) <= 1e-2);
}

TEST_CASE("flux identities for linear KdV") {
    // one whole-line evolution crossing x = 0, checked on both half-lines
    double prev[2] = {0, 0};
    for (int r : {1, 2}) {
        auto g = make_grid(32, 256 * r, 0.5, 16 * r + 1);
        cvec v0(g.Nx);
        for (int j = 0; j < g.Nx; ++j) v0[j] = std::exp(-std::pow((g.x(j) - 1) / 1.5, 2));
        auto v = free_evolution(PropagatorKind::airy, v0, g);
        for (auto side : {Side::right, Side::left}) {
            const int i = side == Side::right ? 0 : 1;
            auto rep = flux_identity_check(v, side, g.T_max);
            MESSAGE(to_string(side) << " r = " << r << ": defect " << rep.defect << ", boundary term " << rep.boundary_integral);
            CHECK(rep.defect <= 1e-2);
            if (r == 2) CHECK(refinement_order(prev[i], rep.defect) >= 1);
            prev[i] = rep.defect;
            // the opposite sign on the boundary term does not balance
            double wrong = rep.mass_0 - (side == Side::right ? 1 : -1) * rep.boundary_integral;
            CHECK(std::abs(rep.lhs - wrong) > 100 * std::abs(rep.lhs - rep.rhs));
        }
    }
    auto g = make_grid(16, 64, 0.5, 17);
    auto zero = SampledField::full(g, FieldKind::kdv);
    auto rep = flux_identity_check(zero, Side::right, 0.5);
    CHECK(rep.lhs == 0.0);
    CHECK(rep.rhs == 0.0);
    CHECK(rep.defect == 0.0);
}

TEST_CASE("restrict_output keeps the half-line and the local time window") {
    auto g = fixtures::solver_grid(64);
    auto w = SampledField::full(g);
    for (auto& z : w.values) z = 1;
    auto r = restrict_output(w, Side::left, 0.25);
    CHECK(r.nt == 17);
    CHECK(r(g.zero_index(), 3) == cplx(1));
    CHECK(r(g.zero_index() + 1, 3) == cplx(0));
}

TEST_CASE("profiles and sample files") {
    auto g = make_grid(8, 64, 1.0, 9);
    Profile gs{ProfileKind::gaussian, 2, 1, 0.5, 0};
    CHECK(std::abs(gs(1.5) - 2 * std::exp(-1.0)) < 1e-15);
    Profile sc{ProfileKind::sech, 1, 0, 2, 0};
    CHECK(std::abs(sc(2.0) - 1 / std::cosh(1.0)) < 1e-15);
    Profile pe{ProfileKind::poly_exp, 1, 0, 1, 0, 2, 1};
    CHECK(std::abs(pe(2.0) - 4 * std::exp(-2.0)) < 1e-15);
    CHECK(pe(-1.0) == cplx(0));
    Profile ab{ProfileKind::airy_bump, 1, 0, 1, 0};
    CHECK(std::abs(ab(0.0) - airy_function(0)) < 1e-15);
    CHECK(parse_profile_kind("airy-bump") == ProfileKind::airy_bump);
    CHECK_THROWS_AS(parse_profile_kind("box"), ValidationError);

    auto path = std::filesystem::temp_directory_path() / "skdv_samples_test.txt";
    {
        std::ofstream out(path);
        out << "# t values\n0\n1 0.5\n2\n";
    }
    Profile sm{ProfileKind::samples};
    sm.file = path.string();
    auto tr = sample_trace(sm, g);
    CHECK(std::abs(tr.values[0]) == 0.0);
    CHECK(std::abs(tr.values[4] - cplx(1, 0.5)) < 1e-14);  // t = 0.5 is the middle sample
    CHECK(std::abs(tr.values[8] - cplx(2, 0)) < 1e-14);
    std::filesystem::remove(path);
    sm.file = "/nonexistent/skdv.txt";
    CHECK_THROWS_AS(sample_trace(sm, g), ValidationError);
}
