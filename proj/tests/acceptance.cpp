// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "region_oracle.hpp"
#include "skdv/checks.hpp"
#include "solver_fixtures.hpp"

using namespace skdv;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void criterion(int id, const std::string& title, const std::function<void(Outcome&)>& body) {
    Outcome o;
    auto t0 = Clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " [exception: " << e.what() << "]";
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %d: %s (%.1f s)%s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), seconds_since(t0),
                o.detail.str().c_str());
    std::fflush(stdout);
}

void suite_into(Outcome& o, const std::vector<OperatorCheck>& checks) {
    double worst = 0, worst_ratio = INFINITY;
    for (auto& c : checks) {
        o.require(c.pass(), c.name);
        worst = std::max(worst, c.error / c.tol);
        if (c.fine) worst_ratio = std::min(worst_ratio, c.ratio());
    }
    o.detail << " worst error/tol " << worst;
    if (std::isfinite(worst_ratio)) o.detail << ", smallest refinement gain " << worst_ratio;
}

// ---------------------------------------------------------------- criterion 2 oracle

// Gaussian-damped Airy kernel (1/2pi) int e^{i(x xi + xi^3) - eps xi^2} d xi by the midpoint rule.
double airy_damped(double x, double eps) {
    const double top = std::sqrt(40 / eps), h = 0.002;
    double acc = 0;
    for (double xi = h / 2; xi < top; xi += h) acc += std::cos(x * xi + xi * xi * xi) * std::exp(-eps * xi * xi);
    return acc * h / pi;
}

// ---------------------------------------------------------------- criterion 5 helpers

SampledField smooth_forcing(const SpaceTimeGrid& g, unsigned seed, bool real) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01;
    auto w = SampledField::full(g);
    for (int m = -5; m <= 5; ++m) {
        cplx a{N01(rng), real ? 0.0 : N01(rng)}, b{N01(rng), real ? 0.0 : N01(rng)};
        double om = 2 * N01(rng);
        for (int n = 0; n < g.Nt; ++n) {
            double t = g.t(n);
            cplx c = a * std::cos(om * t) + b * t * t;
            for (int j = 0; j < g.Nx; ++j) {
                cplx e = std::exp(I * (m * g.dxi()) * g.x(j));
                w(j, n) += real ? 2.0 * (c * e).real() : c * e;
            }
        }
    }
    return w;
}

// relative L2 of (i d_t + d_x^2) v - w or (d_t + d_x^3) v - w with central differences in t
double duhamel_residual(const SampledField& v, const SampledField& w, bool schrodinger) {
    const auto& g = v.grid;
    double acc = 0, ref = 0;
    for (int n = 1; n + 1 < g.Nt; ++n) {
        cvec d = spectral_derivative(v.slice_at(n), g, schrodinger ? 2 : 3);
        for (int j = 0; j < g.Nx; ++j) {
            cplx dt = (v(j, n + 1) - v(j, n - 1)) / (2 * g.dt);
            cplx r = (schrodinger ? I * dt : dt) + d[j] - w(j, n);
            acc += std::norm(r);
            ref += std::norm(w(j, n));
        }
    }
    return std::sqrt(acc / ref);
}

// ---------------------------------------------------------------- criterion 8 helpers

RegularityPair representative(RegionTag t) {
    using R = RegionTag;
    switch (t) {
        case R::D: return {0, -0.6};
        case R::D0: return {0.75, 0.2};
        case R::Dt: return {0.4, 0.6};
        case R::Dt0: return {0.75, 0.9};
        case R::E: return {0.3, 0.2};
        case R::E0: return {0.75, 0.2};
        case R::Et1: return {0.2, -0.4};
        case R::Et2: return {0.4, 0.6};
        case R::Et10: return {0.75, -0.1};
        default: return {0.75, 0.9};
    }
}

// ---------------------------------------------------------------- criterion 9 helpers

double half_rel_diff(const SampledField& a, const SampledField& b, Side side, double T) {
    auto ra = restrict_output(a, side, T), rb = restrict_output(b, side, T);
    return l2_diff(ra.values, rb.values) / l2(rb.values);
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    return !sa.empty() && sa == sb;
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli = argc > 1 ? argv[1] : SKDV_CLI_PATH;

    criterion(1, "fractional integral algebra and power-law oracle at Nt = 1025, tol 1e-6",
              [](Outcome& o) { suite_into(o, fracint_suite(1e-6)); });

    criterion(2, "propagators: Gaussian 1e-8, Airy self-similarity 1e-6, group law and unitarity 1e-10", [](Outcome& o) {
        auto checks = propagator_suite();
        std::vector<OperatorCheck> sel;
        for (auto& c : checks)
            if (c.name.find("A(0)") == std::string::npos && c.name.find("A'(0)") == std::string::npos) sel.push_back(c);
        // the damped kernel keeps its shape: eps -> eps (1+t)^{-2/3}, x -> x (1+t)^{-1/3}
        auto g = make_grid(100, 512, 1, 2);
        const double eps = 1.0;
        cvec phi(g.Nx);
        for (int j = 0; j < g.Nx; ++j) phi[j] = airy_damped(g.x(j), eps);
        double err = 0;
        for (double t : {0.5, 1.0}) {
            auto v = evolve(PropagatorKind::airy, phi, g, t);
            double s = std::cbrt(1 + t);
            for (int j = 0; j < g.Nx; j += 3) err = std::max(err, std::abs(v[j] - airy_damped(g.x(j) / s, eps / (s * s)) / s));
        }
        sel.push_back({"propagators", "Airy kernel self-similar evolution", err, 1e-6, {}});
        suite_into(o, sel);
    });

    criterion(3, "A(0) and A'(0) against 1/(3 Gamma(2/3)) and -1/(3 Gamma(1/3)), tol 1e-8", [](Outcome& o) {
        double e0 = std::abs(airy_function(0) - 1 / (3 * std::tgamma(2.0 / 3)));
        double e1 = std::abs(airy_function_prime(0) + 1 / (3 * std::tgamma(1.0 / 3)));
        o.require(e0 <= 1e-8, "A(0)");
        o.require(e1 <= 1e-8, "A'(0)");
        o.detail << " errors " << e0 << ", " << e1;
    });

    criterion(4, "eight forcing trace identities <= 1e-2, >= 2x gain at double resolution, <= 2 min", [](Outcome& o) {
        auto t0 = Clock::now();
        auto checks = forcing_trace_suite(1e-2);
        o.require(checks.size() == 8, "eight identities");
        suite_into(o, checks);
        o.require(seconds_since(t0) <= 120, "runtime");
    });

    criterion(5, "Duhamel residual order >= 1 under dt halving, single mode 1e-8", [](Outcome& o) {
        double worst_order = INFINITY;
        for (bool schr : {true, false}) {
            double prev = 0;
            for (int nt : {33, 65, 129}) {
                auto g = make_grid(pi, 32, 1.0, nt);
                auto w = smooth_forcing(g, 3, !schr);
                auto v = schr ? duhamel_S(w) : duhamel_K(w);
                double r = duhamel_residual(v, w, schr);
                if (prev > 0) worst_order = std::min(worst_order, std::log2(prev / r));
                prev = r;
            }
        }
        o.require(worst_order >= 1, "residual order");
        auto g = make_grid(pi, 32, 1.0, 65);
        const double k = 3;
        auto w = SampledField::full(g);
        for (int n = 0; n < g.Nt; ++n)
            for (int j = 0; j < g.Nx; ++j) w(j, n) = std::exp(I * k * g.x(j));
        auto S = duhamel_S(w), K = duhamel_K(w);
        double es = 0, ek = 0;
        for (int n = 0; n < g.Nt; ++n) {
            double t = g.t(n);
            for (int j = 0; j < g.Nx; ++j) {
                cplx e = std::exp(I * k * g.x(j));
                es = std::max(es, std::abs(S(j, n) + (1.0 - std::exp(-I * t * k * k)) / (k * k) * e));
                ek = std::max(ek, std::abs(K(j, n) - e * (std::exp(I * t * k * k * k) - 1.0) / (I * k * k * k)));
            }
        }
        o.require(es <= 1e-8 && ek <= 1e-8, "single mode");
        o.detail << " worst order " << worst_order << ", single-mode errors " << es << ", " << ek;
    });

    criterion(6, "flux identities: defect <= 1e-2 with order >= 1, right vanishing 1e-8, left nonvanishing", [](Outcome& o) {
        double prev[2] = {0, 0}, worst = 0, order = INFINITY;
        for (int r : {1, 2}) {
            auto g = make_grid(32, 256 * r, 0.5, 16 * r + 1);
            cvec v0(g.Nx);
            for (int j = 0; j < g.Nx; ++j) v0[j] = std::exp(-std::pow((g.x(j) - 1) / 1.5, 2));
            auto v = free_evolution(PropagatorKind::airy, v0, g);
            for (auto side : {Side::right, Side::left}) {
                const int i = side == Side::right ? 0 : 1;
                double d = flux_identity_check(v, side, g.T_max).defect;
                if (r == 1) worst = std::max(worst, d);
                else order = std::min(order, refinement_order(prev[i], d));
                prev[i] = d;
            }
        }
        o.require(worst <= 1e-2, "defect");
        o.require(order >= 1, "order");

        const double tol = 1e-2;
        auto g = fixtures::solver_grid(512);
        fixtures::DataShape none;
        none.u_data = none.v_data = false;
        auto right = solve_linear(Side::right, Equation::kdv, validate(fixtures::smooth_data(Side::right, {0, -0.6}, g, none)));
        double m = 0;
        for (int n = 0; n < g.Nt; ++n)
            for (int j = g.zero_index(); j < g.Nx; ++j) m = std::max(m, std::abs(right.field(j, n)));
        o.require(m <= 1e-8, "right vanishing");

        auto d = fixtures::smooth_data(Side::left, {0.3, 0.2}, g, none);
        d.h = sample_trace(Profile{ProfileKind::poly_exp, 1.0, 0, 1, 0, 2, 1}, g);
        auto left = solve_linear(Side::left, Equation::kdv, validate(d));
        auto half = restrict_half_line(left.field.slice_at(g.Nt - 1), g, Side::left);
        double nrm = l2(half) * std::sqrt(g.dx);
        o.require(left.report.trace_errors.at("v") <= tol && left.report.trace_errors.at("v_x") <= tol, "left traces");
        o.require(nrm > 10 * tol, "left nonvanishing");
        o.detail << " worst defect " << worst << ", order " << order << ", right max|v| " << m << ", left ||v(T)|| " << nrm;
    });

    criterion(7, "10^4-point region sweep against the independent predicates", [](Outcome& o) {
        int disagree = 0, skipped = 0, n = 0;
        for (int i = 0; i < 100; ++i)
            for (int j = 0; j < 100; ++j) {
                double s = -0.1 + 1.2 * i / 99, k = -1 + 2.6 * j / 99;
                ++n;
                if (oracle::boundary_distance(s, k) < 1e-9) {
                    ++skipped;
                    continue;
                }
                for (auto side : {Side::right, Side::left})
                    if (to_string(classify_region(side, s, k).tag) != oracle::classify(side == Side::left, s, k)) ++disagree;
            }
        o.require(n == 10000, "point count");
        o.require(disagree == 0, "disagreements");
        o.detail << " " << disagree << " disagreements, " << skipped << " points on boundary lines";
    });

    criterion(8, "estimate harness: 200 trials per estimate and region, growth <= 2x, named refusals, <= 10 min", [](Outcome& o) {
        auto t0 = Clock::now();
        double worst_growth = 0;
        int runs = 0, refusals = 0;
        for (auto t : {RegionTag::D, RegionTag::D0, RegionTag::Dt, RegionTag::Dt0, RegionTag::E, RegionTag::E0, RegionTag::Et1,
                       RegionTag::Et2, RegionTag::Et10, RegionTag::Et20}) {
            auto r = representative(t);
            auto p = default_params(t, r).params;
            HarnessOptions opt;
            opt.trials = 200;
            opt.seed = 7;
            for (auto e : estimates_for(t, r)) {
                auto rep = verify_estimate(e, r, p, opt);
                ++runs;
                for (auto& c : rep.cutoffs) o.require(std::isfinite(c.max_ratio) && c.max_ratio > 0, to_string(e) + " finite in " + to_string(t));
                o.require(rep.growth() <= 2.0, to_string(e) + " growth in " + to_string(t));
                worst_growth = std::max(worst_growth, rep.growth());
                // a request outside the hypotheses is refused with the failing inequality named
                EstimateParams bad = p;
                bad.a = 0.05;
                bad.b = 0.1;
                auto hyp = check_hypotheses(e, r, bad);
                try {
                    HarnessOptions one;
                    one.trials = 1;
                    verify_estimate(e, r, bad, one);
                    o.require(false, to_string(e) + " refusal");
                } catch (const HypothesisError& err) {
                    ++refusals;
                    o.require(!hyp.ok() && std::string(err.what()) == to_string(e) + " requires " + hyp.violated(),
                              to_string(e) + " refusal message");
                }
            }
        }
        o.require(seconds_since(t0) <= 600, "runtime");
        o.detail << " " << runs << " estimate runs, worst growth " << worst_growth << ", " << refusals << " refusals";
    });

    criterion(9, "IBVP solves: right D (0,-0.6), left E (0.3,0.2) at Nx = 512, Nt = 513; gauge test", [](Outcome& o) {
        struct Case {
            Side side;
            RegularityPair reg;
            std::vector<const char*> traces;
        };
        for (const Case& c : {Case{Side::right, {0, -0.6}, {"u", "v"}}, Case{Side::left, {0.3, 0.2}, {"u", "v", "v_x"}}}) {
            const std::string tag = to_string(c.side);
            double res[2][2];
            for (int level : {0, 1}) {
                auto g = fixtures::solver_grid(level ? 512 : 256);
                auto t0 = Clock::now();
                auto vd = validate(fixtures::smooth_data(c.side, c.reg, g));
                auto sol = solve(vd, fixtures::config_for(vd));
                double secs = seconds_since(t0);
                const auto& r = sol.report;
                res[level][0] = r.pde_residuals.at("schrodinger");
                res[level][1] = r.pde_residuals.at("kdv");
                if (!level) continue;
                o.require(r.converged && r.contraction_ratio < 0.9, tag + " contraction");
                double te = 0;
                for (auto k : c.traces) te = std::max(te, r.trace_errors.at(k));
                o.require(te <= 1e-2, tag + " traces");
                o.require(secs <= 300, tag + " runtime");
                o.detail << " " << tag << " " << r.region << ": ratio " << r.contraction_ratio << ", trace " << te << ", "
                         << secs << " s;";
            }
            double order = std::min(refinement_order(res[0][0], res[1][0]), refinement_order(res[0][1], res[1][1]));
            o.require(order >= 1, tag + " residual order");
            o.detail << " residual order " << order << ";";

            // alpha = gamma = 0: each component matches the solve with the other component's data removed
            auto g = fixtures::solver_grid(512);
            auto coupled = validate(fixtures::smooth_data(c.side, c.reg, g, {.alpha = 0, .gamma = 0}));
            auto kdv_only = validate(fixtures::smooth_data(c.side, c.reg, g, {.alpha = 0, .gamma = 0, .u_data = false}));
            auto nls_only = validate(fixtures::smooth_data(c.side, c.reg, g, {.alpha = 0, .gamma = 0, .v_data = false}));
            auto a = solve(coupled, fixtures::config_for(coupled));
            auto b = solve(kdv_only, fixtures::config_for(kdv_only));
            auto n = solve(nls_only, fixtures::config_for(nls_only));
            double gv = half_rel_diff(a.v, b.v, c.side, g.T_max), gu = half_rel_diff(a.u, n.u, c.side, g.T_max);
            o.require(gv <= 1e-6 && gu <= 1e-6, tag + " gauge");
            o.detail << " gauge " << std::max(gu, gv) << ";";
        }
    });

    criterion(10, "repeated CLI runs with a fixed seed give byte-identical CSV and JSON", [&](Outcome& o) {
        fs::path work = fs::temp_directory_path() / "skdv-acceptance";
        fs::remove_all(work);
        fs::create_directories(work);
        {
            std::ofstream cfg(work / "right.json");
            cfg << R"({"grid": {"L": 32, "Nx": 128},
 "problem": {"side": "right", "s": 0, "k": -0.6,
   "u0": {"kind": "gaussian", "amp": 0.3, "center": 12, "width": 3, "freq": 0.5},
   "v0": {"kind": "gaussian", "amp": 0.3, "center": 12, "width": 3},
   "f": {"kind": "poly-exp", "amp": 0.3}, "g": {"kind": "poly-exp", "amp": 0.3}}})";
        }
        auto run = [&](const std::string& args) {
            std::string cmd = "\"" + cli + "\" " + args + " > \"" + (work / "log.txt").string() + "\" 2>&1";
            int rc = std::system(cmd.c_str());
            o.require(rc == 0, "cli " + args);
        };
        for (int i : {1, 2}) {
            run("verify-estimates --which prop-5.1 --trials 200 --seed 7 --out \"" + (work / ("est" + std::to_string(i))).string() + "\"");
            run("simulate \"" + (work / "right.json").string() + "\" --out \"" + (work / ("sim" + std::to_string(i))).string() + "\"");
        }
        int compared = 0;
        for (auto f : {"est/estimates.csv", "sim/report.json", "sim/fields_u.csv", "sim/fields_v.csv", "sim/traces.csv"}) {
            fs::path rel(f);
            auto dir = rel.parent_path().string();
            bool same = same_bytes(work / (dir + "1") / rel.filename(), work / (dir + "2") / rel.filename());
            o.require(same, std::string(f) + " identical");
            compared += same;
        }
        o.detail << " " << compared << " files compared byte for byte";
    });

    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
