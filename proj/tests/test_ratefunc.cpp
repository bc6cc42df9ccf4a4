#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "slowfast/errors.hpp"
#include "slowfast/ratefunc.hpp"

using namespace slowfast;

namespace {

struct Setup {
    Angular grid;
    SampledModel model;
    EquilibriumState eq;
    LinearizedOps ops;
    CoefficientSet cs;
};

Setup make(const ModelSpec& spec, int M = 64) {
    Setup s{Angular(M), {}, {}, {}, {}};
    s.model = sample_model(s.grid, spec);
    s.eq = solve_equilibrium(s.grid, s.model);
    s.ops = assemble_linearized(s.grid, s.model, s.eq);
    s.cs = solve_coefficients(s.grid, s.model, s.eq, s.ops);
    return s;
}

std::vector<double> uniform_times(int S, double T) {
    std::vector<double> t(static_cast<size_t>(S));
    for (int s = 0; s < S; ++s) t[static_cast<size_t>(s)] = T * s / (S - 1);
    return t;
}

template <class F>
std::vector<Eigen::VectorXd> profile_slices(const Spatial& sg,
                                            const std::vector<double>& times,
                                            F&& rho_qt) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(times.size());
    for (double t : times)
        out.push_back(sg.sample1([&](double q) { return rho_qt(q, t); }));
    return out;
}

} // namespace

TEST_CASE("time stencil differentiates quadratics exactly") {
    const double ta = 0.0, tb = 0.3, tc = 1.0;
    auto u = [](double t) { return 2.0 + 3.0 * t - t * t; };
    auto du = [](double t) { return 3.0 - 2.0 * t; };
    for (double at : {ta, tb, tc, 0.55}) {
        Eigen::Vector3d w = fd3_coeffs(ta, tb, tc, at);
        const double val = w(0) * u(ta) + w(1) * u(tb) + w(2) * u(tc);
        CHECK(std::abs(val - du(at)) < 1e-12);
    }
}

TEST_CASE("uniform local equilibrium is silent") {
    auto s = make(ModelSpec::free_abp(1));
    Spatial sg = Spatial::line(32, kTwoPi);
    auto times = uniform_times(5, 1.0);
    auto rho = profile_slices(sg, times, [](double, double) { return 1.0; });
    DensityPath path = make_local_equilibrium_path(s.grid, sg, s.eq, times, rho);

    PathCheck chk = check_path(s.grid, sg, path);
    CHECK(chk.min_value > 0.0);
    CHECK(chk.mass_drift < 1e-12);

    Field A = A_eps(s.grid, sg, s.model, s.eq, path, 2, 0.1);
    CHECK(A.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(rate_eps(s.grid, sg, s.model, s.eq, path, 0.1) < 1e-15);
    CHECK(rate_limit(s.grid, sg, s.eq, s.cs, path) < 1e-15);
    CHECK(std::abs(liminf_bound(s.grid, sg, s.model, s.eq, s.cs, path, 0.1)) <
          1e-12);
}

TEST_CASE("integrand closed form and fiber mass identity on a moving profile") {
    auto s = make(ModelSpec::von_mises());
    Spatial sg = Spatial::line(32, kTwoPi);
    auto times = uniform_times(17, 1.0);
    auto rho = profile_slices(sg, times, [](double q, double t) {
        return 1.0 + 0.4 * std::cos(q) * std::exp(-t / 3.0);
    });
    DensityPath path = make_local_equilibrium_path(s.grid, sg, s.eq, times, rho);

    const double eps = 0.1;
    const int slice = 8;
    Field A = A_eps(s.grid, sg, s.model, s.eq, path, slice, eps);
    Eigen::VectorXd dr = rho_time_derivative(path, slice);
    Eigen::VectorXd dq = sg.partial(path.rho[slice], 0);

    // On rho (x) G the fast term drops and only eps d_t rho G plus the
    // centered transport of the profile remain.
    const Eigen::VectorXd VG = s.ops.Vbar.col(0).cwiseProduct(s.eq.G);
    double sup = 0.0, mass_err = 0.0;
    for (long x = 0; x < sg.size(); ++x) {
        Eigen::VectorXd expected = eps * dr(x) * s.eq.G + dq(x) * VG;
        sup = std::max(sup, (A.col(x) - expected).cwiseAbs().maxCoeff());
        mass_err = std::max(
            mass_err, std::abs(s.grid.quadrature(A.col(x)) - eps * dr(x)));
    }
    CHECK(sup < 1e-9);
    CHECK(mass_err < 1e-9);

    // A bare local-equilibrium path with moving mass has no fiber-level
    // transport, so the finite-eps rate diverges.
    CHECK(std::isinf(rate_eps(s.grid, sg, s.model, s.eq, path, eps)));
}

TEST_CASE("static angular distortion pays the fast price") {
    auto s = make(ModelSpec::free_abp(1));
    Spatial sg = Spatial::line(8, kTwoPi);
    auto times = uniform_times(5, 1.0);

    Eigen::VectorXd pert =
        s.grid.sample([](double th) { return 1.0 + 0.3 * std::cos(2 * th); });
    Field f(s.grid.size(), sg.size());
    for (long x = 0; x < sg.size(); ++x)
        f.col(x) = s.eq.G.cwiseProduct(pert);
    std::vector<Field> vals(times.size(), f);
    DensityPath path = make_general_path(times, vals);

    const double v1 = rate_eps(s.grid, sg, s.model, s.eq, path, 0.2, 1e-6);
    const double v2 = rate_eps(s.grid, sg, s.model, s.eq, path, 0.1, 1e-6);
    const double v3 = rate_eps(s.grid, sg, s.model, s.eq, path, 0.05, 1e-6);
    CHECK(v1 > 0.0);
    CHECK(std::abs(v2 / v1 - 4.0) < 1e-8);
    CHECK(std::abs(v3 / v2 - 4.0) < 1e-8);
}

TEST_CASE("diffusive relaxation costs nothing in the limit") {
    auto s = make(ModelSpec::free_abp(1));
    Spatial sg = Spatial::line(32, kTwoPi);
    auto times = uniform_times(64, 1.0);
    auto rho = profile_slices(sg, times, [](double q, double t) {
        return 1.0 + 0.5 * std::cos(q) * std::exp(-0.5 * t);
    });
    DensityPath path = make_local_equilibrium_path(s.grid, sg, s.eq, times, rho);
    CHECK(rate_limit(s.grid, sg, s.eq, s.cs, path) < 1e-8);

    DensityPath general = make_general_path(path.times, path.values);
    CHECK(std::isinf(rate_limit(s.grid, sg, s.eq, s.cs, general)));
}

TEST_CASE("limit functional oracle and quadratic response") {
    auto s = make(ModelSpec::free_abp(1));
    Spatial sg = Spatial::line(32, kTwoPi);
    auto times = uniform_times(9, 1.0);

    auto value_at = [&](double delta) {
        auto rho = profile_slices(sg, times, [delta](double q, double) {
            return 1.0 + delta * std::cos(q);
        });
        DensityPath p = make_local_equilibrium_path(s.grid, sg, s.eq, times, rho);
        return rate_limit(s.grid, sg, s.eq, s.cs, p);
    };

    // Static single-mode bump against the flat diffusion solution:
    // g = D delta cos q with D = 1/2, value = pi T delta^2 / 8.
    const double d1 = 1e-2, d2 = 5e-3;
    const double v1 = value_at(d1), v2 = value_at(d2);
    const double oracle = oracles::pi * d1 * d1 / 8.0;
    CHECK(v1 > 0.0);
    CHECK(std::abs(v1 - oracle) < 1e-3 * oracle);
    CHECK(std::abs(v1 / (d1 * d1) - v2 / (d2 * d2)) < 1e-3 * v2 / (d2 * d2));
}

TEST_CASE("limit functional ignores the reporting phase of the cell data") {
    auto s = make(ModelSpec::von_mises());
    Spatial sg = Spatial::line(32, kTwoPi);
    auto times = uniform_times(17, 1.0);
    auto rho = profile_slices(sg, times, [](double q, double t) {
        return 1.0 + 0.4 * std::cos(q) * std::exp(-t / 3.0);
    });
    DensityPath path = make_local_equilibrium_path(s.grid, sg, s.eq, times, rho);
    const double base = rate_limit(s.grid, sg, s.eq, s.cs, path);

    XiPair xp{s.cs.xi, s.cs.flux_potential};
    Eigen::MatrixXd shifted = s.cs.psi.array() + 0.7;
    CoefficientSet cs2 = assemble_matrices(s.grid, s.model, s.eq, s.ops,
                                           shifted, s.cs.omega, xp);
    const double moved = rate_limit(s.grid, sg, s.eq, cs2, path);
    CHECK(std::abs(moved - base) < 1e-9 * base);
}

TEST_CASE("lower bound saturates on local equilibria") {
    auto s = make(ModelSpec::von_mises());
    Spatial sg = Spatial::line(32, kTwoPi);
    auto times = uniform_times(17, 1.0);
    auto rho = profile_slices(sg, times, [](double q, double t) {
        return 1.0 + 0.4 * std::cos(q) * std::exp(-t / 3.0);
    });
    DensityPath path = make_local_equilibrium_path(s.grid, sg, s.eq, times, rho);

    const double rl = rate_limit(s.grid, sg, s.eq, s.cs, path);
    const double lb = liminf_bound(s.grid, sg, s.model, s.eq, s.cs, path, 0.1);
    CHECK(rl > 0.0);
    CHECK(std::abs(lb - rl) < 1e-6 * rl);
}

TEST_CASE("missing local equilibrium inflates the cost") {
    auto s = make(ModelSpec::free_abp(1));
    Spatial sg = Spatial::line(32, kTwoPi);
    auto times = uniform_times(5, 1.0);

    auto frozen = [&](double (*ang)(double, double)) {
        Field f(s.grid.size(), sg.size());
        for (long x = 0; x < sg.size(); ++x) {
            const double q = sg.node(0, static_cast<int>(x));
            f.col(x) = s.eq.G.cwiseProduct(s.grid.sample(
                [q, ang](double th) { return ang(th, q); }));
        }
        return make_general_path(times, std::vector<Field>(times.size(), f));
    };

    // A polarized profile drags mass sideways, which finite-eps fibers
    // cannot pay for. Its dual data cancels exactly, so the restricted
    // bound degenerates to zero while staying below the infinite rate.
    DensityPath polar = frozen(+[](double th, double q) {
        return 1.0 + 0.5 * std::cos(th) * std::sin(q); });
    CHECK(std::isinf(rate_eps(s.grid, sg, s.model, s.eq, polar, 0.1)));
    CHECK(liminf_bound(s.grid, sg, s.model, s.eq, s.cs, polar, 0.1) == 0.0);

    // A second harmonic distortion keeps every fiber mass balanced but is
    // invisible to the slow ansatz, so the rate pays the fast price
    // growing like 1/eps^2.
    DensityPath dist = frozen(+[](double th, double q) {
        return 1.0 + 0.5 * std::cos(2.0 * th) * std::sin(q); });
    const double r1 = rate_eps(s.grid, sg, s.model, s.eq, dist, 0.1);
    const double r2 = rate_eps(s.grid, sg, s.model, s.eq, dist, 0.05);
    CHECK(std::isfinite(r1));
    CHECK(r2 / r1 == doctest::Approx(4.0).epsilon(0.01));

    // The certified bound stays finite and eps independent here. By hand
    // the dual problem has weight 1/2 - sin(q)/8 and data cos(q)/8, and
    // integrates to pi (4 - sqrt 15) / 16.
    const double lb1 = liminf_bound(s.grid, sg, s.model, s.eq, s.cs, dist, 0.1);
    const double lb2 = liminf_bound(s.grid, sg, s.model, s.eq, s.cs, dist, 0.05);
    const double expected = oracles::pi * (4.0 - std::sqrt(15.0)) / 16.0;
    CHECK(lb1 == doctest::Approx(expected).epsilon(1e-9));
    CHECK(lb2 == doctest::Approx(lb1).epsilon(1e-10));
    CHECK(lb1 <= r1);
}

TEST_CASE("recovery control from pure time forcing") {
    auto s = make(ModelSpec::free_abp(1));
    Spatial sg = Spatial::line(32, kTwoPi);
    const double delta = 0.05;
    auto times = uniform_times(3, 0.2);
    auto rho = profile_slices(sg, times, [delta](double q, double t) {
        return 1.0 + delta * t * std::cos(q);
    });

    RecoverySequence rec =
        build_recovery(s.grid, sg, s.model, s.eq, s.cs, times, rho, 0.1);

    // At t = 0 the profile is flat, so the corrector is carried entirely by
    // the control: div(Sigma a) = d_t rho gives a = 2 delta sin q.
    Eigen::VectorXd a0 = rec.a[0].col(0);
    Eigen::VectorXd a_oracle =
        sg.sample1([delta](double q) { return 2.0 * delta * std::sin(q); });
    CHECK((a0 - a_oracle).cwiseAbs().maxCoeff() < 1e-8);

    double f1_err = 0.0;
    for (long x = 0; x < sg.size(); ++x) {
        Eigen::VectorXd expect =
            -a_oracle(x) * s.eq.G.cwiseProduct(s.cs.xi.col(0));
        f1_err = std::max(f1_err,
                          (rec.f1[0].col(x) - expect).cwiseAbs().maxCoeff());
    }
    CHECK(f1_err < 1e-7);

    for (size_t sl = 0; sl < rec.f1.size(); ++sl)
        for (long x = 0; x < sg.size(); ++x)
            CHECK(std::abs(s.grid.quadrature(rec.f1[sl].col(x))) < 1e-12);
}

TEST_CASE("recovery for a diffusion solution reduces to the omega tilt") {
    auto s = make(ModelSpec::free_abp(1));
    Spatial sg = Spatial::line(32, kTwoPi);
    auto times = uniform_times(64, 1.0);
    auto rho = profile_slices(sg, times, [](double q, double t) {
        return 1.0 + 0.5 * std::cos(q) * std::exp(-0.5 * t);
    });

    RecoverySequence rec =
        build_recovery(s.grid, sg, s.model, s.eq, s.cs, times, rho, 0.1);
    double amax = 0.0, tilt_err = 0.0;
    for (int sl = 0; sl < rec.base.slices(); ++sl) {
        amax = std::max(amax, rec.a[static_cast<size_t>(sl)]
                                  .cwiseAbs().maxCoeff());
        Eigen::VectorXd dq = sg.partial(rec.base.rho[static_cast<size_t>(sl)], 0);
        for (long x = 0; x < sg.size(); ++x) {
            Eigen::VectorXd expect =
                -dq(x) * s.eq.G.cwiseProduct(s.cs.omega.col(0));
            tilt_err = std::max(
                tilt_err, (rec.f1[static_cast<size_t>(sl)].col(x) - expect)
                              .cwiseAbs().maxCoeff());
        }
    }
    CHECK(amax < 1e-4);
    CHECK(tilt_err < 1e-4);

    CHECK_THROWS_AS(
        build_recovery(s.grid, sg, s.model, s.eq, s.cs, times, rho, 50.0),
        EpsilonTooLarge);
}

TEST_CASE("sweep brackets the limit") {
    // The profile must not solve the limiting diffusion equation, otherwise
    // the corrector cancels exactly and every rate equals the limit. A decay
    // rate of 1 against the diffusive 1/2 keeps the cost positive.
    auto s = make(ModelSpec::free_abp(1));
    Spatial sg = Spatial::line(32, kTwoPi);
    auto times = uniform_times(25, 1.0);
    auto rho = profile_slices(sg, times, [](double q, double t) {
        return 1.0 + 0.5 * std::cos(q) * std::exp(-t);
    });

    GammaSweepReport rep = gamma_sweep(s.grid, sg, s.model, s.eq, s.cs, times,
                                       rho, {0.2, 0.1, 0.05});
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.limit > 0.0);

    double prev_gap = kInfValue;
    for (const auto& row : rep.rows) {
        CHECK(std::isfinite(row.rate));
        CHECK(row.rate >= 0.0);
        CHECK(row.lower_bound <= row.rate + 1e-9);
        const double gap = std::abs(row.rate - rep.limit);
        CHECK(gap < prev_gap);
        prev_gap = gap;
    }
    CHECK(rep.fitted_order >= 0.9);
    // eps = 0.1 entry lands near the limit (construction error vanishes
    // with eps).
    CHECK(std::abs(rep.rows[1].rate - rep.limit) <= 0.15 * rep.limit);
}

TEST_CASE("halving the time step is second order") {
    auto s = make(ModelSpec::free_abp(1));
    Spatial sg = Spatial::line(32, kTwoPi);
    auto value_at = [&](int S) {
        auto times = uniform_times(S, 1.0);
        auto rho = profile_slices(sg, times, [](double q, double t) {
            return 1.0 + 0.4 * std::cos(q) * std::exp(-t);
        });
        DensityPath p = make_local_equilibrium_path(s.grid, sg, s.eq, times, rho);
        return rate_limit(s.grid, sg, s.eq, s.cs, p);
    };
    const double v1 = value_at(9), v2 = value_at(17), v3 = value_at(33);
    const double ratio = (v1 - v2) / (v2 - v3);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("slice bookkeeping and input validation") {
    auto s = make(ModelSpec::free_abp(1));
    Spatial sg = Spatial::line(32, kTwoPi);

    Field f = Field::Constant(s.grid.size(), sg.size(), 1.0);
    f(3, 5) = -0.25;
    DensityPath bad = make_general_path({0.0, 0.5, 1.0}, {f, f, f});
    CHECK(check_path(s.grid, sg, bad).min_value == -0.25);
    CHECK_THROWS_AS(rho_time_derivative(bad, 1), ConfigError);

    CHECK_THROWS_AS(make_general_path({0.0, 1.0}, {f, f, f}), ConfigError);
    CHECK_THROWS_AS(A_eps(s.grid, sg, s.model, s.eq, bad, 1, 0.0), ConfigError);

    auto times2 = std::vector<double>{0.0, 1.0};
    auto rho2 = profile_slices(sg, times2, [](double, double) { return 1.0; });
    DensityPath two = make_local_equilibrium_path(s.grid, sg, s.eq, times2, rho2);
    CHECK_THROWS_AS(rate_limit(s.grid, sg, s.eq, s.cs, two), ConfigError);
}
