#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "slowfast/grid.hpp"

using namespace slowfast;

TEST_CASE("angular grid construction and quadrature") {
    CHECK_THROWS_AS(Angular(15), ConfigError);
    CHECK_THROWS_AS(Angular(8), ConfigError);

    Angular g(64);
    CHECK(g.size() == 64);
    CHECK(g.node(0) == doctest::Approx(-kPi));

    // Quadrature of 1 is 2 pi to machine precision.
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(64);
    CHECK(g.quadrature(ones) == doctest::Approx(kTwoPi).epsilon(1e-15));

    // Exact for trigonometric polynomials below the Nyquist degree:
    // integral of cos^2(3 theta) is pi.
    Eigen::VectorXd c3 = g.sample([](double th) { return std::cos(3 * th); });
    CHECK(g.quadrature(c3.cwiseProduct(c3)) == doctest::Approx(kPi).epsilon(1e-14));
    CHECK(std::abs(g.quadrature(c3)) < 1e-13);
}

TEST_CASE("spectral angular derivative") {
    Angular g(64);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(64);
    CHECK(g.d_theta(ones).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::VectorXd s = g.sample([](double th) { return std::sin(th); });
    Eigen::VectorXd c = g.sample([](double th) { return std::cos(th); });
    CHECK((g.d_theta(s) - c).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::VectorXd c3 = g.sample([](double th) { return std::cos(3 * th); });
    Eigen::VectorXd want = g.sample([](double th) { return -3 * std::sin(3 * th); });
    CHECK((g.d_theta(c3) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("integration by parts duality") {
    Angular g(64);
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 5; ++rep) {
        Eigen::VectorXd u = oracles::random_band_limited(g.nodes(), 20, rng, false);
        Eigen::VectorXd v = oracles::random_band_limited(g.nodes(), 20, rng, false);
        const double lhs = g.quadrature(u.cwiseProduct(g.d_theta(v)));
        const double rhs = -g.quadrature(g.d_theta(u).cwiseProduct(v));
        CHECK(std::abs(lhs - rhs) < 1e-10 * (1.0 + std::abs(lhs)));
    }
}

TEST_CASE("periodic antiderivative") {
    Angular g(64);
    Eigen::VectorXd c = g.sample([](double th) { return std::cos(th); });
    Eigen::VectorXd s = g.sample([](double th) { return std::sin(th); });
    CHECK((g.antiderivative_theta(c) - s).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::VectorXd zero = Eigen::VectorXd::Zero(64);
    CHECK(g.antiderivative_theta(zero).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd ones = Eigen::VectorXd::Ones(64);
    CHECK_THROWS_AS(g.antiderivative_theta(ones), NonZeroMean);

    // d_theta is a left inverse on mean-free band limited fields.
    std::mt19937_64 rng(11);
    Eigen::VectorXd r = oracles::random_band_limited(g.nodes(), 20, rng);
    Eigen::VectorXd C = g.antiderivative_theta(r);
    CHECK((g.d_theta(C) - r).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(g.quadrature(C)) < 1e-12);
}

TEST_CASE("trig interpolation evaluates off grid") {
    Angular g(32);
    Eigen::VectorXd u = g.sample([](double th) { return std::cos(3 * th) - 0.5 * std::sin(2 * th) + 2.0; });
    TrigInterp<double> interp(g, u);
    for (double th : {0.123, -2.5, 1.9, 3.04}) {
        const double want = std::cos(3 * th) - 0.5 * std::sin(2 * th) + 2.0;
        CHECK(interp(th) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("spatial grid quadrature and derivatives, 1d") {
    const double L = 3.0;
    Spatial s = Spatial::line(32, L);
    CHECK(s.quadrature(Eigen::VectorXd::Ones(32)) == doctest::Approx(L).epsilon(1e-14));

    Eigen::VectorXd u = s.sample1([&](double x) { return std::sin(kTwoPi * x / L); });
    Eigen::VectorXd du_want =
        s.sample1([&](double x) { return (kTwoPi / L) * std::cos(kTwoPi * x / L); });
    CHECK((s.partial(u, 0) - du_want).cwiseAbs().maxCoeff() < 1e-12);

    // div(grad f) = -(2 pi / L)^2 f for the single mode.
    Eigen::VectorXd lap = s.div(s.grad(u));
    CHECK((lap + (kTwoPi / L) * (kTwoPi / L) * u).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("spatial grid, 2d composition identity") {
    Spatial s = Spatial::square(16, 2.0);
    CHECK(s.size() == 256);
    CHECK(s.quadrature(Eigen::VectorXd::Ones(256)) == doctest::Approx(4.0).epsilon(1e-14));

    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // Smooth random field from a few separable modes.
    Eigen::VectorXd u = Eigen::VectorXd::Zero(s.size());
    for (int m = 1; m <= 3; ++m) {
        const double a = gauss(rng), b = gauss(rng);
        for (long x = 0; x < s.size(); ++x) {
            auto c = s.coords(x);
            u[x] += a * std::cos(kTwoPi * m * c[0] / 2.0) * std::sin(kTwoPi * m * c[1] / 2.0) +
                    b * std::sin(kTwoPi * m * c[0] / 2.0);
        }
    }

    // Divergence of gradient equals the sum of the per-dimension second
    // derivative operators applied to u (operator composition identity).
    Eigen::VectorXd divgrad = s.div(s.grad(u));
    Eigen::VectorXd lap = s.partial(s.partial(u, 0), 0) + s.partial(s.partial(u, 1), 1);
    CHECK((divgrad - lap).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + lap.cwiseAbs().maxCoeff()));

    // Gradient of a constant vanishes.
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(s.size());
    CHECK(s.partial(ones, 0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.partial(ones, 1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("weighted Poisson solve, 1d analytic") {
    const double L = 2.0;
    Spatial s = Spatial::line(64, L);
    const double k = kTwoPi / L;
    Eigen::VectorXd phi_want = s.sample1([&](double x) { return std::sin(k * x); });
    Eigen::VectorXd rhs = k * k * phi_want;

    Weight chi = Weight::isotropic(1, Eigen::VectorXd::Ones(64));
    Eigen::VectorXd phi = s.solve_weighted_poisson(chi, rhs);
    CHECK((phi - phi_want).cwiseAbs().maxCoeff() < 1e-10);

    // Zero right hand side gives the zero solution.
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(64);
    CHECK(s.solve_weighted_poisson(chi, zero).cwiseAbs().maxCoeff() < 1e-12);

    // Doubling the weight halves the solution.
    Weight chi2 = Weight::isotropic(1, 2.0 * Eigen::VectorXd::Ones(64));
    Eigen::VectorXd phi2 = s.solve_weighted_poisson(chi2, rhs);
    CHECK((2.0 * phi2 - phi).cwiseAbs().maxCoeff() < 1e-10);

    // Mean free requirement.
    CHECK_THROWS_AS(s.solve_weighted_poisson(chi, Eigen::VectorXd::Ones(64)),
                    NonZeroMean);

    // SPD requirement.
    Eigen::VectorXd bad = Eigen::VectorXd::Ones(64);
    bad[3] = -0.5;
    CHECK_THROWS_AS(s.solve_weighted_poisson(Weight::isotropic(1, bad), rhs),
                    SingularWeight);
}

TEST_CASE("weighted Poisson solve, 2d separable oracle") {
    const double L = 2.0 * kPi;
    Spatial s = Spatial::square(24, L);
    Eigen::VectorXd phi_want(s.size());
    for (long x = 0; x < s.size(); ++x) {
        auto c = s.coords(x);
        phi_want[x] = std::sin(c[0]) * std::cos(c[1]);
    }
    Eigen::VectorXd rhs = 2.0 * phi_want; // -laplacian of the product mode
    Weight chi = Weight::isotropic(2, Eigen::VectorXd::Ones(s.size()));
    Eigen::VectorXd phi = s.solve_weighted_poisson(chi, rhs);
    CHECK((phi - phi_want).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("spectral shift") {
    const double L = 2.0;
    Spatial s = Spatial::line(32, L);
    const double k = kTwoPi / L;
    Eigen::VectorXd u = s.sample1([&](double x) { return std::sin(k * x) + 0.3 * std::cos(2 * k * x); });
    const double d = 0.37;
    Eigen::VectorXd shifted = s.shift(u, {d, 0.0});
    Eigen::VectorXd want =
        s.sample1([&](double x) { return std::sin(k * (x - d)) + 0.3 * std::cos(2 * k * (x - d)); });
    CHECK((shifted - want).cwiseAbs().maxCoeff() < 1e-12);
}
