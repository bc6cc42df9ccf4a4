#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "slowfast/errors.hpp"
#include "slowfast/hminus.hpp"

using namespace slowfast;

TEST_CASE("fiber norm analytic value") {
    Angular grid(128);
    Eigen::VectorXd g = grid.sample([](double th) { return std::cos(th); });
    Eigen::VectorXd h = Eigen::VectorXd::Ones(128);
    FiberNormResult r = fiber_norm_sq(grid, g, h);
    REQUIRE(r.finite);
    CHECK(r.value == doctest::Approx(oracles::pi).epsilon(1e-10));
    Eigen::VectorXd sin_th = grid.sample([](double th) { return std::sin(th); });
    CHECK((r.control - sin_th).cwiseAbs().maxCoeff() < 1e-12);
    // multiplier witnesses the same value through the pairing
    CHECK(grid.quadrature(g.cwiseProduct(r.multiplier)) ==
          doctest::Approx(r.value).epsilon(1e-10));
    // control derives from the multiplier through the weight
    CHECK((r.control + h.cwiseProduct(grid.deriv() * r.multiplier))
              .cwiseAbs()
              .maxCoeff() < 1e-9);
}

TEST_CASE("fiber norm edge values and scalings") {
    Angular grid(64);
    Eigen::VectorXd h = grid.sample([](double th) { return 1.5 + std::cos(th); });
    SUBCASE("zero input") {
        CHECK(fiber_norm_value(grid, Eigen::VectorXd::Zero(64), h) == 0.0);
    }
    SUBCASE("quadratic homogeneity and weight scaling") {
        std::mt19937_64 rng(8);
        Eigen::VectorXd g = oracles::random_band_limited(grid.nodes(), 10, rng, true);
        const double base = fiber_norm_value(grid, g, h);
        CHECK(fiber_norm_value(grid, (3.0 * g).eval(), h) ==
              doctest::Approx(9.0 * base).epsilon(1e-10));
        CHECK(fiber_norm_value(grid, g, (2.0 * h).eval()) ==
              doctest::Approx(0.5 * base).epsilon(1e-10));
    }
    SUBCASE("monotone in the weight") {
        std::mt19937_64 rng(9);
        Eigen::VectorXd g = oracles::random_band_limited(grid.nodes(), 10, rng, true);
        Eigen::VectorXd h2 =
            h + grid.sample([](double th) { return 0.4 + 0.3 * std::sin(2 * th); });
        CHECK(fiber_norm_value(grid, g, h2) <= fiber_norm_value(grid, g, h));
    }
    SUBCASE("mass infeasibility returns infinity") {
        Eigen::VectorXd g = grid.sample([](double th) { return 0.2 + std::sin(th); });
        FiberNormResult r = fiber_norm_sq(grid, g, h);
        CHECK_FALSE(r.finite);
        CHECK(std::isinf(r.value));
        CHECK(std::isinf(fiber_norm_value(grid, g, h)));
    }
    SUBCASE("nonpositive weight rejected") {
        Eigen::VectorXd g = grid.sample([](double th) { return std::sin(th); });
        Eigen::VectorXd bad = h;
        bad(3) = 0.0;
        CHECK_THROWS_AS(fiber_norm_sq(grid, g, bad), SingularWeight);
    }
}

TEST_CASE("fiber duality gap on random inputs") {
    Angular grid(96);
    std::mt19937_64 rng(31);
    for (int t = 0; t < 12; ++t) {
        Eigen::VectorXd g = oracles::random_band_limited(grid.nodes(), 14, rng, true);
        Eigen::VectorXd logh = oracles::random_band_limited(grid.nodes(), 6, rng, false);
        Eigen::VectorXd h = logh.array().exp().matrix();
        FiberNormResult r = fiber_norm_sq(grid, g, h);
        REQUIRE(r.finite);
        const double sup_value = grid.quadrature(g.cwiseProduct(r.multiplier));
        CHECK(std::abs(sup_value - r.value) <= 1e-8 * std::max(1.0, r.value));

        // any competitor test function stays below the sup value
        Eigen::VectorXd phi = oracles::random_band_limited(grid.nodes(), 10, rng, false);
        const double trial =
            2.0 * grid.quadrature(g.cwiseProduct(phi)) -
            grid.quadrature(h.cwiseProduct((grid.deriv() * phi).cwiseAbs2()));
        CHECK(trial <= r.value + 1e-8 * std::max(1.0, r.value));
    }
}

TEST_CASE("spatial norm single-mode oracle") {
    const double L = 3.0;
    Spatial sgrid = Spatial::line(64, L);
    Weight chi = Weight::isotropic(1, Eigen::VectorXd::Ones(64));
    Eigen::VectorXd g =
        sgrid.sample1([&](double x) { return std::sin(kTwoPi * x / L); });
    SpatialNormResult r = spatial_weighted_norm_sq(sgrid, g, chi);
    REQUIRE(r.finite);
    const double expected = 0.5 * L * (L / kTwoPi) * (L / kTwoPi);
    CHECK(r.value == doctest::Approx(expected).epsilon(1e-10));
    // control certifies the same value through the inf form
    const double inf_form =
        sgrid.quadrature(r.control[0].cwiseAbs2().cwiseQuotient(chi.a11));
    CHECK(inf_form == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("spatial norm scaling, infeasibility, and degenerate weight") {
    const double L = 2.0;
    Spatial sgrid = Spatial::line(32, L);
    Eigen::VectorXd g =
        sgrid.sample1([&](double x) { return std::sin(kTwoPi * x / L) + 0.5 * std::cos(2 * kTwoPi * x / L); });
    Weight chi = Weight::isotropic(1, Eigen::VectorXd::Ones(32));
    const double base = spatial_weighted_norm_sq(sgrid, g, chi).value;

    Weight chi2 = chi;
    chi2.a11 *= 2.0;
    CHECK(spatial_weighted_norm_sq(sgrid, g, chi2).value ==
          doctest::Approx(0.5 * base).epsilon(1e-9));

    Eigen::VectorXd massive = g;
    massive.array() += 0.3;
    SpatialNormResult r = spatial_weighted_norm_sq(sgrid, massive, chi);
    CHECK_FALSE(r.finite);

    Weight bad = chi;
    bad.a11(5) = 0.0;
    CHECK_THROWS_AS(spatial_weighted_norm_sq(sgrid, g, bad), SingularWeight);
}

TEST_CASE("planar duality with an anisotropic weight") {
    Spatial sgrid = Spatial::square(16, kTwoPi);
    std::mt19937_64 rng(77);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const long K = sgrid.size();
    Weight chi = Weight::isotropic(2, Eigen::VectorXd::Ones(K));
    chi.a11 = sgrid.sample([](double u, double) { return 1.5 + 0.4 * std::cos(u); });
    chi.a22 = sgrid.sample([](double, double v) { return 1.2 + 0.3 * std::sin(v); });
    chi.a12 = sgrid.sample([](double u, double v) { return 0.2 * std::sin(u + v); });
    chi.require_spd();

    for (int t = 0; t < 4; ++t) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(K);
        for (int m = 1; m <= 2; ++m) {
            const double a = gauss(rng), b = gauss(rng), c = gauss(rng);
            g += sgrid.sample([&](double u, double v) {
                return a * std::cos(m * u) + b * std::sin(m * v) +
                       c * std::cos(m * (u + v));
            });
        }
        g.array() -= g.mean();
        SpatialNormResult r = spatial_weighted_norm_sq(sgrid, g, chi);
        REQUIRE(r.finite);
        // inf form with the explicit control: quadrature(c . chi^-1 c)
        double inf_form = 0.0;
        for (long x = 0; x < K; ++x) {
            const double det = chi.a11(x) * chi.a22(x) - chi.a12(x) * chi.a12(x);
            const double c1 = r.control[0](x), c2 = r.control[1](x);
            inf_form += (chi.a22(x) * c1 * c1 - 2.0 * chi.a12(x) * c1 * c2 +
                         chi.a11(x) * c2 * c2) /
                        det;
        }
        inf_form *= sgrid.quad_weight();
        CHECK(std::abs(inf_form - r.value) <= 1e-8 * std::max(1.0, r.value));
    }
}
