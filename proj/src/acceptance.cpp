#include "slowfast/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <random>
#include <sstream>
#include <utility>

#include "slowfast/coeffs.hpp"
#include "slowfast/equilibrium.hpp"
#include "slowfast/hminus.hpp"
#include "slowfast/kinetic.hpp"
#include "slowfast/linops.hpp"
#include "slowfast/model.hpp"
#include "slowfast/particles.hpp"
#include "slowfast/ratefunc.hpp"

namespace slowfast {

namespace {

constexpr int kM = 128;     // angular nodes for every operator check
constexpr int kK = 64;      // spatial nodes per axis

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return std::string(buf);
}

// Collects named measurements against their thresholds; the check passes
// only when every bound holds.
struct Gate {
    bool pass = true;
    std::ostringstream text;
    bool first = true;

    void sep() {
        if (!first) text << "; ";
        first = false;
    }
    void note(const std::string& label, double value) {
        sep();
        text << label << " = " << fmt(value);
    }
    void bound(const std::string& label, double value, double limit) {
        sep();
        const bool ok = value <= limit;
        pass = pass && ok;
        text << label << " = " << fmt(value) << " <= " << fmt(limit)
             << (ok ? "" : " FAILED");
    }
    void require(const std::string& label, bool ok) {
        sep();
        pass = pass && ok;
        text << label << (ok ? " ok" : " FAILED");
    }
};

struct Assembled {
    Angular grid;
    SampledModel model;
    EquilibriumState eq;
    LinearizedOps ops;
};

Assembled assemble(const ModelSpec& spec) {
    Assembled a{Angular(kM), {}, {}, {}};
    a.model = sample_model(a.grid, spec);
    a.eq = solve_equilibrium(a.grid, a.model);
    a.ops = assemble_linearized(a.grid, a.model, a.eq);
    return a;
}

Eigen::VectorXd band_limited(const Angular& grid, int max_mode,
                             std::mt19937_64& rng, bool mean_free) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.size());
    if (!mean_free) out.array() += gauss(rng);
    for (int m = 1; m <= max_mode; ++m) {
        const double a = gauss(rng), b = gauss(rng);
        for (int j = 0; j < grid.size(); ++j)
            out[j] += a * std::cos(m * grid.node(j)) +
                      b * std::sin(m * grid.node(j));
    }
    return out;
}

// ---- 1: stationary density against an independent normalization ---------

Gate check_equilibrium_oracle() {
    Gate g;
    Angular grid(kM);
    SampledModel model = sample_model(grid, ModelSpec::von_mises());
    EquilibriumState eq = solve_equilibrium(grid, model);

    // Two independent routes to the partition function of e^{-cos}:
    // a fine trapezoid and the modified Bessel series 2 pi I0(1).
    const int fine = 1 << 16;
    double Z = 0.0;
    for (int j = 0; j < fine; ++j)
        Z += std::exp(-std::cos(kTwoPi * j / fine));
    Z *= kTwoPi / fine;
    double i0 = 0.0, term = 1.0;
    for (int k = 0; k < 24; ++k) {
        i0 += term;
        term *= 0.25 / ((k + 1.0) * (k + 1.0));
    }
    g.bound("route gap |Z - 2 pi I0(1)|/Z", std::abs(Z - kTwoPi * i0) / Z,
            1e-13);

    double worst = 0.0;
    for (int j = 0; j < grid.size(); ++j) {
        const double exact = std::exp(-std::cos(grid.node(j))) / Z;
        worst = std::max(worst, std::abs(eq.G(j) - exact));
    }
    g.bound("max |G - exact|", worst, 1e-9);
    g.bound("flux residual", eq.residual, 1e-9);
    return g;
}

// ---- 2: linearized operator identities -----------------------------------

Gate check_operator_identities() {
    Gate g;
    for (const auto& spec : {ModelSpec::free_abp(2), ModelSpec::von_mises(),
                             ModelSpec::active_2d(0.2)}) {
        Assembled a = assemble(spec);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(kM);
        g.bound(spec.name + " |L G|", (a.ops.L * a.eq.G).cwiseAbs().maxCoeff(),
                1e-8);
        g.bound(spec.name + " |Ladj 1|",
                (a.ops.Ladj * ones).cwiseAbs().maxCoeff(), 1e-8);
        g.bound(spec.name + " adjoint gap", a.ops.adjointness_gap, 1e-9);
        g.bound(spec.name + " |Pi L|",
                (a.ops.Pi_G * a.ops.L).cwiseAbs().maxCoeff(), 1e-10);
    }
    return g;
}

// ---- 3: dissipativity margin ---------------------------------------------

Gate check_dissipativity_margin() {
    Gate g;
    for (const auto& spec : {ModelSpec::free_abp(2), ModelSpec::von_mises()}) {
        Assembled a = assemble(spec);
        g.bound(spec.name + " |kappa - 1|", std::abs(a.ops.kappa_margin - 1.0),
                1e-8);
    }
    Assembled a = assemble(ModelSpec::active_2d(0.2));
    g.note("active_2d kappa", a.ops.kappa_margin);
    g.require("active_2d kappa > 0", a.ops.kappa_margin > 0.0);
    return g;
}

// ---- 4: free planar coefficients -----------------------------------------

Gate check_free_coefficients() {
    Gate g;
    Assembled a = assemble(ModelSpec::free_abp(2));
    CoefficientSet cs = solve_coefficients(a.grid, a.model, a.eq, a.ops);
    const Eigen::MatrixXd half = 0.5 * Eigen::MatrixXd::Identity(2, 2);
    g.bound("|D - I/2|", (cs.Dmat - half).cwiseAbs().maxCoeff(), 1e-10);
    g.bound("|Sigma - I/2|", (cs.Sigma - half).cwiseAbs().maxCoeff(), 1e-10);

    // Constant shifts of the adjoint cell solutions must not move the
    // matrices: only derivatives and centered pairings enter them.
    Eigen::MatrixXd shifted = cs.psi;
    shifted.col(0).array() += 0.7;
    shifted.col(1).array() -= 1.3;
    XiPair xp{cs.xi, cs.flux_potential};
    CoefficientSet alt =
        assemble_matrices(a.grid, a.model, a.eq, a.ops, shifted, cs.omega, xp);
    g.bound("shift |D - D'|", (alt.Dmat - cs.Dmat).cwiseAbs().maxCoeff(),
            1e-10);
    g.bound("shift |Sigma - Sigma'|",
            (alt.Sigma - cs.Sigma).cwiseAbs().maxCoeff(), 1e-10);
    return g;
}

// ---- 5: coefficient matrix identities ------------------------------------

Gate check_matrix_identities() {
    Gate g;
    for (const auto& spec :
         {ModelSpec::von_mises(), ModelSpec::active_2d(0.2)}) {
        Assembled a = assemble(spec);
        CoefficientSet cs = solve_coefficients(a.grid, a.model, a.eq, a.ops);
        g.bound(spec.name + " |E - R|", (cs.Emat - cs.Rmat).norm(), 1e-8);
        g.bound(spec.name + " |R - Sigma|", (cs.Rmat - cs.Sigma).norm(), 1e-8);

        SchurReport rep = schur_sweep(a.grid, a.model, a.eq, a.ops, 32, 2024);
        g.bound(spec.name + " -min eig(Sigma - E R+ E')",
                -rep.min_eig_gap, 1e-10);

        double dual = 0.0, scale = 0.0;
        for (int k = 0; k < a.model.n; ++k)
            for (int l = 0; l < a.model.n; ++l) {
                const double lhs = a.grid.quadrature(a.eq.G.cwiseProduct(
                    cs.psi.col(k).cwiseProduct(a.ops.Vbar.col(l))));
                const double rhs = a.grid.quadrature(a.eq.G.cwiseProduct(
                    a.ops.Vbar.col(k).cwiseProduct(cs.omega.col(l))));
                dual = std::max(dual, std::abs(lhs - rhs));
                scale = std::max(scale, std::abs(lhs));
            }
        g.bound(spec.name + " cell duality gap", dual,
                1e-9 * std::max(1.0, scale));
    }
    return g;
}

// ---- 6: weighted norm duality --------------------------------------------

Gate check_norm_duality() {
    Gate g;
    Angular grid(kM);

    FiberNormResult pi_case = fiber_norm_sq(
        grid, grid.sample([](double th) { return std::cos(th); }),
        Eigen::VectorXd::Ones(kM));
    g.bound("|value(cos, 1) - pi|", std::abs(pi_case.value - kPi), 1e-10);

    std::mt19937_64 rng(4242);
    double worst_fiber = 0.0;
    for (int t = 0; t < 30; ++t) {
        Eigen::VectorXd gg = band_limited(grid, 14, rng, true);
        Eigen::VectorXd h =
            band_limited(grid, 6, rng, false).array().exp().matrix();
        FiberNormResult r = fiber_norm_sq(grid, gg, h);
        if (!r.finite) {
            g.require("fiber input feasible", false);
            return g;
        }
        const double sup = grid.quadrature(gg.cwiseProduct(r.multiplier));
        worst_fiber = std::max(worst_fiber, std::abs(sup - r.value) /
                                                std::max(1.0, r.value));
    }
    g.bound("fiber inf-sup gap (30 inputs)", worst_fiber, 1e-8);

    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst_line = 0.0;
    Spatial line = Spatial::line(kK, kTwoPi);
    for (int t = 0; t < 12; ++t) {
        Eigen::VectorXd gg = Eigen::VectorXd::Zero(line.size());
        for (int m = 1; m <= 3; ++m) {
            const double a = gauss(rng), b = gauss(rng);
            gg += line.sample1([&](double q) {
                return a * std::cos(m * q) + b * std::sin(m * q);
            });
        }
        gg.array() -= gg.mean();
        Weight chi = Weight::isotropic(1, line.sample1([&](double q) {
            return 1.4 + 0.5 * std::cos(q + 0.3 * t);
        }));
        SpatialNormResult r = spatial_weighted_norm_sq(line, gg, chi);
        if (!r.finite) {
            g.require("line input feasible", false);
            return g;
        }
        const double inf_form =
            line.quadrature(r.control[0].cwiseAbs2().cwiseQuotient(chi.a11));
        worst_line = std::max(worst_line, std::abs(inf_form - r.value) /
                                              std::max(1.0, r.value));
    }
    g.bound("line inf-sup gap (12 inputs)", worst_line, 1e-8);

    double worst_plane = 0.0;
    Spatial plane = Spatial::square(kK, kTwoPi);
    Weight chi = Weight::isotropic(2, Eigen::VectorXd::Ones(plane.size()));
    chi.a11 = plane.sample([](double u, double) { return 1.5 + 0.4 * std::cos(u); });
    chi.a22 = plane.sample([](double, double v) { return 1.2 + 0.3 * std::sin(v); });
    chi.a12 = plane.sample([](double u, double v) { return 0.2 * std::sin(u + v); });
    chi.require_spd();
    for (int t = 0; t < 8; ++t) {
        Eigen::VectorXd gg = Eigen::VectorXd::Zero(plane.size());
        for (int m = 1; m <= 2; ++m) {
            const double a = gauss(rng), b = gauss(rng), c = gauss(rng);
            gg += plane.sample([&](double u, double v) {
                return a * std::cos(m * u) + b * std::sin(m * v) +
                       c * std::cos(m * (u + v));
            });
        }
        gg.array() -= gg.mean();
        SpatialNormResult r = spatial_weighted_norm_sq(plane, gg, chi);
        if (!r.finite) {
            g.require("plane input feasible", false);
            return g;
        }
        double inf_form = 0.0;
        for (long x = 0; x < plane.size(); ++x) {
            const double det =
                chi.a11(x) * chi.a22(x) - chi.a12(x) * chi.a12(x);
            const double c1 = r.control[0](x), c2 = r.control[1](x);
            inf_form += (chi.a22(x) * c1 * c1 - 2.0 * chi.a12(x) * c1 * c2 +
                         chi.a11(x) * c2 * c2) /
                        det;
        }
        inf_form *= plane.quad_weight();
        worst_plane = std::max(worst_plane, std::abs(inf_form - r.value) /
                                                std::max(1.0, r.value));
    }
    g.bound("plane inf-sup gap (8 inputs)", worst_plane, 1e-8);
    return g;
}

// ---- 7: rate functional ladder -------------------------------------------

Gate check_rate_ladder() {
    Gate g;
    Assembled a = assemble(ModelSpec::free_abp(1));
    CoefficientSet cs = solve_coefficients(a.grid, a.model, a.eq, a.ops);
    Spatial sg = Spatial::line(kK, kTwoPi);

    auto times_of = [](int S, double T) {
        std::vector<double> t(static_cast<size_t>(S));
        for (int s = 0; s < S; ++s) t[static_cast<size_t>(s)] = T * s / (S - 1);
        return t;
    };
    auto slices_of = [&](const std::vector<double>& times, double decay) {
        std::vector<Eigen::VectorXd> rho;
        rho.reserve(times.size());
        for (double t : times)
            rho.push_back(sg.sample1([&](double q) {
                return 1.0 + 0.5 * std::cos(q) * std::exp(-decay * t);
            }));
        return rho;
    };

    // A profile decaying at rate 1 against the diffusive 1/2 keeps the
    // limiting cost positive; the recovery sequence must approach it.
    auto times = times_of(25, 1.0);
    GammaSweepReport rep = gamma_sweep(a.grid, sg, a.model, a.eq, cs, times,
                                       slices_of(times, 1.0),
                                       {0.2, 0.1, 0.05, 0.025});
    g.note("limit", rep.limit);
    g.require("limit > 0", rep.limit > 0.0);
    double prev = kInfValue;
    bool monotone = true, bounded = true, finite = true;
    for (const auto& row : rep.rows) {
        finite = finite && std::isfinite(row.rate) && row.rate >= 0.0;
        bounded = bounded && row.lower_bound <= row.rate + 1e-9;
        const double gap = std::abs(row.rate - rep.limit);
        monotone = monotone && gap < prev;
        prev = gap;
    }
    g.require("rates finite", finite);
    g.require("|rate - limit| decreasing over eps ladder", monotone);
    g.require("lower bound <= rate at every eps", bounded);
    g.sep();
    g.text << "fitted order = " << fmt(rep.fitted_order) << " >= 0.9";
    g.pass = g.pass && rep.fitted_order >= 0.9;

    // A solution of the limiting diffusion equation costs nothing.
    auto dtimes = times_of(64, 1.0);
    DensityPath diff = make_local_equilibrium_path(a.grid, sg, a.eq, dtimes,
                                                   slices_of(dtimes, 0.5));
    g.bound("rate at a diffusion solution", rate_limit(a.grid, sg, a.eq, cs, diff),
            1e-8);
    return g;
}

// ---- 8: kinetic marginal against the diffusion decay ---------------------

Gate check_kinetic_decay() {
    Gate g;
    Assembled a = assemble(ModelSpec::free_abp(1));
    CoefficientSet cs = solve_coefficients(a.grid, a.model, a.eq, a.ops);
    Spatial sg = Spatial::line(kK, kTwoPi);
    Eigen::VectorXd rho0 =
        sg.sample1([](double q) { return 1.0 + 0.5 * std::cos(q); });

    ChapmanEnskogReport rep = chapman_enskog_check(
        a.grid, sg, a.model, a.eq, cs, rho0, {0.2, 0.1, 0.05, 0.025});
    g.bound("|predicted rate - 1/2|", std::abs(rep.predicted_rate - 0.5),
            1e-9);
    g.sep();
    g.text << "fitted order = " << fmt(rep.fitted_order) << " in [1.7, 2.3]";
    g.pass = g.pass && rep.fitted_order >= 1.7 && rep.fitted_order <= 2.3;
    const double rate_at_005 = rep.rows[2].decay_rate;
    g.bound("mode decay rate gap at eps 0.05",
            std::abs(rate_at_005 - rep.predicted_rate),
            0.01 * rep.predicted_rate);
    return g;
}

// ---- 9: particle transport against the coefficients ----------------------

Gate check_particle_transport() {
    Gate g;
    ModelSpec spec = ModelSpec::free_abp(2, 0.1);
    Assembled a = assemble(spec);
    CoefficientSet cs = solve_coefficients(a.grid, a.model, a.eq, a.ops);

    ParticleModel pm = build_particle_model(spec);
    SimConfig cfg;
    cfg.N = 10000;
    cfg.dt = 0.05;
    cfg.T = 1000.0;
    cfg.burn_in = 10.0;
    cfg.seed = 3;
    cfg.sample_stride = 20;
    TransportEstimate est = estimate_transport(pm, cfg);

    for (int d = 0; d < 2; ++d) {
        const double pred = cs.Dmat(d, d);
        const double gap = std::abs(est.diffusivity(d, d) - pred);
        g.bound("diffusivity gap axis " + std::to_string(d), gap, 0.1 * pred);
        g.bound("outside 95% interval axis " + std::to_string(d), gap,
                1.96 * est.diffusivity_se(d, d));
        const double vbar =
            weighted_mean(a.grid, a.eq.G, a.model.V.col(d));
        g.bound("drift gap axis " + std::to_string(d),
                std::abs(est.drift(d) - vbar), 3.0 * est.drift_se(d));
    }
    return g;
}

// ---- 10: density mode variances ------------------------------------------

Gate check_mode_variances() {
    Gate g;
    ModelSpec spec = ModelSpec::free_abp(1, 0.5);
    ParticleModel pm = build_particle_model(spec);

    SimConfig base;
    base.dt = 0.05;
    base.T = 800.0;
    base.burn_in = 10.0;
    base.sample_stride = 10;
    base.max_mode = 4;

    SimConfig ca = base;
    ca.N = 5000;
    ca.seed = 21;
    SimConfig cb = base;
    cb.N = 10000;
    cb.seed = 22;
    FluctuationReport ra = fluctuation_spectrum(pm, ca);
    FluctuationReport rb = fluctuation_spectrum(pm, cb);

    // Independent uniform walkers: every mode variance is exactly the
    // 1/N of the unit-mass empirical measure.
    double worst_z = 0.0;
    const std::pair<const FluctuationReport*, long> reps[] = {{&ra, ca.N},
                                                              {&rb, cb.N}};
    for (const auto& rep : reps) {
        for (const auto& mode : rep.first->modes) {
            const double z =
                std::abs(mode.variance - 1.0 / rep.second) / mode.se;
            worst_z = std::max(worst_z, z);
        }
    }
    g.bound("worst |variance - 1/N| z-score (8 modes)", worst_z, 3.0);

    double worst_scale = 0.0;
    for (size_t m = 0; m < ra.modes.size(); ++m) {
        const double va = ra.modes[m].variance, vb = rb.modes[m].variance;
        const double se = std::sqrt(ra.modes[m].se * ra.modes[m].se +
                                    4.0 * rb.modes[m].se * rb.modes[m].se);
        worst_scale = std::max(worst_scale, std::abs(va - 2.0 * vb) / se);
    }
    g.bound("worst doubling z-score", worst_scale, 3.0);
    return g;
}

struct CheckSpec {
    int id;
    const char* name;
    Gate (*fn)();
    double budget; // seconds, 0 = only the suite total applies
};

const CheckSpec kChecks[] = {
    {1, "stationary density matches Bessel quadrature",
     check_equilibrium_oracle, 1.0},
    {2, "linearized operator kernel, adjoint, and mass projector",
     check_operator_identities, 0.0},
    {3, "dissipativity margin at and away from reversibility",
     check_dissipativity_margin, 0.0},
    {4, "free planar coefficients and shift invariance",
     check_free_coefficients, 0.0},
    {5, "coefficient matrix identities and Schur inequality",
     check_matrix_identities, 0.0},
    {6, "weighted norm duality and closed form", check_norm_duality, 0.0},
    {7, "rate functional ladder brackets its limit", check_rate_ladder, 180.0},
    {8, "kinetic marginal follows the diffusion decay", check_kinetic_decay,
     300.0},
    {9, "particle transport matches the coefficients",
     check_particle_transport, 180.0},
    {10, "density mode variances scale as one over N", check_mode_variances,
     180.0},
};

} // namespace

std::vector<CheckResult> run_acceptance_checks(const CheckObserver& observer) {
    std::vector<CheckResult> out;
    for (const auto& spec : kChecks) {
        CheckResult r;
        r.id = spec.id;
        r.name = spec.name;
        const auto start = std::chrono::steady_clock::now();
        try {
            Gate g = spec.fn();
            r.pass = g.pass;
            r.detail = g.text.str();
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
        if (spec.budget > 0.0 && r.seconds > spec.budget) {
            r.pass = false;
            r.detail += "; exceeded " + fmt(spec.budget) + " s budget";
        }
        if (observer) observer(r);
        out.push_back(std::move(r));
    }
    return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return !results.empty();
}

std::string format_check_line(const CheckResult& r) {
    char head[64];
    std::snprintf(head, sizeof(head), "%s %2d  ", r.pass ? "PASS" : "FAIL",
                  r.id);
    return std::string(head) + r.name + ": " + r.detail + " (" +
           fmt(r.seconds) + " s)";
}

} // namespace slowfast
