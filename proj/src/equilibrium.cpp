#include "slowfast/equilibrium.hpp"

#include <cmath>
#include <random>
#include <string>

#include "slowfast/parallel.hpp"

namespace slowfast {

namespace {

// One application of the fixed point map: G -> normalized exp(-H) with
// dH/dtheta the (mean-projected) stationary drift at G. Returns the image
// and reports the quadrature mean of the unprojected drift.
Eigen::VectorXd apply_map(const Angular& grid, const SampledModel& model,
                          const Eigen::VectorXd& G, double* mean_drift,
                          Eigen::VectorXd* H_out) {
    Eigen::VectorXd drift = model.dU + convolve_F(grid, model, G);
    const double mean = grid.quadrature(drift);
    if (mean_drift) *mean_drift = mean;
    drift.array() -= mean / kTwoPi; // periodic part; full mean is reported
    Eigen::VectorXd H = grid.antideriv() * drift;
    H.array() -= grid.quadrature(H) / kTwoPi;
    Eigen::VectorXd G_new = (-H.array()).exp().matrix();
    G_new /= grid.quadrature(G_new);
    if (H_out) *H_out = H;
    return G_new;
}

double flux_residual(const Angular& grid, const SampledModel& model,
                     const Eigen::VectorXd& G) {
    const Eigen::VectorXd drift = model.dU + convolve_F(grid, model, G);
    const Eigen::VectorXd res = drift.cwiseProduct(G) + grid.deriv() * G;
    return res.cwiseAbs().maxCoeff();
}

// Observed Lipschitz ratio of the undamped map at G*: probe a few low
// Fourier directions (the interaction acts through them) and report the
// largest response ratio.
double contraction_probe(const Angular& grid, const SampledModel& model,
                         const Eigen::VectorXd& G) {
    const double delta = 1e-6;
    const Eigen::VectorXd base = apply_map(grid, model, G, nullptr, nullptr);
    double worst = 0.0;
    for (int m = 1; m <= 2; ++m) {
        for (bool use_sin : {false, true}) {
            Eigen::VectorXd v = grid.sample([&](double th) {
                return use_sin ? std::sin(m * th) : std::cos(m * th);
            });
            Eigen::VectorXd probe =
                apply_map(grid, model, (G + delta * v).eval(), nullptr, nullptr);
            worst = std::max(worst,
                             (probe - base).cwiseAbs().maxCoeff() / delta);
        }
    }
    return worst;
}

} // namespace

EquilibriumState solve_equilibrium(const Angular& grid, const SampledModel& model,
                                   const EquilibriumOptions& opts) {
    const int M = grid.size();
    Eigen::VectorXd G = opts.initial
                            ? *opts.initial
                            : Eigen::VectorXd::Constant(M, 1.0 / kTwoPi);
    if (G.minCoeff() <= 0.0)
        throw ConfigError("equilibrium initial density must be positive");
    G /= grid.quadrature(G);

    EquilibriumState st;
    double alpha = opts.alpha0;
    Eigen::VectorXd delta_prev;
    bool converged = false;

    for (int it = 1; it <= opts.max_iter; ++it) {
        Eigen::VectorXd H;
        Eigen::VectorXd TG = apply_map(grid, model, G, &st.mean_drift, &H);
        Eigen::VectorXd delta = TG - G;
        if (it > 1 && delta_prev.size() == delta.size() &&
            delta.dot(delta_prev) < 0.0)
            alpha = std::max(0.5 * alpha, 1e-3); // halve on oscillation
        delta_prev = delta;

        G = G + alpha * delta;
        G /= grid.quadrature(G);
        st.H = H;
        st.iterations = it;

        if (alpha * delta.cwiseAbs().maxCoeff() < opts.tol_iter) {
            converged = true;
            break;
        }
    }

    // Undamped polish: each full map application contracts the distance to
    // the fixed point at the raw rate (and lands exactly on it when the map
    // ignores its argument), pushing the flux residual toward roundoff.
    if (converged) {
        double best = flux_residual(grid, model, G);
        for (int p = 0; p < 3; ++p) {
            Eigen::VectorXd Gp = apply_map(grid, model, G, nullptr, nullptr);
            const double res = flux_residual(grid, model, Gp);
            if (res >= best) break;
            G = Gp;
            best = res;
        }
    }

    st.G = G;
    // Recompute H at the converged density so G and H describe the same state.
    Eigen::VectorXd TG = apply_map(grid, model, G, &st.mean_drift, &st.H);
    st.residual = flux_residual(grid, model, G);
    st.contraction_estimate = contraction_probe(grid, model, G);
    st.noncontractive = st.contraction_estimate >= 1.0;

    if (!converged || st.residual > opts.tol_eq)
        throw NoConvergence(
            "equilibrium iteration: " +
            std::string(converged ? "flux residual " + std::to_string(st.residual) +
                                        " above tolerance"
                                  : "no convergence in " +
                                        std::to_string(opts.max_iter) + " iterations") +
            " (mean drift " + std::to_string(st.mean_drift) +
            ", contraction estimate " + std::to_string(st.contraction_estimate) + ")");

    // Positivity envelope from the drift magnitude. C bounds |dH/dtheta|,
    // so osc(H) <= 2 pi C and the normalized density is pinched between the
    // stated explicit constants.
    const double C = model.dU.cwiseAbs().maxCoeff() +
                     (model.has_interaction ? model.Fker.cwiseAbs().maxCoeff() : 0.0);
    const double env = C + model.dlogGamma.cwiseAbs().maxCoeff();
    st.lower_bound = (1.0 / (4.0 * kPi)) * std::exp(-kTwoPi * env);
    st.upper_bound = (1.0 / kPi) * std::exp(kTwoPi * env);
    return st;
}

UniquenessReport uniqueness_probe(const Angular& grid, const SampledModel& model,
                                  int trials, std::uint64_t seed,
                                  const EquilibriumOptions& opts) {
    UniquenessReport rep;
    rep.trials = trials;
    std::vector<Eigen::VectorXd> results(static_cast<size_t>(trials));
    rep.contraction_estimates.resize(static_cast<size_t>(trials), 0.0);
    std::vector<std::string> failures(static_cast<size_t>(trials));

    parallel_for(trials, [&](long t) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(t) * 0x9e3779b97f4a7c15ULL);
        std::normal_distribution<double> gauss(0.0, 0.5);
        Eigen::VectorXd ramp = Eigen::VectorXd::Zero(grid.size());
        for (int m = 1; m <= 4; ++m) {
            const double am = gauss(rng), bm = gauss(rng);
            for (int j = 0; j < grid.size(); ++j)
                ramp[j] += am * std::cos(m * grid.node(j)) +
                           bm * std::sin(m * grid.node(j));
        }
        EquilibriumOptions local = opts;
        local.initial = ramp.array().exp().matrix();
        try {
            EquilibriumState st = solve_equilibrium(grid, model, local);
            results[static_cast<size_t>(t)] = st.G;
            rep.contraction_estimates[static_cast<size_t>(t)] = st.contraction_estimate;
        } catch (const NoConvergence& e) {
            failures[static_cast<size_t>(t)] = e.what();
        }
    });

    for (const auto& f : failures)
        if (!f.empty()) throw NoConvergence("uniqueness probe trial failed: " + f);

    for (int a = 0; a < trials; ++a)
        for (int b = a + 1; b < trials; ++b)
            rep.max_pairwise_distance = std::max(
                rep.max_pairwise_distance,
                (results[static_cast<size_t>(a)] - results[static_cast<size_t>(b)])
                    .cwiseAbs()
                    .maxCoeff());
    for (double c : rep.contraction_estimates)
        if (c >= 1.0) rep.any_noncontractive = true;
    return rep;
}

} // namespace slowfast
