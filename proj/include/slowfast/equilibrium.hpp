#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "slowfast/model.hpp"

namespace slowfast {

struct EquilibriumOptions {
    double alpha0 = 0.5;     // initial damping of the fixed point map
    double tol_iter = 1e-12; // sup-norm change between iterates
    double tol_eq = 1e-9;    // stationary flux residual, sup-norm
    int max_iter = 10000;
    std::optional<Eigen::VectorXd> initial;
};

// Converged stationary angular density G = e^{-H} (normalized), together
// with its certificates.
struct EquilibriumState {
    Eigen::VectorXd G;
    Eigen::VectorXd H;
    double residual = 0.0;             // sup |(dU + F(G)) G + dG/dtheta|
    int iterations = 0;
    double contraction_estimate = 0.0; // observed Lipschitz ratio of the map
    bool noncontractive = false;       // contraction_estimate >= 1 seen
    double mean_drift = 0.0;           // quadrature of dU + F(G); 0 for
                                       // gradient models, nonzero flags a
                                       // non-equilibrium (tilted) model
    double lower_bound = 0.0;          // positivity envelope, min G >= this
    double upper_bound = 0.0;          // and max G <= this
};

struct UniquenessReport {
    int trials = 0;
    double max_pairwise_distance = 0.0;
    std::vector<double> contraction_estimates;
    bool any_noncontractive = false;
};

EquilibriumState solve_equilibrium(const Angular& grid, const SampledModel& model,
                                   const EquilibriumOptions& opts = {});

UniquenessReport uniqueness_probe(const Angular& grid, const SampledModel& model,
                                  int trials, std::uint64_t seed,
                                  const EquilibriumOptions& opts = {});

// <u>_G, the G-weighted average.
inline double weighted_mean(const Angular& grid, const Eigen::VectorXd& G,
                            const Eigen::VectorXd& u) {
    return grid.quadrature(u.cwiseProduct(G));
}

// Vbar = V - <V>_G, columnwise.
inline Eigen::MatrixXd centered_velocity(const Angular& grid,
                                         const SampledModel& model,
                                         const Eigen::VectorXd& G) {
    Eigen::MatrixXd Vb = model.V;
    for (int k = 0; k < model.n; ++k)
        Vb.col(k).array() -= weighted_mean(grid, G, model.V.col(k));
    return Vb;
}

} // namespace slowfast
