#pragma once

#include <cstdint>

#include "slowfast/linops.hpp"

namespace slowfast {

// Cell-problem solutions and the transport matrices built from them.
// Column k of each angular block corresponds to slow direction k.
struct CoefficientSet {
    Eigen::MatrixXd psi;            // adjoint cell problem, <psi>_G = 0
    Eigen::MatrixXd omega;          // forward cell problem, <omega>_G = 0
    Eigen::MatrixXd xi;             // flux cell problem, <xi>_G = 0
    Eigen::MatrixXd flux_potential; // antiderivative of L(G xi), weighted mean 0

    Eigen::MatrixXd Dmat;  // diffusivity
    Eigen::MatrixXd Sigma; // mobility
    Eigen::MatrixXd Emat;  // velocity-xi couplings
    Eigen::MatrixXd Rmat;  // flux Gram matrix

    double max_cell_residual = 0.0;
};

struct XiPair {
    Eigen::MatrixXd xi;
    Eigen::MatrixXd flux_potential;
};

struct SchurReport {
    double min_eig_gap = 0.0;       // smallest eigenvalue of Sigma - E R+ E^T
    double equality_residual = 0.0; // Frobenius gap at the canonical xi
    int trials = 0;
};

Eigen::MatrixXd solve_psi(const Angular& grid, const SampledModel& model,
                          const EquilibriumState& eq, const LinearizedOps& ops,
                          double tol_cell = 1e-9);

Eigen::MatrixXd solve_omega(const Angular& grid, const SampledModel& model,
                            const EquilibriumState& eq, const LinearizedOps& ops,
                            double tol_cell = 1e-9);

// Canonical flux choice: flux_potential_k = Gamma G psi_k', which satisfies
// d/dtheta flux = L(G xi) by construction of xi.
XiPair solve_xi_canonical(const Angular& grid, const SampledModel& model,
                          const EquilibriumState& eq, const LinearizedOps& ops,
                          const Eigen::MatrixXd& psi, double tol_cell = 1e-9);

// Flux potential for an arbitrary admissible xi (<xi>_G = 0): antiderivative
// of L(G xi), with the weighted zero-mean normalization that pins the free
// constant.
Eigen::MatrixXd flux_for_xi(const Angular& grid, const SampledModel& model,
                            const EquilibriumState& eq, const LinearizedOps& ops,
                            const Eigen::MatrixXd& xi);

CoefficientSet assemble_matrices(const Angular& grid, const SampledModel& model,
                                 const EquilibriumState& eq,
                                 const LinearizedOps& ops,
                                 const Eigen::MatrixXd& psi,
                                 const Eigen::MatrixXd& omega,
                                 const XiPair& xi_pair);

// Convenience: all cell problems with the canonical xi.
CoefficientSet solve_coefficients(const Angular& grid, const SampledModel& model,
                                  const EquilibriumState& eq,
                                  const LinearizedOps& ops,
                                  double tol_cell = 1e-9);

// Spectral pseudo-inverse with relative cutoff, for possibly singular
// symmetric matrices.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& A, double rel_cut = 1e-12);

// Random admissible xi sweep certifying the Schur block inequality
// Sigma - E R+ E^T >= 0, with the canonical choice attaining equality.
SchurReport schur_sweep(const Angular& grid, const SampledModel& model,
                        const EquilibriumState& eq, const LinearizedOps& ops,
                        int trials, std::uint64_t seed);

} // namespace slowfast
