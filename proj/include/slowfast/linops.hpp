#pragma once

#include <Eigen/Dense>

#include "slowfast/equilibrium.hpp"

namespace slowfast {

// Space-angle field: rows are angular nodes (M), columns are flattened
// spatial nodes. A single angular fiber is a column-free M vector.
using Field = Eigen::MatrixXd;

// Dense linearization of the kinetic operator about the local equilibrium,
// with its adjoint and projectors, plus the certified dissipativity margin.
struct LinearizedOps {
    Eigen::MatrixXd L;              // action on densities
    Eigen::MatrixXd Ladj;           // adjoint for the flat angular pairing
    Eigen::MatrixXd Pi_G;           // g -> G * quadrature(g)
    Eigen::MatrixXd mean_projector; // g -> g - G * quadrature(g)

    double kappa_margin = 0.0;
    double adjointness_gap = 0.0; // ||L^T - Ladj||_F / max(1, ||L||_F)
    int kernel_dim_L = 0;         // on the resolved subspace
    int kernel_dim_Ladj = 0;
    double tol_op = 0.0;          // absolute operator tolerance in use

    Eigen::VectorXd G;    // equilibrium density the assembly used
    Eigen::MatrixXd Vbar; // M x n centered velocity at that equilibrium

    // Orthonormal basis of the resolved subspace (complement of the
    // unresolvable Nyquist sawtooth); all rank and solve decisions live there.
    Eigen::MatrixXd Qres;
};

// Orthonormal complement of the given columns, via Householder QR.
Eigen::MatrixXd orthonormal_complement(const Eigen::MatrixXd& cols);

// The alternating Nyquist vector s_j = (-1)^j that even-M collocation
// derivatives annihilate.
Eigen::VectorXd sawtooth(int M);

LinearizedOps assemble_linearized(const Angular& grid, const SampledModel& model,
                                  const EquilibriumState& eq,
                                  double tol_op_base = 1e-8);

// Minimum-norm least squares solver for a deflated operator equation:
// solutions are sought inside span(basis), which excludes kernel and
// unresolved directions.
class DeflatedSolver {
public:
    DeflatedSolver(const Eigen::MatrixXd& op, Eigen::MatrixXd basis);

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

private:
    Eigen::MatrixXd basis_;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
};

// Nonlinear kinetic operator on a space-angle field, fiber by fiber:
// d/dtheta ( Gamma [dU + F(f)/mass] f + Gamma df/dtheta ).
Field apply_D_f(const Angular& grid, const SampledModel& model, const Field& f,
                double eps_mass = 1e-12);

// Centered transport Vbar . grad_q, spectral in q.
Field apply_T0(const Angular& grid, const Spatial& sgrid,
               const SampledModel& model, const Eigen::VectorXd& G,
               const Field& g);

// Uncentered transport V . grad_q (the lab frame operator).
Field apply_transport(const Angular& grid, const Spatial& sgrid,
                      const SampledModel& model, const Field& g);

// Linear angular drift-diffusion part D(diag(Gamma dU) + diag(Gamma) D);
// the stiff piece the kinetic integrator treats implicitly.
Eigen::MatrixXd angular_drift_diffusion(const Angular& grid,
                                        const SampledModel& model);

} // namespace slowfast
