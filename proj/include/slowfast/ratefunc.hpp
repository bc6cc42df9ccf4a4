#pragma once

#include <vector>

#include "slowfast/coeffs.hpp"
#include "slowfast/hminus.hpp"

namespace slowfast {

enum class PathKind { general, local_equilibrium };

// Time-sliced space-angle density path. Local-equilibrium paths additionally
// carry the spatial profile rho with values built as rho (x) G.
struct DensityPath {
    PathKind kind = PathKind::general;
    std::vector<double> times;
    std::vector<Field> values;
    std::vector<Eigen::VectorXd> rho; // per slice, local_equilibrium only

    int slices() const { return static_cast<int>(times.size()); }
};

struct PathCheck {
    double min_value = 0.0;  // most negative density sample
    double mass_drift = 0.0; // relative spread of the total mass over slices
};

DensityPath make_local_equilibrium_path(const Angular& grid, const Spatial& sgrid,
                                        const EquilibriumState& eq,
                                        std::vector<double> times,
                                        std::vector<Eigen::VectorXd> rho);

DensityPath make_general_path(std::vector<double> times,
                              std::vector<Field> values);

PathCheck check_path(const Angular& grid, const Spatial& sgrid,
                     const DensityPath& path);

// Derivative weights of the quadratic through (ta, tb, tc), evaluated at
// `at`; the one shared stencil for every time derivative in this module.
Eigen::Vector3d fd3_coeffs(double ta, double tb, double tc, double at);

Field path_time_derivative(const DensityPath& path, int s);
Eigen::VectorXd rho_time_derivative(const DensityPath& path, int s);

// Slice-s integrand of the finite-epsilon rate functional:
// eps d_t f + T_0(f) - eps^-1 D_f(f).
Field A_eps(const Angular& grid, const Spatial& sgrid, const SampledModel& model,
            const EquilibriumState& eq, const DensityPath& path, int s,
            double epsilon);

// Quarter of the time-trapezoid of the spatially summed weighted fiber
// norms of A_eps. Infeasible fibers push the value to +infinity.
double rate_eps(const Angular& grid, const Spatial& sgrid,
                const SampledModel& model, const EquilibriumState& eq,
                const DensityPath& path, double epsilon,
                double tol_mean = 1e-8);

// Quarter trapezoid of the rho-sigma weighted spatial norm of
// d_t rho - div(D grad rho); +infinity off local equilibria.
double rate_limit(const Angular& grid, const Spatial& sgrid,
                  const EquilibriumState& eq, const CoefficientSet& coeffs,
                  const DensityPath& path, double tol_mean = 1e-8);

// Certified lower bound for the rate of the given finite-epsilon path,
// maximizing the dual pairing over the slow test-function ansatz
// eps^-1 phi + psi . grad phi per slice.
double liminf_bound(const Angular& grid, const Spatial& sgrid,
                    const SampledModel& model, const EquilibriumState& eq,
                    const CoefficientSet& coeffs, const DensityPath& path,
                    double epsilon);

struct RecoverySequence {
    double epsilon = 0.0;
    DensityPath base;                   // the local-equilibrium skeleton
    std::vector<Field> f1;              // first-order corrector per slice
    std::vector<Eigen::MatrixXd> a;     // control per slice, nodes x n
};

RecoverySequence build_recovery(const Angular& grid, const Spatial& sgrid,
                                const SampledModel& model,
                                const EquilibriumState& eq,
                                const CoefficientSet& coeffs,
                                const std::vector<double>& times,
                                const std::vector<Eigen::VectorXd>& rho,
                                double epsilon);

// f^eps = rho G + eps f1 as a general path.
DensityPath combined_path(const RecoverySequence& rec);

struct GammaSweepRow {
    double epsilon = 0.0;
    double rate = 0.0;
    double lower_bound = 0.0;
};

struct GammaSweepReport {
    std::vector<GammaSweepRow> rows; // ordered as the supplied ladder
    double limit = 0.0;              // rate_limit of the skeleton
    double fitted_order = 0.0;       // least-squares slope of log|rate - limit|
};

GammaSweepReport gamma_sweep(const Angular& grid, const Spatial& sgrid,
                             const SampledModel& model,
                             const EquilibriumState& eq,
                             const CoefficientSet& coeffs,
                             const std::vector<double>& times,
                             const std::vector<Eigen::VectorXd>& rho,
                             const std::vector<double>& eps_ladder);

} // namespace slowfast
