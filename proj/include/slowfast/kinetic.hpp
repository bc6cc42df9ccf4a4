#pragma once

#include <vector>

#include "slowfast/coeffs.hpp"
#include "slowfast/ratefunc.hpp"

namespace slowfast {

// Reference frame for the deterministic integration. The lab frame runs the
// plain equation d_t f = D_f(f) - eps V . grad f in original time. The
// moving frame runs at diffusive time in the frame translated by
// t <V>_G / eps, which turns the equation into
// d_t f = eps^-2 D_f(f) - eps^-1 Vbar . grad f.
enum class Frame { lab, moving };

struct KineticOptions {
    int scheme_order = 2;          // 1 = implicit-explicit Euler, 2 = SBDF2
    double blow_up_factor = 100.0; // sup-norm growth that aborts the run
    int snapshot_stride = 1;       // store every stride-th step in the path
};

// Result of a run: snapshot path plus the conservation and positivity
// bookkeeping the scheme is expected to maintain. Stored slices are clipped
// at zero; min_value records the worst pre-clip undershoot and
// clipped_mass the total mass removed by clipping, both for inspection.
struct KineticSolution {
    DensityPath path;
    Frame frame = Frame::lab;
    double dt = 0.0; // actual step used (T / steps)
    int scheme_order = 2;

    double mass_drift = 0.0;   // relative drift of total mass over the run
    double min_value = 0.0;    // most negative sample seen before clipping
    double max_value = 0.0;    // largest sample seen
    double clipped_mass = 0.0; // quadrature mass removed when storing slices
};

// Implicit-explicit integration: the linear angular drift-diffusion part is
// implicit per fiber with a prefactored LU, transport and the interaction
// convolution are explicit (the convolution enters through the previous
// iterate). Throws StepUnstable when the sup norm exceeds
// blow_up_factor times its initial value.
KineticSolution integrate_kinetic(const Angular& grid, const Spatial& sgrid,
                                  const SampledModel& model,
                                  const EquilibriumState& eq, const Field& f0,
                                  double T, double dt, Frame frame,
                                  const KineticOptions& opts = {});

// Sample f at a translated spatial point: out(q) = in(q + delta), by
// trigonometric interpolation along each axis, exact for grid content.
Field shift_field(const Spatial& sgrid, const Field& f,
                  const std::array<double, 2>& delta);

// Spatial marginal of a slice, column by column.
Eigen::VectorXd angular_marginal(const Angular& grid, const Field& f);

struct ChapmanEnskogRow {
    double epsilon = 0.0;
    double error = 0.0;      // lowest-mode gap to the diffusion solution
    double decay_rate = 0.0; // measured decay rate of that mode
};

struct ChapmanEnskogReport {
    std::vector<ChapmanEnskogRow> rows;
    double fitted_order = 0.0;   // log-log slope of error against epsilon
    double predicted_rate = 0.0; // k^T D k for the lowest mode
};

// For each epsilon: start from the local equilibrium rho0 G, integrate to
// diffusive time T_diff in the moving frame, and compare the lowest spatial
// Fourier mode of the marginal against the exact diffusion decay
// exp(-k^T D k T). dt <= 0 picks a stable default from the mode count.
ChapmanEnskogReport chapman_enskog_check(
    const Angular& grid, const Spatial& sgrid, const SampledModel& model,
    const EquilibriumState& eq, const CoefficientSet& coeffs,
    const Eigen::VectorXd& rho0, const std::vector<double>& eps_ladder,
    double T_diff = 1.0, double dt = 0.0);

} // namespace slowfast
