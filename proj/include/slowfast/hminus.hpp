#pragma once

#include <limits>
#include <vector>

#include "slowfast/grid.hpp"

namespace slowfast {

constexpr double kInfValue = std::numeric_limits<double>::infinity();

// Squared weighted H^-1 norm of an angular fiber, with both variational
// witnesses. An infeasible fiber (nonzero mass) is a legitimate result, not
// an error: finite = false and value = +infinity.
struct FiberNormResult {
    double value = 0.0;
    bool finite = true;
    Eigen::VectorXd control;    // optimal c with dc/dtheta = g
    Eigen::VectorXd multiplier; // optimal test function of the sup form
};

struct SpatialNormResult {
    double value = 0.0;
    bool finite = true;
    Eigen::VectorXd potential;            // phi with div(chi grad phi) = -g
    std::vector<Eigen::VectorXd> control; // chi grad phi, one entry per axis
};

// Full fiber norm: closed-form minimization over controls plus the dense
// dual solve for the multiplier.
FiberNormResult fiber_norm_sq(const Angular& grid, const Eigen::VectorXd& g,
                              const Eigen::VectorXd& h, double tol_mean = 1e-10);

// Value-only fiber norm (one antiderivative and a scalar projection); the
// form evaluated per node and time slice inside rate functionals.
double fiber_norm_value(const Angular& grid, const Eigen::VectorXd& g,
                        const Eigen::VectorXd& h, double tol_mean = 1e-10);

SpatialNormResult spatial_weighted_norm_sq(const Spatial& sgrid,
                                           const Eigen::VectorXd& g,
                                           const Weight& chi,
                                           double tol_lin = 1e-10,
                                           double tol_mean = 1e-10);

} // namespace slowfast
