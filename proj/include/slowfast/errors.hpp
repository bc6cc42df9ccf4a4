#pragma once

#include <stdexcept>
#include <string>

namespace slowfast {

// Failure taxonomy shared by every module. Each type is a distinct
// caller-visible failure mode; the command line tool maps them onto
// exit codes (config problems -> 2, numerical failures -> 3).

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Iteration budget exhausted before the convergence tolerance was met.
struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A periodic antiderivative (or Poisson solve) was requested for data
// whose mean is not zero; no periodic solution exists.
struct NonZeroMean : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A weight field fails its positivity / SPD requirement.
struct SingularWeight : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A density fiber carries (numerically) no mass, so normalizing by the
// local mass is undefined.
struct VacuousDensity : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A linear operator equation whose right hand side violates the range
// condition of the operator.
struct Unsolvable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The Dirichlet form on the right of the dissipativity inequality is
// singular where it must be definite.
struct DegenerateDirichletForm : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A first order expansion in epsilon produced a negative density; the
// requested epsilon is outside the validity window.
struct EpsilonTooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Time stepping left the stability region (sup norm blow up guard).
struct StepUnstable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Statistical estimate failed to reach the requested error bar.
struct InsufficientSamples : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace slowfast
