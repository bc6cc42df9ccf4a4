#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "slowfast/model.hpp"
#include "slowfast/rng.hpp"

namespace slowfast {

// Truncated Fourier series fitted to uniform angular samples. Modes whose
// coefficients fall below drop_tol times the largest one are discarded, so
// band limited tables (a single cosine, say) evaluate in a couple of flops
// while analytic tables keep spectral accuracy.
class TrigSeries {
public:
    TrigSeries() = default;
    TrigSeries(const Eigen::VectorXd& samples, double drop_tol = 1e-13);

    double operator()(double theta) const;

    // Series of the derivative; the Nyquist cosine is dropped, matching the
    // antisymmetric spectral derivative on the sampling grid.
    TrigSeries derivative() const;

    // sup over a fine probe grid, used for step size bounds.
    double sup_abs() const;

    int mode_count() const { return static_cast<int>(kc_.size()); }

    // Coefficient access for callers that expand sums of pair terms
    // F(a - b) through per-mode angle tables instead of per-pair calls.
    double constant() const { return a0_; }
    double nyquist_coeff() const { return nyquist_; }
    int grid_half() const { return half_; }
    const std::vector<int>& mode_numbers() const { return kc_; }
    const std::vector<double>& cos_coeffs() const { return ac_; }
    const std::vector<double>& sin_coeffs() const { return as_; }

private:
    double a0_ = 0.0;
    std::vector<int> kc_;    // retained mode numbers
    std::vector<double> ac_; // cosine coefficients
    std::vector<double> as_; // sine coefficients
    double nyquist_ = 0.0;   // cos(M/2 theta) coefficient
    int half_ = 0;           // M/2 of the sampling grid
};

// Evaluable form of a ModelSpec for the particle simulator. Angular tables
// that need derivatives (the effective potential U - log Gamma and the pair
// kernel) are stored as trigonometric series; Gamma and V are kept as the
// original callables. The pair potential must be a difference kernel
// W(a, b) = w(a - b); the force table is coupling * w'.
struct ParticleModel {
    int n = 1;
    double epsilon = 0.1;
    bool has_interaction = false;

    std::function<double(double)> Gamma; // empty means 1
    std::vector<std::function<double(double)>> V;

    TrigSeries ueff_prime;  // d/dtheta (U - log Gamma)
    double tilt = 0.0;      // constant part of dU (non-gradient drive)
    TrigSeries force;       // F(delta) = coupling * w'(delta)
    double drift_stiffness = 0.0; // sup |Gamma * (U - log Gamma)''|
    double vmax = 0.0;            // sup over axes and theta of |V_d|

    double gamma(double theta) const { return Gamma ? Gamma(theta) : 1.0; }
};

ParticleModel build_particle_model(const ModelSpec& spec, int table_size = 256);

// Largest admissible Euler-Maruyama step: a tenth of the fastest of the
// angular drift time scale and the time in which a particle can cross an
// interaction radius.
double dt_max(const ParticleModel& model, double R);

// Synchronously updated ensemble. positions live in [0, box)^n, angles in
// (-pi, pi]; unwrapped accumulates the same position increments without
// the box wrap and is what displacement statistics read.
struct ParticleState {
    Eigen::MatrixXd positions; // N x n
    Eigen::MatrixXd unwrapped; // N x n
    Eigen::VectorXd angles;    // N
    double epsilon = 0.1;
    double R = 1.0;
    double box = kTwoPi;
    std::uint64_t rng_seed = 0;
    std::uint64_t step_index = 0;
    double time = 0.0;

    long count() const { return positions.rows(); }
};

// Uniform positions and angles drawn from the counter generator at step 0;
// dynamics steps consume indices 1, 2, ...
ParticleState init_uniform(const ParticleModel& model, long N, double R,
                           double box, std::uint64_t seed);

// One Euler-Maruyama step of
//   dtheta_i = -Gamma (U - log Gamma)'(theta_i) dt
//              - (Gamma(theta_i) / |N_i|) sum_{j in N_i} F(theta_i - theta_j) dt
//              + sqrt(2 Gamma(theta_i) dt) xi_i
//   dq_i     = epsilon V(theta_i) dt
// where N_i is the set of particles within distance R of q_i under the
// minimum image convention, always including i itself. Neighbors come from
// a cell list with cell edge >= R. All increments are evaluated against the
// frozen previous state, so the update is order independent and the loop
// over particles runs in parallel.
void step(ParticleState& state, const ParticleModel& model, double dt);

struct SimConfig {
    long N = 1000;
    double R = 1.0;
    double box = kTwoPi;
    double dt = 0.02;
    double T = 100.0;
    double burn_in = 10.0;
    std::uint64_t seed = 1;
    long sample_stride = 10; // steps between recorded samples
    int blocks = 8;          // time blocks behind every error bar
    double tolerance = std::numeric_limits<double>::infinity();
    int max_mode = 4;        // fluctuation modes per axis
};

// Drift and diffusivity of the slow positions, reported on the diffusive
// time scale tau = epsilon^2 t. drift is the time and ensemble average of
// V(theta_i); diffusivity is half the slope of the drift-compensated
// displacement covariance against tau. Error bars: the run after burn-in
// is cut into cfg.blocks blocks, each block yields its own estimate, and
// the quoted se is the bootstrap spread of the block mean. Throws
// InsufficientSamples when a diagonal error bar exceeds
// cfg.tolerance * (|estimate| + 10 * se).
struct TransportEstimate {
    Eigen::VectorXd drift;
    Eigen::VectorXd drift_se;
    Eigen::MatrixXd diffusivity;
    Eigen::MatrixXd diffusivity_se;
    long samples = 0;
    double slow_window = 0.0; // tau span of the slope fit
};

TransportEstimate estimate_transport(const ParticleModel& model,
                                     const SimConfig& cfg);

// Stationary variance of the empirical density modes
//   rho_hat_k = (1/N) sum_i exp(-i k . q_i),  k = (2 pi / box) * (integer pair)
// for axis-aligned integer modes 1..max_mode. The empirical measure is
// normalized to unit mass, so free independent particles give exactly 1/N
// at every mode. Error bars are block bootstrap over time blocks.
struct ModeVariance {
    std::array<int, 2> k{0, 0};
    double variance = 0.0;
    double se = 0.0;
};

struct FluctuationReport {
    std::vector<ModeVariance> modes;
    long samples = 0;
};

FluctuationReport fluctuation_spectrum(const ParticleModel& model,
                                       const SimConfig& cfg);

} // namespace slowfast
