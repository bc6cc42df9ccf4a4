#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "slowfast/grid.hpp"

namespace slowfast {

// User-facing description of the microscopic model on the circle: angular
// potential U, symmetric pair potential W, mobility Gamma, slow velocity
// field V into R^n, time scale separation epsilon, interaction radius R.
// Empty std::function members mean "identically zero" (or 1 for Gamma).
struct ModelSpec {
    std::string name = "custom";
    int n = 1;
    double epsilon = 0.1;
    double coupling = 1.0;
    double interaction_radius = 1.0;

    // Constant added to dU: a non-gradient angular drive (the potential
    // stays periodic, the force does not integrate to zero). Stationary
    // states then carry a nonzero flux; solvers report the projected-out
    // mean drift rather than guaranteeing convergence.
    double tilt = 0.0;

    std::function<double(double)> U;
    std::function<double(double)> Gamma;
    std::function<double(double, double)> Wpair;
    std::vector<std::function<double(double)>> V;

    // ---- builtin presets ---------------------------------------------------

    // Free active Brownian particle: no potentials, unit mobility,
    // V = (cos, sin) in 2d or (cos) in 1d.
    static ModelSpec free_abp(int dim = 2, double epsilon = 0.1) {
        ModelSpec m;
        m.name = "free_abp";
        m.n = dim;
        m.epsilon = epsilon;
        m.V.emplace_back([](double th) { return std::cos(th); });
        if (dim == 2) m.V.emplace_back([](double th) { return std::sin(th); });
        return m;
    }

    // Tilted sampler with U = cos(theta), no interaction, V = cos.
    static ModelSpec von_mises(double epsilon = 0.1) {
        ModelSpec m;
        m.name = "von_mises";
        m.n = 1;
        m.epsilon = epsilon;
        m.U = [](double th) { return std::cos(th); };
        m.V.emplace_back([](double th) { return std::cos(th); });
        return m;
    }

    // Planar aligning/anti-aligning swarm: W = cos(theta - theta'),
    // V = (cos, sin). Positive coupling is the anti-aligning side.
    static ModelSpec active_2d(double coupling, double epsilon = 0.1) {
        ModelSpec m;
        m.name = "active_2d";
        m.n = 2;
        m.epsilon = epsilon;
        m.coupling = coupling;
        m.Wpair = [](double a, double b) { return std::cos(a - b); };
        m.V.emplace_back([](double th) { return std::cos(th); });
        m.V.emplace_back([](double th) { return std::sin(th); });
        return m;
    }
};

// Everything sampled on an angular grid; the representation the numerical
// modules actually consume. Produced by sample_model which also validates
// the model invariants.
struct SampledModel {
    std::string name;
    int n = 1;
    double epsilon = 0.1;
    double coupling = 1.0;
    double interaction_radius = 1.0;

    Eigen::VectorXd U, dU;            // potential and spectral derivative
    Eigen::VectorXd Gamma, dlogGamma; // mobility and d/dtheta log Gamma
    Eigen::MatrixXd V, dV;            // M x n slow velocity samples
    Eigen::MatrixXd Fker;             // pair force kernel F(th_j, th_k), coupling included
    bool has_interaction = false;

    // True when the sampled {dV(th_j)} rows span R^n. Reported, not
    // enforced: degenerate fields (constant V) are legitimate inputs for
    // trivial-coefficient cases.
    bool v_nondegenerate = false;
};

// Pair force kernel F(theta, theta') as an M x M matrix: spectral derivative
// of the sampled pair potential in its first argument, scaled by coupling.
inline Eigen::MatrixXd pair_force_kernel(const Angular& grid,
                                         const ModelSpec& spec) {
    const int M = grid.size();
    if (!spec.Wpair) return Eigen::MatrixXd::Zero(M, M);
    Eigen::MatrixXd W(M, M);
    for (int j = 0; j < M; ++j)
        for (int k = 0; k < M; ++k)
            W(j, k) = spec.Wpair(grid.node(j), grid.node(k));
    const double scale = W.cwiseAbs().maxCoeff();
    const double asym = (W - W.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, scale))
        throw ConfigError("pair potential is not symmetric on the grid (gap " +
                          std::to_string(asym) + ")");
    return spec.coupling * (grid.deriv() * W);
}

inline SampledModel sample_model(const Angular& grid, const ModelSpec& spec,
                                 double gamma_min = 1e-12) {
    const int M = grid.size();
    SampledModel s;
    s.name = spec.name;
    s.n = spec.n;
    s.epsilon = spec.epsilon;
    s.coupling = spec.coupling;
    s.interaction_radius = spec.interaction_radius;

    if (spec.n < 1 || spec.n > 2)
        throw ConfigError("model dimension n must be 1 or 2");
    if (!(spec.epsilon >= 0))
        throw ConfigError("model.epsilon must be nonnegative");
    if (static_cast<int>(spec.V.size()) != spec.n)
        throw ConfigError("model supplies " + std::to_string(spec.V.size()) +
                          " velocity components for n = " + std::to_string(spec.n));

    s.U = spec.U ? grid.sample(spec.U) : Eigen::VectorXd::Zero(M);
    s.dU = grid.deriv() * s.U;
    s.dU.array() += spec.tilt;

    s.Gamma = spec.Gamma ? grid.sample(spec.Gamma) : Eigen::VectorXd::Ones(M);
    if (s.Gamma.minCoeff() <= gamma_min)
        throw ConfigError("model.Gamma: mobility must stay above " +
                          std::to_string(gamma_min) + ", min sample is " +
                          std::to_string(s.Gamma.minCoeff()));
    s.dlogGamma = grid.deriv() * s.Gamma.array().log().matrix();

    s.V.resize(M, spec.n);
    for (int k = 0; k < spec.n; ++k) s.V.col(k) = grid.sample(spec.V[static_cast<size_t>(k)]);
    s.dV = grid.deriv() * s.V;
    {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.dV);
        const auto& sv = svd.singularValues();
        s.v_nondegenerate =
            sv.size() >= spec.n && sv[spec.n - 1] > 1e-10 * std::max(1.0, sv[0]);
    }

    s.Fker = pair_force_kernel(grid, spec);
    s.has_interaction = spec.Wpair && spec.coupling != 0.0;
    return s;
}

// F(g)(theta) = integral of F(theta, theta') g(theta') dtheta', by quadrature.
inline Eigen::VectorXd convolve_F(const Angular& grid, const SampledModel& s,
                                  const Eigen::VectorXd& g) {
    if (!s.has_interaction) return Eigen::VectorXd::Zero(grid.size());
    return grid.quad_weight() * (s.Fker * g);
}

} // namespace slowfast
