#include "slowfast/ratefunc.hpp"

#include <cmath>
#include <utility>

#include "slowfast/errors.hpp"
#include "slowfast/parallel.hpp"

namespace slowfast {

namespace {

void require_slices(const DensityPath& path, const char* who) {
    if (path.slices() < 3)
        throw ConfigError(std::string(who) +
                          ": a path needs at least three time slices");
    for (int s = 1; s < path.slices(); ++s)
        if (!(path.times[static_cast<size_t>(s)] >
              path.times[static_cast<size_t>(s - 1)]))
            throw ConfigError(std::string(who) + ": times must increase");
}

// chi(x) = rho(x) * Sigma for the n x n coefficient matrix Sigma.
Weight rho_sigma_weight(int dim, const Eigen::VectorXd& rho,
                        const Eigen::MatrixXd& Sigma) {
    Eigen::Matrix2d A = Eigen::Matrix2d::Identity();
    A(0, 0) = Sigma(0, 0);
    if (dim == 2) {
        A(0, 1) = A(1, 0) = Sigma(0, 1);
        A(1, 1) = Sigma(1, 1);
    }
    return Weight::scaled_constant(dim, A, rho);
}

// Trapezoid accumulation over the path's (possibly nonuniform) times.
double trapezoid(const std::vector<double>& times,
                 const std::vector<double>& vals) {
    double acc = 0.0;
    for (size_t s = 0; s + 1 < times.size(); ++s)
        acc += 0.5 * (vals[s] + vals[s + 1]) * (times[s + 1] - times[s]);
    return acc;
}

std::array<int, 3> stencil_anchor(int s, int S) {
    if (s == 0) return {0, 1, 2};
    if (s == S) return {S - 2, S - 1, S};
    return {s - 1, s, s + 1};
}

} // namespace

Eigen::Vector3d fd3_coeffs(double ta, double tb, double tc, double at) {
    Eigen::Vector3d w;
    w(0) = (2 * at - tb - tc) / ((ta - tb) * (ta - tc));
    w(1) = (2 * at - ta - tc) / ((tb - ta) * (tb - tc));
    w(2) = (2 * at - ta - tb) / ((tc - ta) * (tc - tb));
    return w;
}

DensityPath make_local_equilibrium_path(const Angular& grid, const Spatial& sgrid,
                                        const EquilibriumState& eq,
                                        std::vector<double> times,
                                        std::vector<Eigen::VectorXd> rho) {
    if (times.size() != rho.size())
        throw ConfigError("local equilibrium path: times and slices mismatch");
    DensityPath path;
    path.kind = PathKind::local_equilibrium;
    path.times = std::move(times);
    path.rho = std::move(rho);
    path.values.reserve(path.rho.size());
    for (const auto& r : path.rho) {
        if (r.size() != sgrid.size())
            throw ConfigError("local equilibrium path: profile size mismatch");
        Field f(grid.size(), sgrid.size());
        for (long x = 0; x < sgrid.size(); ++x) f.col(x) = r(x) * eq.G;
        path.values.push_back(std::move(f));
    }
    return path;
}

DensityPath make_general_path(std::vector<double> times,
                              std::vector<Field> values) {
    if (times.size() != values.size())
        throw ConfigError("general path: times and slices mismatch");
    DensityPath path;
    path.kind = PathKind::general;
    path.times = std::move(times);
    path.values = std::move(values);
    return path;
}

PathCheck check_path(const Angular& grid, const Spatial& sgrid,
                     const DensityPath& path) {
    PathCheck chk;
    if (path.values.empty()) return chk;
    chk.min_value = kInfValue;
    double mass_min = kInfValue, mass_max = -kInfValue;
    for (const Field& f : path.values) {
        chk.min_value = std::min(chk.min_value, f.minCoeff());
        const double mass = grid.quad_weight() * sgrid.quad_weight() * f.sum();
        mass_min = std::min(mass_min, mass);
        mass_max = std::max(mass_max, mass);
    }
    chk.mass_drift = (mass_max - mass_min) / std::max(std::abs(mass_max), 1e-300);
    return chk;
}

Field path_time_derivative(const DensityPath& path, int s) {
    require_slices(path, "path_time_derivative");
    const auto idx = stencil_anchor(s, path.slices() - 1);
    const Eigen::Vector3d w =
        fd3_coeffs(path.times[static_cast<size_t>(idx[0])],
                   path.times[static_cast<size_t>(idx[1])],
                   path.times[static_cast<size_t>(idx[2])],
                   path.times[static_cast<size_t>(s)]);
    return w(0) * path.values[static_cast<size_t>(idx[0])] +
           w(1) * path.values[static_cast<size_t>(idx[1])] +
           w(2) * path.values[static_cast<size_t>(idx[2])];
}

Eigen::VectorXd rho_time_derivative(const DensityPath& path, int s) {
    require_slices(path, "rho_time_derivative");
    if (path.kind != PathKind::local_equilibrium)
        throw ConfigError("rho_time_derivative: path carries no profile");
    const auto idx = stencil_anchor(s, path.slices() - 1);
    const Eigen::Vector3d w =
        fd3_coeffs(path.times[static_cast<size_t>(idx[0])],
                   path.times[static_cast<size_t>(idx[1])],
                   path.times[static_cast<size_t>(idx[2])],
                   path.times[static_cast<size_t>(s)]);
    return w(0) * path.rho[static_cast<size_t>(idx[0])] +
           w(1) * path.rho[static_cast<size_t>(idx[1])] +
           w(2) * path.rho[static_cast<size_t>(idx[2])];
}

Field A_eps(const Angular& grid, const Spatial& sgrid, const SampledModel& model,
            const EquilibriumState& eq, const DensityPath& path, int s,
            double epsilon) {
    if (!(epsilon > 0.0)) throw ConfigError("A_eps: epsilon must be positive");
    const Field& f = path.values[static_cast<size_t>(s)];
    Field out = epsilon * path_time_derivative(path, s);
    out += apply_T0(grid, sgrid, model, eq.G, f);
    out -= apply_D_f(grid, model, f) / epsilon;
    return out;
}

double rate_eps(const Angular& grid, const Spatial& sgrid,
                const SampledModel& model, const EquilibriumState& eq,
                const DensityPath& path, double epsilon, double tol_mean) {
    require_slices(path, "rate_eps");
    const int S = path.slices();
    const double wq = sgrid.quad_weight();
    std::vector<double> slice(static_cast<size_t>(S), 0.0);
    std::vector<char> infeasible(static_cast<size_t>(S), 0);

    parallel_for(S, [&](long s) {
        const Field A = A_eps(grid, sgrid, model, eq, path, static_cast<int>(s),
                              epsilon);
        const Field& f = path.values[static_cast<size_t>(s)];
        double acc = 0.0;
        for (long x = 0; x < sgrid.size(); ++x) {
            const Eigen::VectorXd h = model.Gamma.cwiseProduct(f.col(x));
            if (h.minCoeff() <= 0.0) {
                infeasible[static_cast<size_t>(s)] = 1;
                return;
            }
            // Fiber-level mass budget. The reference scale mixes the fiber
            // magnitude of A with the fast-operator scale eps^-1 |f|, so a
            // fiber whose integrand is pure roundoff stays feasible while a
            // genuine mass imbalance is flagged.
            const double mass = grid.quadrature(A.col(x));
            const double scale =
                grid.quad_weight() * A.col(x).cwiseAbs().sum() +
                grid.quadrature(f.col(x)) / epsilon;
            if (std::abs(mass) > tol_mean * scale + 1e-300) {
                infeasible[static_cast<size_t>(s)] = 1;
                return;
            }
            Eigen::VectorXd g = A.col(x);
            g.array() -= mass / kTwoPi;
            acc += fiber_norm_value(grid, g, h, tol_mean);
        }
        slice[static_cast<size_t>(s)] = wq * acc;
    });

    for (char c : infeasible)
        if (c) return kInfValue;
    return 0.25 * trapezoid(path.times, slice);
}

double rate_limit(const Angular& grid, const Spatial& sgrid,
                  const EquilibriumState& eq, const CoefficientSet& coeffs,
                  const DensityPath& path, double tol_mean) {
    require_slices(path, "rate_limit");
    if (path.kind != PathKind::local_equilibrium) return kInfValue;
    (void)grid;
    (void)eq;

    const int S = path.slices();
    const int n = static_cast<int>(coeffs.Dmat.rows());
    std::vector<double> slice(static_cast<size_t>(S), 0.0);
    std::vector<char> infeasible(static_cast<size_t>(S), 0);

    parallel_for(S, [&](long s) {
        const Eigen::VectorXd& r = path.rho[static_cast<size_t>(s)];
        Eigen::VectorXd g = rho_time_derivative(path, static_cast<int>(s));
        // subtract div(D grad rho)
        std::vector<Eigen::VectorXd> flux(static_cast<size_t>(n));
        for (int d = 0; d < n; ++d) {
            flux[static_cast<size_t>(d)] =
                Eigen::VectorXd::Zero(sgrid.size());
            for (int k = 0; k < n; ++k)
                flux[static_cast<size_t>(d)] +=
                    coeffs.Dmat(d, k) * sgrid.partial(r, k);
        }
        g -= sgrid.div(flux);
        // Mass production is judged against the profile scale, so a forcing
        // that is pure time-stencil roundoff stays feasible.
        const double mass_rate = sgrid.quadrature(g);
        const double scale = sgrid.quadrature(g.cwiseAbs()) +
                             sgrid.quadrature(r.cwiseAbs());
        if (std::abs(mass_rate) > tol_mean * scale + 1e-300) {
            infeasible[static_cast<size_t>(s)] = 1;
            return;
        }
        g.array() -= mass_rate / (sgrid.quad_weight() * sgrid.size());
        SpatialNormResult nr = spatial_weighted_norm_sq(
            sgrid, g, rho_sigma_weight(sgrid.dim(), r, coeffs.Sigma), 1e-10,
            tol_mean);
        if (!nr.finite) {
            infeasible[static_cast<size_t>(s)] = 1;
            return;
        }
        slice[static_cast<size_t>(s)] = nr.value;
    });

    for (char c : infeasible)
        if (c) return kInfValue;
    return 0.25 * trapezoid(path.times, slice);
}

double liminf_bound(const Angular& grid, const Spatial& sgrid,
                    const SampledModel& model, const EquilibriumState& eq,
                    const CoefficientSet& coeffs, const DensityPath& path,
                    double epsilon) {
    require_slices(path, "liminf_bound");
    const int S = path.slices();
    const int n = model.n;
    const long K = sgrid.size();
    const Eigen::MatrixXd& D = grid.deriv();

    Eigen::MatrixXd dpsi(grid.size(), n);
    for (int k = 0; k < n; ++k) dpsi.col(k) = D * coeffs.psi.col(k);

    std::vector<double> slice(static_cast<size_t>(S), 0.0);
    std::vector<char> unbounded(static_cast<size_t>(S), 0);
    parallel_for(S, [&](long s) {
        const Field A = A_eps(grid, sgrid, model, eq, path, static_cast<int>(s),
                              epsilon);
        const Field& f = path.values[static_cast<size_t>(s)];

        // Linear data of the dual pairing: the angular mass of A against the
        // fast part of the ansatz, and the psi projections against the slow
        // gradient part.
        Eigen::VectorXd ell(K);
        Eigen::MatrixXd b(K, n);
        Weight chi = rho_sigma_weight(sgrid.dim(), Eigen::VectorXd::Ones(K),
                                      Eigen::MatrixXd::Identity(n, n));
        for (long x = 0; x < K; ++x) {
            ell(x) = grid.quadrature(A.col(x)) / epsilon;
            const Eigen::VectorXd hf = model.Gamma.cwiseProduct(f.col(x));
            for (int k = 0; k < n; ++k)
                b(x, k) = grid.quadrature(A.col(x).cwiseProduct(coeffs.psi.col(k)));
            chi.a11(x) =
                grid.quadrature(hf.cwiseProduct(dpsi.col(0)).cwiseProduct(dpsi.col(0)));
            if (n == 2) {
                chi.a12(x) = grid.quadrature(
                    hf.cwiseProduct(dpsi.col(0)).cwiseProduct(dpsi.col(1)));
                chi.a22(x) = grid.quadrature(
                    hf.cwiseProduct(dpsi.col(1)).cwiseProduct(dpsi.col(1)));
            }
        }

        // A constant test function costs nothing and pairs with the total
        // mass of ell, so any genuine mass imbalance makes the supremum
        // infinite. Judged against the path scale as in rate_eps.
        const double mass_tot = sgrid.quadrature(ell);
        const double mass_scale =
            sgrid.quadrature(ell.cwiseAbs()) +
            sgrid.quad_weight() * f.sum() * grid.quad_weight() / epsilon;
        if (std::abs(mass_tot) > 1e-8 * mass_scale + 1e-300) {
            unbounded[static_cast<size_t>(s)] = 1;
            return;
        }

        // Stationarity of the concave dual objective gives
        // div(chi grad phi) = div(b) - ell; the mean of the data vanishes
        // up to quadrature noise, projected out so the solve is well posed.
        std::vector<Eigen::VectorXd> bcols(static_cast<size_t>(n));
        for (int d = 0; d < n; ++d) bcols[static_cast<size_t>(d)] = b.col(d);
        const Eigen::VectorXd divb = sgrid.div(bcols);
        Eigen::VectorXd rhs = ell - divb;
        rhs.array() -= rhs.mean();

        // If ell and div(b) cancel to rounding, the optimum is phi = 0 and
        // the slice contributes nothing. Solving with a pure noise source
        // would only excite modes outside the range of the operator.
        const double src_scale = sgrid.quadrature(ell.cwiseAbs()) +
                                 sgrid.quadrature(divb.cwiseAbs());
        if (sgrid.quadrature(rhs.cwiseAbs()) <= 1e-11 * src_scale) return;

        Eigen::VectorXd phi = sgrid.solve_weighted_poisson(chi, rhs);
        std::vector<Eigen::VectorXd> gphi = sgrid.grad(phi);

        double acc = 0.0;
        for (long x = 0; x < K; ++x) {
            double v = ell(x) * phi(x);
            for (int d = 0; d < n; ++d)
                v += b(x, d) * gphi[static_cast<size_t>(d)](x);
            acc += v;
        }
        slice[static_cast<size_t>(s)] = sgrid.quad_weight() * acc;
    });

    for (char c : unbounded)
        if (c) return kInfValue;
    return 0.25 * trapezoid(path.times, slice);
}

RecoverySequence build_recovery(const Angular& grid, const Spatial& sgrid,
                                const SampledModel& model,
                                const EquilibriumState& eq,
                                const CoefficientSet& coeffs,
                                const std::vector<double>& times,
                                const std::vector<Eigen::VectorXd>& rho,
                                double epsilon) {
    if (!(epsilon > 0.0))
        throw ConfigError("build_recovery: epsilon must be positive");
    RecoverySequence rec;
    rec.epsilon = epsilon;
    rec.base = make_local_equilibrium_path(grid, sgrid, eq, times, rho);
    const int S = rec.base.slices();
    const int n = model.n;
    const long K = sgrid.size();

    // Velocity-omega couplings that close the angular mass of A at order eps.
    const Eigen::MatrixXd Vbar = centered_velocity(grid, model, eq.G);
    Eigen::MatrixXd Momega(n, n);
    for (int d = 0; d < n; ++d)
        for (int k = 0; k < n; ++k)
            Momega(d, k) = grid.quadrature(
                eq.G.cwiseProduct(Vbar.col(d)).cwiseProduct(coeffs.omega.col(k)));

    rec.f1.resize(static_cast<size_t>(S));
    rec.a.resize(static_cast<size_t>(S));
    double min_density = kInfValue;

    for (int s = 0; s < S; ++s) {
        const Eigen::VectorXd& r = rec.base.rho[static_cast<size_t>(s)];
        if (r.minCoeff() <= 0.0)
            throw ConfigError("build_recovery: profile must stay positive");
        std::vector<Eigen::VectorXd> grad_rho(static_cast<size_t>(n));
        for (int d = 0; d < n; ++d)
            grad_rho[static_cast<size_t>(d)] = sgrid.partial(r, d);

        // g = d_t rho - div(Momega grad rho); the control must carry it.
        Eigen::VectorXd g = rho_time_derivative(rec.base, s);
        std::vector<Eigen::VectorXd> mflux(static_cast<size_t>(n));
        for (int d = 0; d < n; ++d) {
            mflux[static_cast<size_t>(d)] = Eigen::VectorXd::Zero(K);
            for (int k = 0; k < n; ++k)
                mflux[static_cast<size_t>(d)] +=
                    Momega(d, k) * grad_rho[static_cast<size_t>(k)];
        }
        g -= sgrid.div(mflux);
        const double mass_rate = sgrid.quadrature(g);
        if (std::abs(mass_rate) >
            1e-8 * (sgrid.quadrature(g.cwiseAbs()) + sgrid.quadrature(r)))
            throw ConfigError(
                "build_recovery: profile does not conserve mass");
        g.array() -= mass_rate / (sgrid.quad_weight() * sgrid.size());

        // Optimal control of the inf form: a = -rho grad phi with
        // div(rho Sigma grad phi) = -g, so that div(Sigma a) = g exactly.
        Eigen::VectorXd phi = sgrid.solve_weighted_poisson(
            rho_sigma_weight(sgrid.dim(), r, coeffs.Sigma), g);
        std::vector<Eigen::VectorXd> gphi = sgrid.grad(phi);
        Eigen::MatrixXd a(K, n);
        for (int d = 0; d < n; ++d)
            a.col(d) = -r.cwiseProduct(gphi[static_cast<size_t>(d)]);
        rec.a[static_cast<size_t>(s)] = a;

        Field f1(grid.size(), K);
        for (long x = 0; x < K; ++x) {
            Eigen::VectorXd slow = Eigen::VectorXd::Zero(grid.size());
            for (int k = 0; k < n; ++k)
                slow += grad_rho[static_cast<size_t>(k)](x) * coeffs.omega.col(k) +
                        a(x, k) * coeffs.xi.col(k);
            f1.col(x) = -eq.G.cwiseProduct(slow);
        }
        rec.f1[static_cast<size_t>(s)] = f1;
        min_density = std::min(min_density,
                               (rec.base.values[static_cast<size_t>(s)] +
                                epsilon * f1)
                                   .minCoeff());
    }

    if (min_density < 0.0)
        throw EpsilonTooLarge("recovery density dips to " +
                              std::to_string(min_density) + " at epsilon " +
                              std::to_string(epsilon));
    return rec;
}

DensityPath combined_path(const RecoverySequence& rec) {
    DensityPath path;
    path.kind = PathKind::general;
    path.times = rec.base.times;
    path.values.reserve(rec.f1.size());
    for (size_t s = 0; s < rec.f1.size(); ++s)
        path.values.push_back(rec.base.values[s] + rec.epsilon * rec.f1[s]);
    return path;
}

GammaSweepReport gamma_sweep(const Angular& grid, const Spatial& sgrid,
                             const SampledModel& model,
                             const EquilibriumState& eq,
                             const CoefficientSet& coeffs,
                             const std::vector<double>& times,
                             const std::vector<Eigen::VectorXd>& rho,
                             const std::vector<double>& eps_ladder) {
    GammaSweepReport rep;
    DensityPath base = make_local_equilibrium_path(grid, sgrid, eq, times, rho);
    rep.limit = rate_limit(grid, sgrid, eq, coeffs, base);

    for (double eps : eps_ladder) {
        RecoverySequence rec =
            build_recovery(grid, sgrid, model, eq, coeffs, times, rho, eps);
        DensityPath fe = combined_path(rec);
        GammaSweepRow row;
        row.epsilon = eps;
        row.rate = rate_eps(grid, sgrid, model, eq, fe, eps);
        row.lower_bound = liminf_bound(grid, sgrid, model, eq, coeffs, fe, eps);
        rep.rows.push_back(row);
    }

    // Least-squares slope of log|rate - limit| against log eps.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (const auto& row : rep.rows) {
        const double diff = std::abs(row.rate - rep.limit);
        if (!(diff > 0.0) || std::isinf(row.rate)) continue;
        const double x = std::log(row.epsilon), y = std::log(diff);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    rep.fitted_order =
        m >= 2 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : 0.0;
    return rep;
}

} // namespace slowfast
