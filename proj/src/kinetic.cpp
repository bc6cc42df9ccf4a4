#include "slowfast/kinetic.hpp"

#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include "slowfast/errors.hpp"
#include "slowfast/linops.hpp"
#include "slowfast/parallel.hpp"

namespace slowfast {

namespace {

// Trigonometric interpolation matrix for out(x_i) = in(x_i + delta) on one
// periodic axis; reduces to the identity when delta is zero.
Eigen::MatrixXd axis_shift_matrix(int K, double L, double delta) {
    Eigen::MatrixXd S(K, K);
    const double w = kTwoPi / L;
    const double h = L / K;
    for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
            const double d = w * (h * (i - j) + delta);
            double acc = 1.0 + std::cos(0.5 * K * d);
            for (int k = 1; k < K / 2; ++k) acc += 2.0 * std::cos(k * d);
            S(i, j) = acc / K;
        }
    }
    return S;
}

} // namespace

Field shift_field(const Spatial& sgrid, const Field& f,
                  const std::array<double, 2>& delta) {
    if (f.cols() != sgrid.size())
        throw ConfigError("shift_field: field does not match the spatial grid");
    Field out = f;
    for (int d = 0; d < sgrid.dim(); ++d) {
        if (delta[static_cast<size_t>(d)] == 0.0) continue;
        const Eigen::MatrixXd S = axis_shift_matrix(
            sgrid.count(d), sgrid.length(d), delta[static_cast<size_t>(d)]);
        Field next(out.rows(), out.cols());
        if (d == 0) {
            const int K1 = sgrid.count(0);
            const long blocks = sgrid.size() / K1;
            for (long b = 0; b < blocks; ++b)
                next.middleCols(b * K1, K1) =
                    out.middleCols(b * K1, K1) * S.transpose();
        } else {
            const int K1 = sgrid.count(0), K2 = sgrid.count(1);
            Field tmp(out.rows(), K2);
            for (int i1 = 0; i1 < K1; ++i1) {
                for (int i2 = 0; i2 < K2; ++i2)
                    tmp.col(i2) = out.col(i1 + static_cast<long>(K1) * i2);
                tmp = tmp * S.transpose();
                for (int i2 = 0; i2 < K2; ++i2)
                    out.col(i1 + static_cast<long>(K1) * i2) = tmp.col(i2);
            }
            continue;
        }
        out = std::move(next);
    }
    return out;
}

Eigen::VectorXd angular_marginal(const Angular& grid, const Field& f) {
    Eigen::VectorXd rho(f.cols());
    for (long x = 0; x < f.cols(); ++x) rho(x) = grid.quadrature(f.col(x));
    return rho;
}

KineticSolution integrate_kinetic(const Angular& grid, const Spatial& sgrid,
                                  const SampledModel& model,
                                  const EquilibriumState& eq, const Field& f0,
                                  double T, double dt, Frame frame,
                                  const KineticOptions& opts) {
    if (f0.rows() != grid.size() || f0.cols() != sgrid.size())
        throw ConfigError("integrate_kinetic: f0 shape does not match the grids");
    if (!(T > 0.0) || !(dt > 0.0))
        throw ConfigError("integrate_kinetic: T and dt must be positive");
    if (opts.scheme_order != 1 && opts.scheme_order != 2)
        throw ConfigError("integrate_kinetic: scheme_order must be 1 or 2");
    const double eps = model.epsilon;
    if (frame == Frame::moving && !(eps > 0.0))
        throw ConfigError("integrate_kinetic: moving frame needs epsilon > 0");
    if (f0.minCoeff() < 0.0)
        throw ConfigError("integrate_kinetic: f0 must be nonnegative");
    for (long x = 0; x < sgrid.size(); ++x)
        if (!(f0.col(x).sum() > 0.0))
            throw ConfigError(
                "integrate_kinetic: f0 needs positive mass per spatial node");

    const long steps =
        std::max<long>(opts.scheme_order, std::llround(T / dt));
    const double h = T / static_cast<double>(steps);
    const double lam = frame == Frame::moving ? 1.0 / (eps * eps) : 1.0;

    const int M = grid.size();
    const Eigen::MatrixXd Aang = angular_drift_diffusion(grid, model);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(M, M);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_euler(eye - (h * lam) * Aang);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_sbdf2;
    if (opts.scheme_order == 2)
        lu_sbdf2.compute(eye - (2.0 * h / 3.0 * lam) * Aang);

    // Transport and the interaction convolution stay explicit; the linear
    // angular part is subtracted from D_f so nothing is counted twice.
    auto explicit_part = [&](const Field& f) {
        Field e;
        if (frame == Frame::moving)
            e = (-1.0 / eps) * apply_T0(grid, sgrid, model, eq.G, f);
        else if (eps != 0.0)
            e = (-eps) * apply_transport(grid, sgrid, model, f);
        else
            e = Field::Zero(f.rows(), f.cols());
        if (model.has_interaction)
            e += lam * (apply_D_f(grid, model, f) - Aang * f);
        return e;
    };

    auto solve_with = [&](const Eigen::PartialPivLU<Eigen::MatrixXd>& lu,
                          const Field& rhs) {
        Field out(rhs.rows(), rhs.cols());
        parallel_for(rhs.cols(),
                     [&](long x) { out.col(x) = lu.solve(rhs.col(x)); });
        return out;
    };

    const double wq = grid.quad_weight() * sgrid.quad_weight();
    const double mass0 = wq * f0.sum();
    const double sup0 = f0.cwiseAbs().maxCoeff();

    KineticSolution sol;
    sol.frame = frame;
    sol.dt = h;
    sol.scheme_order = opts.scheme_order;
    sol.min_value = f0.minCoeff();
    sol.max_value = f0.maxCoeff();

    const int stride = std::max(1, opts.snapshot_stride);
    std::vector<double> times;
    std::vector<Field> values;
    auto store = [&](double t, const Field& f) {
        Field clipped = f.cwiseMax(0.0);
        sol.clipped_mass += wq * (clipped - f).sum();
        times.push_back(t);
        values.push_back(std::move(clipped));
    };
    store(0.0, f0);

    Field f = f0;
    Field fprev;
    Field eprev;
    for (long sidx = 1; sidx <= steps; ++sidx) {
        Field ecur = explicit_part(f);
        Field fnext;
        if (opts.scheme_order == 1 || sidx == 1) {
            fnext = solve_with(lu_euler, f + h * ecur);
        } else {
            fnext = solve_with(
                lu_sbdf2,
                (1.0 / 3.0) * ((4.0 * f - fprev) + (2.0 * h) * (2.0 * ecur - eprev)));
        }
        fprev = std::move(f);
        eprev = std::move(ecur);
        f = std::move(fnext);

        const double sup = f.cwiseAbs().maxCoeff();
        if (!std::isfinite(sup) ||
            sup > opts.blow_up_factor * std::max(sup0, 1e-300))
            throw StepUnstable("kinetic step " + std::to_string(sidx) +
                               ": sup norm " + std::to_string(sup) +
                               " exceeds " + std::to_string(opts.blow_up_factor) +
                               " times the initial " + std::to_string(sup0));
        sol.min_value = std::min(sol.min_value, f.minCoeff());
        sol.max_value = std::max(sol.max_value, f.maxCoeff());
        const double mass = wq * f.sum();
        sol.mass_drift =
            std::max(sol.mass_drift,
                     std::abs(mass - mass0) / std::max(std::abs(mass0), 1e-300));
        if (sidx % stride == 0 || sidx == steps)
            store(h * static_cast<double>(sidx), f);
    }

    sol.path = make_general_path(std::move(times), std::move(values));
    return sol;
}

ChapmanEnskogReport chapman_enskog_check(
    const Angular& grid, const Spatial& sgrid, const SampledModel& model,
    const EquilibriumState& eq, const CoefficientSet& coeffs,
    const Eigen::VectorXd& rho0, const std::vector<double>& eps_ladder,
    double T_diff, double dt) {
    if (rho0.size() != sgrid.size())
        throw ConfigError("chapman_enskog_check: rho0 does not match the grid");
    if (eps_ladder.empty())
        throw ConfigError("chapman_enskog_check: empty epsilon ladder");
    if (!(T_diff > 0.0))
        throw ConfigError("chapman_enskog_check: T_diff must be positive");

    const double k1 = kTwoPi / sgrid.length(0);
    ChapmanEnskogReport rep;
    rep.predicted_rate = k1 * k1 * coeffs.Dmat(0, 0);

    // Lowest spatial mode along the first axis; the diffusion equation acts
    // on it as a pure exponential decay, so no second discretization enters
    // the comparison.
    auto lowest_mode = [&](const Eigen::VectorXd& r) {
        std::complex<double> c(0.0, 0.0);
        for (long x = 0; x < sgrid.size(); ++x) {
            const double q = sgrid.coords(x)[0];
            c += r(x) * std::exp(std::complex<double>(0.0, -k1 * q));
        }
        return c * (2.0 / static_cast<double>(sgrid.size()));
    };
    const std::complex<double> c0 = lowest_mode(rho0);
    const double ref = std::abs(c0);

    Field f0(grid.size(), sgrid.size());
    for (long x = 0; x < sgrid.size(); ++x) f0.col(x) = rho0(x) * eq.G;

    const double kmax = k1 * (sgrid.count(0) / 2);
    const double dscale =
        std::max(coeffs.Dmat.diagonal().maxCoeff(), 1e-3);

    for (double eps : eps_ladder) {
        if (!(eps > 0.0))
            throw ConfigError("chapman_enskog_check: ladder entries must be > 0");
        SampledModel m = model;
        m.epsilon = eps;
        double step = dt;
        if (step <= 0.0)
            step = std::min({0.15 / (kmax * kmax * dscale), 0.5 * eps * eps,
                             T_diff / 64.0});

        KineticOptions opts;
        opts.snapshot_stride = 1 << 30; // only endpoints are needed
        KineticSolution sol = integrate_kinetic(grid, sgrid, m, eq, f0, T_diff,
                                                step, Frame::moving, opts);
        const Eigen::VectorXd rhoT =
            angular_marginal(grid, sol.path.values.back());
        const std::complex<double> cT = lowest_mode(rhoT);
        const std::complex<double> pred =
            c0 * std::exp(-rep.predicted_rate * T_diff);

        ChapmanEnskogRow row;
        row.epsilon = eps;
        if (ref > 1e-14) {
            row.error = std::abs(cT - pred) / ref;
            row.decay_rate = -std::log(std::abs(cT) / ref) / T_diff;
        } else {
            row.error = std::abs(cT);
            row.decay_rate = 0.0;
        }
        rep.rows.push_back(row);
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (const auto& row : rep.rows) {
        if (!(row.error > 0.0)) continue;
        const double x = std::log(row.epsilon), y = std::log(row.error);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++cnt;
    }
    if (cnt >= 2) {
        const double den = cnt * sxx - sx * sx;
        if (den > 0.0) rep.fitted_order = (cnt * sxy - sx * sy) / den;
    }
    return rep;
}

} // namespace slowfast
