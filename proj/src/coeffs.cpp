#include "slowfast/coeffs.hpp"

#include <cmath>
#include <random>
#include <string>

#include "slowfast/errors.hpp"

namespace slowfast {

namespace {

// <u v>_G, the equilibrium-weighted pairing all matrix entries use.
double pair_G(const Angular& grid, const Eigen::VectorXd& G,
              const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    return grid.quadrature(G.cwiseProduct(u).cwiseProduct(v));
}

void require_solvable(const Angular& grid, const Eigen::VectorXd& G,
                      const Eigen::VectorXd& rhs_mass_witness,
                      const char* who) {
    const double mass = grid.quadrature(rhs_mass_witness);
    const double scale = 1.0 + rhs_mass_witness.cwiseAbs().maxCoeff();
    if (std::abs(mass) > 1e-8 * scale)
        throw Unsolvable(std::string(who) +
                         ": right-hand side carries quadrature mass " +
                         std::to_string(mass));
    (void)G;
}

void check_residual(double res, double tol_cell, const char* who) {
    if (!(res <= tol_cell))
        throw NoConvergence(std::string(who) + ": cell residual " +
                            std::to_string(res) + " above tolerance");
}

} // namespace

Eigen::MatrixXd solve_psi(const Angular& grid, const SampledModel& model,
                          const EquilibriumState& eq, const LinearizedOps& ops,
                          double tol_cell) {
    const int M = static_cast<int>(grid.size());
    Eigen::MatrixXd psi(M, model.n);
    DeflatedSolver solver(ops.Ladj, ops.Qres);
    for (int k = 0; k < model.n; ++k) {
        const Eigen::VectorXd vbar = ops.Vbar.col(k);
        // Solvable iff the G-weighted mean of the data vanishes.
        require_solvable(grid, eq.G, eq.G.cwiseProduct(vbar), "solve_psi");
        Eigen::VectorXd p = solver.solve(-vbar);
        p.array() -= pair_G(grid, eq.G, p, Eigen::VectorXd::Ones(M));
        check_residual((ops.Ladj * p + vbar).cwiseAbs().maxCoeff(), tol_cell,
                       "solve_psi");
        psi.col(k) = p;
    }
    return psi;
}

Eigen::MatrixXd solve_omega(const Angular& grid, const SampledModel& model,
                            const EquilibriumState& eq, const LinearizedOps& ops,
                            double tol_cell) {
    const int M = static_cast<int>(grid.size());
    Eigen::MatrixXd omega(M, model.n);
    DeflatedSolver solver(ops.L, ops.Qres);
    for (int k = 0; k < model.n; ++k) {
        const Eigen::VectorXd rhs = -eq.G.cwiseProduct(ops.Vbar.col(k));
        require_solvable(grid, eq.G, rhs, "solve_omega");
        Eigen::VectorXd h = solver.solve(rhs);
        // Shifts of h along G move <omega>_G; pin it to zero.
        h -= grid.quadrature(h) * eq.G;
        check_residual((ops.L * h - rhs).cwiseAbs().maxCoeff(), tol_cell,
                       "solve_omega");
        omega.col(k) = h.cwiseQuotient(eq.G);
    }
    return omega;
}

Eigen::MatrixXd flux_for_xi(const Angular& grid, const SampledModel& model,
                            const EquilibriumState& eq, const LinearizedOps& ops,
                            const Eigen::MatrixXd& xi) {
    const Eigen::VectorXd gg = model.Gamma.cwiseProduct(eq.G);
    const Eigen::VectorXd inv_gg = gg.cwiseInverse();
    const double inv_gg_mass = grid.quadrature(inv_gg);
    Eigen::MatrixXd flux(xi.rows(), xi.cols());
    for (int k = 0; k < xi.cols(); ++k) {
        const Eigen::VectorXd rhs = ops.L * eq.G.cwiseProduct(xi.col(k));
        Eigen::VectorXd f = grid.antideriv() * rhs;
        // The additive constant is fixed by the weighted zero-mean rule.
        f.array() -= grid.quadrature(f.cwiseProduct(inv_gg)) / inv_gg_mass;
        flux.col(k) = f;
    }
    return flux;
}

XiPair solve_xi_canonical(const Angular& grid, const SampledModel& model,
                          const EquilibriumState& eq, const LinearizedOps& ops,
                          const Eigen::MatrixXd& psi, double tol_cell) {
    const Eigen::MatrixXd& D = grid.deriv();
    const Eigen::VectorXd gg = model.Gamma.cwiseProduct(eq.G);

    XiPair out;
    out.xi.resize(psi.rows(), psi.cols());
    out.flux_potential.resize(psi.rows(), psi.cols());
    DeflatedSolver solver(ops.L, ops.Qres);
    for (int k = 0; k < psi.cols(); ++k) {
        const Eigen::VectorXd flux = gg.cwiseProduct(D * psi.col(k));
        const Eigen::VectorXd rhs = D * flux;
        require_solvable(grid, eq.G, rhs, "solve_xi_canonical");
        Eigen::VectorXd h = solver.solve(rhs);
        h -= grid.quadrature(h) * eq.G;
        check_residual((ops.L * h - rhs).cwiseAbs().maxCoeff(), tol_cell,
                       "solve_xi_canonical");
        check_residual((D * flux - ops.L * h).cwiseAbs().maxCoeff(), tol_cell,
                       "solve_xi_canonical flux");
        out.xi.col(k) = h.cwiseQuotient(eq.G);
        out.flux_potential.col(k) = flux;
    }
    return out;
}

CoefficientSet assemble_matrices(const Angular& grid, const SampledModel& model,
                                 const EquilibriumState& eq,
                                 const LinearizedOps& ops,
                                 const Eigen::MatrixXd& psi,
                                 const Eigen::MatrixXd& omega,
                                 const XiPair& xi_pair) {
    const int n = model.n;
    const Eigen::MatrixXd& D = grid.deriv();
    const Eigen::VectorXd gg = model.Gamma.cwiseProduct(eq.G);

    CoefficientSet cs;
    cs.psi = psi;
    cs.omega = omega;
    cs.xi = xi_pair.xi;
    cs.flux_potential = xi_pair.flux_potential;
    cs.Dmat.resize(n, n);
    cs.Sigma.resize(n, n);
    cs.Emat.resize(n, n);
    cs.Rmat.resize(n, n);

    Eigen::MatrixXd dpsi(psi.rows(), n);
    for (int k = 0; k < n; ++k) dpsi.col(k) = D * psi.col(k);

    for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
            const double dkl = pair_G(grid, eq.G, psi.col(k), ops.Vbar.col(l));
            const double dlk = pair_G(grid, eq.G, psi.col(l), ops.Vbar.col(k));
            cs.Dmat(k, l) = 0.5 * (dkl + dlk);
            cs.Sigma(k, l) = grid.quadrature(
                gg.cwiseProduct(dpsi.col(k)).cwiseProduct(dpsi.col(l)));
            cs.Emat(k, l) = pair_G(grid, eq.G, ops.Vbar.col(k), cs.xi.col(l));
            cs.Rmat(k, l) = grid.quadrature(cs.flux_potential.col(k)
                                                .cwiseProduct(cs.flux_potential.col(l))
                                                .cwiseQuotient(gg));
        }
    }

    // Track how far the stored fields sit from their defining equations.
    double res = 0.0;
    for (int k = 0; k < n; ++k) {
        res = std::max(res,
                       (ops.Ladj * psi.col(k) + ops.Vbar.col(k)).cwiseAbs().maxCoeff());
        res = std::max(res, (ops.L * eq.G.cwiseProduct(omega.col(k)) +
                             eq.G.cwiseProduct(ops.Vbar.col(k)))
                                .cwiseAbs()
                                .maxCoeff());
        res = std::max(res, (D * cs.flux_potential.col(k) -
                             ops.L * eq.G.cwiseProduct(cs.xi.col(k)))
                                .cwiseAbs()
                                .maxCoeff());
    }
    cs.max_cell_residual = res;
    return cs;
}

CoefficientSet solve_coefficients(const Angular& grid, const SampledModel& model,
                                  const EquilibriumState& eq,
                                  const LinearizedOps& ops, double tol_cell) {
    Eigen::MatrixXd psi = solve_psi(grid, model, eq, ops, tol_cell);
    Eigen::MatrixXd omega = solve_omega(grid, model, eq, ops, tol_cell);
    XiPair xp = solve_xi_canonical(grid, model, eq, ops, psi, tol_cell);
    return assemble_matrices(grid, model, eq, ops, psi, omega, xp);
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& A, double rel_cut) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double cut = rel_cut * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (std::abs(ev(i)) > cut) inv(i) = 1.0 / ev(i);
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

SchurReport schur_sweep(const Angular& grid, const SampledModel& model,
                        const EquilibriumState& eq, const LinearizedOps& ops,
                        int trials, std::uint64_t seed) {
    const int M = static_cast<int>(grid.size());
    const int n = model.n;

    Eigen::MatrixXd psi = solve_psi(grid, model, eq, ops);
    Eigen::MatrixXd omega = solve_omega(grid, model, eq, ops);
    XiPair canonical = solve_xi_canonical(grid, model, eq, ops, psi);

    auto gap_for = [&](const XiPair& xp) {
        CoefficientSet cs = assemble_matrices(grid, model, eq, ops, psi, omega, xp);
        Eigen::MatrixXd schur =
            cs.Sigma - cs.Emat * pseudo_inverse(cs.Rmat) * cs.Emat.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            0.5 * (schur + schur.transpose()));
        return std::pair<double, Eigen::MatrixXd>(es.eigenvalues().minCoeff(),
                                                  schur);
    };

    SchurReport rep;
    rep.trials = trials;
    auto canon = gap_for(canonical);
    rep.equality_residual = canon.second.norm();
    rep.min_eig_gap = canon.first;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int max_mode = 8; // keep L(G xi) inside the resolved band
    for (int t = 0; t < trials; ++t) {
        XiPair xp;
        xp.xi.resize(M, n);
        for (int k = 0; k < n; ++k) {
            Eigen::VectorXd x = Eigen::VectorXd::Zero(M);
            for (int m = 1; m <= max_mode; ++m) {
                const double am = gauss(rng), bm = gauss(rng);
                for (int j = 0; j < M; ++j)
                    x(j) += am * std::cos(m * grid.node(j)) +
                            bm * std::sin(m * grid.node(j));
            }
            x.array() -= grid.quadrature(eq.G.cwiseProduct(x));
            xp.xi.col(k) = x;
        }
        xp.flux_potential = flux_for_xi(grid, model, eq, ops, xp.xi);
        rep.min_eig_gap = std::min(rep.min_eig_gap, gap_for(xp).first);
    }
    return rep;
}

} // namespace slowfast
