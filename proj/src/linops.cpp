#include "slowfast/linops.hpp"

#include <cmath>

#include "slowfast/errors.hpp"

namespace slowfast {

namespace {

int rank_deficiency(const Eigen::MatrixXd& A, double rel_tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double cut = rel_tol * sv(0);
    int dim = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) <= cut) ++dim;
    return dim;
}

} // namespace

Eigen::VectorXd sawtooth(int M) {
    Eigen::VectorXd s(M);
    for (int j = 0; j < M; ++j) s(j) = (j % 2 == 0) ? 1.0 : -1.0;
    return s;
}

Eigen::MatrixXd orthonormal_complement(const Eigen::MatrixXd& cols) {
    const Eigen::Index M = cols.rows();
    const Eigen::Index k = cols.cols();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(cols);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(M, M);
    return Q.rightCols(M - k);
}

LinearizedOps assemble_linearized(const Angular& grid, const SampledModel& model,
                                  const EquilibriumState& eq,
                                  double tol_op_base) {
    const int M = static_cast<int>(grid.size());
    const double w = grid.quad_weight();
    const Eigen::MatrixXd& D = grid.deriv();
    const Eigen::VectorXd& G = eq.G;
    const Eigen::VectorXd& Gam = model.Gamma;

    LinearizedOps ops;
    ops.G = G;

    const Eigen::VectorXd FG = convolve_F(grid, model, G);
    const Eigen::VectorXd gg = Gam.cwiseProduct(G);
    const Eigen::VectorXd invG = G.cwiseInverse();

    // Linearization about G in conservative ratio form,
    //   L g = d/dtheta ( Gamma G d/dtheta (g/G) + Gamma G dF[g] ),
    // where dF[g] is the density response of the normalized interaction
    // drift. At equilibrium Gamma G (g/G)' equals Gamma (A0 g + g'), but the
    // ratio form also keeps the discrete operator exactly conjugate to the
    // weighted Dirichlet form, which the literal drift product does not.
    Eigen::MatrixXd B = gg.asDiagonal() * (D * invG.asDiagonal());
    if (model.has_interaction)
        B += gg.asDiagonal() *
             (w * model.Fker - FG * Eigen::RowVectorXd::Constant(M, w));
    ops.L = D * B;

    // Adjoint assembled from its own analytic expression, not by transposing.
    Eigen::MatrixXd Ladj = invG.asDiagonal() * (D * (gg.asDiagonal() * D));
    if (model.has_interaction) {
        Ladj -= w * model.Fker.transpose() * gg.asDiagonal() * D;
        Ladj += Eigen::VectorXd::Ones(M) *
                (w * gg.cwiseProduct(FG)).transpose() * D;
    }
    ops.Ladj = Ladj;

    ops.adjointness_gap = (ops.L.transpose() - ops.Ladj).norm() /
                          std::max(1.0, ops.L.norm());

    ops.Pi_G = w * G * Eigen::RowVectorXd::Ones(M);
    ops.mean_projector = Eigen::MatrixXd::Identity(M, M) - ops.Pi_G;

    ops.Vbar = centered_velocity(grid, model, eq.G);
    ops.Qres = orthonormal_complement(sawtooth(M));
    ops.tol_op = tol_op_base * std::max(1.0, ops.L.cwiseAbs().maxCoeff());

    ops.kernel_dim_L = rank_deficiency(ops.L * ops.Qres, 1e-10);
    ops.kernel_dim_Ladj = rank_deficiency(ops.Ladj * ops.Qres, 1e-10);

    // Dissipativity margin: smallest generalized eigenvalue of the
    // symmetrized quadratic form of -L in the 1/G metric against the
    // weighted Dirichlet form, both restricted to mean-zero resolved
    // perturbations (the kernel directions G and G*sawtooth are excluded).
    Eigen::MatrixXd A_bil = -w * invG.asDiagonal() * ops.L;
    Eigen::MatrixXd S = 0.5 * (A_bil + A_bil.transpose());
    Eigen::MatrixXd C = D * invG.asDiagonal();
    Eigen::MatrixXd Bq =
        w * C.transpose() * G.cwiseProduct(Gam).asDiagonal() * C;

    Eigen::MatrixXd excl(M, 2);
    excl.col(0) = Eigen::VectorXd::Ones(M);
    excl.col(1) = G.cwiseProduct(sawtooth(M));
    Eigen::MatrixXd Z = orthonormal_complement(excl);

    Eigen::MatrixXd Sz = Z.transpose() * S * Z;
    Eigen::MatrixXd Bz = Z.transpose() * Bq * Z;
    Sz = 0.5 * (Sz + Sz.transpose());
    Bz = 0.5 * (Bz + Bz.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> bcheck(Bz);
    const double bmax = bcheck.eigenvalues().cwiseAbs().maxCoeff();
    if (bcheck.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, bmax))
        throw DegenerateDirichletForm(
            "dirichlet form is singular on the mean-zero resolved subspace");

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> gev(Sz, Bz);
    ops.kappa_margin = gev.eigenvalues().minCoeff();

    return ops;
}

DeflatedSolver::DeflatedSolver(const Eigen::MatrixXd& op, Eigen::MatrixXd basis)
    : basis_(std::move(basis)) {
    cod_.setThreshold(1e-10);
    cod_.compute(op * basis_);
}

Eigen::VectorXd DeflatedSolver::solve(const Eigen::VectorXd& rhs) const {
    return basis_ * cod_.solve(rhs);
}

Field apply_D_f(const Angular& grid, const SampledModel& model, const Field& f,
                double eps_mass) {
    const double w = grid.quad_weight();
    const Eigen::MatrixXd& D = grid.deriv();
    const Eigen::VectorXd& Gam = model.Gamma;

    Eigen::RowVectorXd mass = w * f.colwise().sum();
    if (mass.minCoeff() <= eps_mass)
        throw VacuousDensity("fiber mass fell below the vacuity threshold");

    Field drift = model.dU.replicate(1, f.cols());
    if (model.has_interaction) {
        Field conv = w * model.Fker * f;
        conv.array().rowwise() /= mass.array();
        drift += conv;
    }

    Field inner = drift.cwiseProduct(f);
    inner += D * f;
    inner = Gam.asDiagonal() * inner;
    return D * inner;
}

Field apply_T0(const Angular& grid, const Spatial& sgrid,
               const SampledModel& model, const Eigen::VectorXd& G,
               const Field& g) {
    Field out = Field::Zero(g.rows(), g.cols());
    const Eigen::MatrixXd Vbar = centered_velocity(grid, model, G);
    for (int d = 0; d < model.n; ++d)
        out += Vbar.col(d).asDiagonal() * sgrid.partial_field(g, d);
    return out;
}

Field apply_transport(const Angular& grid, const Spatial& sgrid,
                      const SampledModel& model, const Field& g) {
    (void)grid;
    Field out = Field::Zero(g.rows(), g.cols());
    for (int d = 0; d < model.n; ++d)
        out += model.V.col(d).asDiagonal() * sgrid.partial_field(g, d);
    return out;
}

Eigen::MatrixXd angular_drift_diffusion(const Angular& grid,
                                        const SampledModel& model) {
    const Eigen::MatrixXd& D = grid.deriv();
    Eigen::MatrixXd B = model.dU.cwiseProduct(model.Gamma).asDiagonal();
    B += model.Gamma.asDiagonal() * D;
    return D * B;
}

} // namespace slowfast
