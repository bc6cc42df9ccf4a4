#include "slowfast/hminus.hpp"

#include <cmath>

#include "slowfast/errors.hpp"
#include "slowfast/linops.hpp"

namespace slowfast {

namespace {

bool mass_feasible(const Angular& grid, const Eigen::VectorXd& g,
                   double tol_mean) {
    const double mass = grid.quadrature(g);
    const double scale = grid.quadrature(g.cwiseAbs());
    return std::abs(mass) <= tol_mean * scale + 1e-300;
}

// Optimal control in closed form. Controls with derivative g form a
// two-parameter family: the antiderivative plus the kernel of the collocation
// derivative, spanned by constants and the alternating Nyquist vector.
// Minimizing quadrature(c^2 / h) over both coefficients is a 2x2 normal
// system; the alternating coefficient vanishes for resolved weights.
Eigen::VectorXd optimal_control(const Angular& grid, const Eigen::VectorXd& g,
                                const Eigen::VectorXd& invh) {
    const Eigen::VectorXd C = grid.antideriv() * g;
    const Eigen::VectorXd s = sawtooth(static_cast<int>(grid.size()));
    const double g11 = grid.quadrature(invh);
    const double g12 = grid.quadrature(s.cwiseProduct(invh));
    const double b1 = grid.quadrature(C.cwiseProduct(invh));
    const double b2 = grid.quadrature(C.cwiseProduct(s).cwiseProduct(invh));
    // Gram matrix [[g11, g12], [g12, g11]] since s squares to one.
    const double det = g11 * g11 - g12 * g12;
    const double t = (-b1 * g11 + b2 * g12) / det;
    const double u = (b1 * g12 - b2 * g11) / det;
    return C + t * Eigen::VectorXd::Ones(C.size()) + u * s;
}

} // namespace

double fiber_norm_value(const Angular& grid, const Eigen::VectorXd& g,
                        const Eigen::VectorXd& h, double tol_mean) {
    if (h.minCoeff() <= 0.0)
        throw SingularWeight("fiber norm weight must be positive");
    if (!mass_feasible(grid, g, tol_mean)) return kInfValue;
    const Eigen::VectorXd invh = h.cwiseInverse();
    const Eigen::VectorXd c = optimal_control(grid, g, invh);
    return grid.quadrature(c.cwiseProduct(c).cwiseProduct(invh));
}

FiberNormResult fiber_norm_sq(const Angular& grid, const Eigen::VectorXd& g,
                              const Eigen::VectorXd& h, double tol_mean) {
    if (h.minCoeff() <= 0.0)
        throw SingularWeight("fiber norm weight must be positive");

    FiberNormResult out;
    if (!mass_feasible(grid, g, tol_mean)) {
        out.finite = false;
        out.value = kInfValue;
        return out;
    }

    const Eigen::VectorXd invh = h.cwiseInverse();
    out.control = optimal_control(grid, g, invh);
    out.value =
        grid.quadrature(out.control.cwiseProduct(out.control).cwiseProduct(invh));

    // Independent sup route: maximize 2<g,phi> - <h,(phi')^2>.
    const Eigen::MatrixXd& D = grid.deriv();
    const Eigen::MatrixXd op = D * h.asDiagonal() * D;
    DeflatedSolver solver(op, orthonormal_complement(sawtooth(
                                  static_cast<int>(grid.size()))));
    Eigen::VectorXd phi = solver.solve(-g);
    phi.array() -= grid.quadrature(phi) / kTwoPi;
    out.multiplier = phi;
    return out;
}

SpatialNormResult spatial_weighted_norm_sq(const Spatial& sgrid,
                                           const Eigen::VectorXd& g,
                                           const Weight& chi, double tol_lin,
                                           double tol_mean) {
    SpatialNormResult out;
    const double mass = sgrid.quadrature(g);
    const double scale = sgrid.quadrature(g.cwiseAbs());
    if (std::abs(mass) > tol_mean * scale + 1e-300) {
        out.finite = false;
        out.value = kInfValue;
        return out;
    }

    out.potential = sgrid.solve_weighted_poisson(chi, g, tol_lin, tol_mean);
    out.value = sgrid.quadrature(g.cwiseProduct(out.potential));

    std::vector<Eigen::VectorXd> grad = sgrid.grad(out.potential);
    out.control.resize(static_cast<size_t>(sgrid.dim()));
    if (sgrid.dim() == 1) {
        out.control[0] = chi.a11.cwiseProduct(grad[0]);
    } else {
        out.control[0] =
            chi.a11.cwiseProduct(grad[0]) + chi.a12.cwiseProduct(grad[1]);
        out.control[1] =
            chi.a12.cwiseProduct(grad[0]) + chi.a22.cwiseProduct(grad[1]);
    }
    return out;
}

} // namespace slowfast
