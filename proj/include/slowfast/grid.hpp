#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "slowfast/errors.hpp"

namespace slowfast {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

namespace detail {

// Signed integer wavenumber for DFT bin k of an M point grid,
// in {-M/2, ..., M/2 - 1}.
inline int signed_wavenumber(int k, int M) {
    return (k < M / 2) ? k : k - M;
}

// Dense DFT-synthesized circulant: applies, in Fourier space, the given
// multiplier per signed wavenumber and returns the real M x M matrix.
// Used for the antiderivative (1/(ik)) and for spectral shifts.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
circulant_from_multiplier(int M, double period,
                          const std::vector<std::complex<double>>& mult) {
    using C = std::complex<double>;
    Eigen::MatrixXcd fwd(M, M), inv(M, M);
    for (int k = 0; k < M; ++k) {
        const double kk = signed_wavenumber(k, M);
        for (int j = 0; j < M; ++j) {
            const double phase = kTwoPi * kk * j / M;
            fwd(k, j) = C(std::cos(phase), -std::sin(phase)) / double(M);
            inv(j, k) = C(std::cos(phase), std::sin(phase));
        }
    }
    (void)period;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(M, M);
    for (int k = 0; k < M; ++k) m(k, k) = mult[static_cast<size_t>(k)];
    Eigen::MatrixXcd full = inv * m * fwd;
    return full.real().template cast<Scalar>();
}

} // namespace detail

// ============================================================================
// Angular grid: M uniform nodes on the circle (-pi, pi], spectral calculus.
// ============================================================================

template <class Scalar = double>
class AngularGrid {
public:
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    explicit AngularGrid(int M) : M_(M) {
        if (M < 16 || M % 2 != 0)
            throw ConfigError("angular grid size must be even and >= 16, got " +
                              std::to_string(M));
        nodes_.resize(M);
        for (int j = 0; j < M; ++j)
            nodes_[j] = Scalar(-kPi + kTwoPi * j / M);
        build_deriv();
        build_antideriv();
    }

    int size() const { return M_; }
    const Vec& nodes() const { return nodes_; }
    Scalar node(int j) const { return nodes_[j]; }
    Scalar quad_weight() const { return Scalar(kTwoPi / M_); }

    // Trapezoid rule; spectrally exact for trigonometric polynomials of
    // degree < M on a periodic grid.
    Scalar quadrature(const Vec& u) const { return quad_weight() * u.sum(); }

    const Mat& deriv() const { return D_; }
    const Mat& antideriv() const { return A_; }

    Vec d_theta(const Vec& u) const { return D_ * u; }

    // Periodic antiderivative with zero quadrature mean. The mean of the
    // input must vanish (relative tolerance tol_mean) or no periodic
    // solution exists.
    Vec antiderivative_theta(const Vec& g, double tol_mean = 1e-10) const {
        require_mean_zero(g, tol_mean, "antiderivative_theta");
        Vec C = A_ * g;
        C.array() -= quadrature(C) / Scalar(kTwoPi);
        return C;
    }

    void require_mean_zero(const Vec& g, double tol_mean,
                           const char* who) const {
        const double mean = static_cast<double>(quadrature(g));
        const double scale =
            static_cast<double>(quad_weight() * g.cwiseAbs().sum());
        if (std::abs(mean) > tol_mean * scale + 1e-300)
            throw NonZeroMean(std::string(who) +
                              ": field has nonzero mean " + std::to_string(mean));
    }

    bool mean_is_zero(const Vec& g, double tol_mean = 1e-10) const {
        const double mean = static_cast<double>(quadrature(g));
        const double scale =
            static_cast<double>(quad_weight() * g.cwiseAbs().sum());
        return std::abs(mean) <= tol_mean * scale + 1e-300;
    }

    // Samples a callable on the nodes.
    template <class F>
    Vec sample(F&& f) const {
        Vec out(M_);
        for (int j = 0; j < M_; ++j)
            out[j] = Scalar(f(static_cast<double>(nodes_[j])));
        return out;
    }

private:
    void build_deriv() {
        // Standard even-M collocation derivative,
        // D_{jk} = (1/2)(-1)^{j-k} cot((j-k)h/2), zero diagonal.
        D_.setZero(M_, M_);
        const double h = kTwoPi / M_;
        for (int j = 0; j < M_; ++j) {
            for (int k = 0; k < M_; ++k) {
                if (j == k) continue;
                const int d = j - k;
                const double sign = (d % 2 == 0) ? 1.0 : -1.0;
                D_(j, k) = Scalar(0.5 * sign / std::tan(0.5 * d * h));
            }
        }
    }

    void build_antideriv() {
        // Inverse derivative in Fourier space; k = 0 and the Nyquist bin
        // carry no resolvable antiderivative and are zeroed.
        std::vector<std::complex<double>> mult(static_cast<size_t>(M_));
        for (int k = 0; k < M_; ++k) {
            const int kk = detail::signed_wavenumber(k, M_);
            if (kk == 0 || kk == -M_ / 2)
                mult[static_cast<size_t>(k)] = 0.0;
            else
                mult[static_cast<size_t>(k)] =
                    1.0 / std::complex<double>(0.0, double(kk));
        }
        A_ = detail::circulant_from_multiplier<Scalar>(M_, kTwoPi, mult);
    }

    int M_;
    Vec nodes_;
    Mat D_, A_;
};

// Trigonometric interpolant of a real periodic sample vector; evaluates the
// band-limited interpolant at arbitrary angles in O(M) per call.
template <class Scalar = double>
class TrigInterp {
public:
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    TrigInterp() = default;

    TrigInterp(const AngularGrid<Scalar>& grid, const Vec& u) {
        const int M = grid.size();
        half_ = M / 2;
        a_.assign(static_cast<size_t>(half_) + 1, 0.0);
        b_.assign(static_cast<size_t>(half_) + 1, 0.0);
        for (int k = 0; k <= half_; ++k) {
            double cr = 0.0, ci = 0.0;
            for (int j = 0; j < M; ++j) {
                const double th = static_cast<double>(grid.node(j));
                cr += static_cast<double>(u[j]) * std::cos(k * th);
                ci += static_cast<double>(u[j]) * std::sin(k * th);
            }
            const double norm = (k == 0 || k == half_) ? 1.0 / M : 2.0 / M;
            a_[static_cast<size_t>(k)] = norm * cr;
            b_[static_cast<size_t>(k)] = norm * ci;
        }
        b_[static_cast<size_t>(half_)] = 0.0; // Nyquist kept as pure cosine
    }

    double operator()(double theta) const {
        // Incremental rotation instead of M trig calls.
        double c = 1.0, s = 0.0;
        const double cd = std::cos(theta), sd = std::sin(theta);
        double acc = a_[0];
        for (int k = 1; k <= half_; ++k) {
            const double cn = c * cd - s * sd;
            const double sn = s * cd + c * sd;
            c = cn;
            s = sn;
            acc += a_[static_cast<size_t>(k)] * c + b_[static_cast<size_t>(k)] * s;
        }
        return acc;
    }

private:
    int half_ = 0;
    std::vector<double> a_, b_;
};

// ============================================================================
// Nodewise symmetric positive definite weight field on a spatial grid
// (scalar in 1d, the three components of a symmetric 2x2 matrix in 2d).
// ============================================================================

template <class Scalar = double>
struct SpdField {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    int n = 1;
    Vec a11, a12, a22;

    static SpdField isotropic(int dim, const Vec& s) {
        SpdField f;
        f.n = dim;
        f.a11 = s;
        if (dim == 2) {
            f.a12 = Vec::Zero(s.size());
            f.a22 = s;
        }
        return f;
    }

    // chi(q) = scale(q) * A for a constant symmetric matrix A.
    static SpdField scaled_constant(int dim,
                                    const Eigen::Matrix<Scalar, 2, 2>& A,
                                    const Vec& scale) {
        SpdField f;
        f.n = dim;
        f.a11 = A(0, 0) * scale;
        if (dim == 2) {
            f.a12 = A(0, 1) * scale;
            f.a22 = A(1, 1) * scale;
        }
        return f;
    }

    Scalar min_eigenvalue() const {
        if (n == 1) return a11.minCoeff();
        Scalar m = std::numeric_limits<Scalar>::max();
        for (Eigen::Index i = 0; i < a11.size(); ++i) {
            const Scalar tr = a11[i] + a22[i];
            const Scalar d = a11[i] - a22[i];
            const Scalar disc = std::sqrt(d * d + 4 * a12[i] * a12[i]);
            m = std::min(m, (tr - disc) / 2);
        }
        return m;
    }

    void require_spd(double eps_spd = 1e-12) const {
        const double m = static_cast<double>(min_eigenvalue());
        if (!(m > eps_spd))
            throw SingularWeight("weight field min eigenvalue " +
                                 std::to_string(m) + " below " +
                                 std::to_string(eps_spd));
    }
};

// ============================================================================
// Spatial grid: periodic box in 1 or 2 dimensions, Fourier collocation.
// Flattened node index x = i1 + K1*i2 (first dimension fastest).
// ============================================================================

template <class Scalar = double>
class SpatialGrid {
public:
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    SpatialGrid(int dim, std::array<int, 2> counts,
                std::array<double, 2> lengths)
        : n_(dim), K_(counts), L_(lengths) {
        if (dim != 1 && dim != 2)
            throw ConfigError("spatial dimension must be 1 or 2");
        for (int d = 0; d < dim; ++d) {
            if (K_[d] < 4 || K_[d] % 2 != 0)
                throw ConfigError("spatial node count must be even and >= 4");
            if (!(L_[d] > 0))
                throw ConfigError("spatial box length must be positive");
        }
        total_ = K_[0] * (dim == 2 ? K_[1] : 1);
        for (int d = 0; d < dim; ++d) build_deriv(d);
    }

    static SpatialGrid line(int K, double L) { return SpatialGrid(1, {K, 1}, {L, 1.0}); }
    static SpatialGrid square(int K, double L) { return SpatialGrid(2, {K, K}, {L, L}); }

    int dim() const { return n_; }
    int count(int d) const { return K_[d]; }
    double length(int d) const { return L_[d]; }
    long size() const { return total_; }

    double node(int d, int i) const { return L_[d] * i / K_[d]; }

    std::array<double, 2> coords(long x) const {
        const int i1 = static_cast<int>(x % K_[0]);
        const int i2 = static_cast<int>(x / K_[0]);
        return {node(0, i1), n_ == 2 ? node(1, i2) : 0.0};
    }

    double quad_weight() const {
        double w = L_[0] / K_[0];
        if (n_ == 2) w *= L_[1] / K_[1];
        return w;
    }

    double volume() const { return n_ == 2 ? L_[0] * L_[1] : L_[0]; }

    Scalar quadrature(const Vec& u) const {
        return Scalar(quad_weight()) * u.sum();
    }

    const Mat& deriv(int d) const { return D_[d]; }

    template <class F>
    Vec sample(F&& f) const {
        Vec out(total_);
        for (long x = 0; x < total_; ++x) {
            auto c = coords(x);
            out[x] = Scalar(f(c[0], c[1]));
        }
        return out;
    }

    template <class F>
    Vec sample1(F&& f) const {
        Vec out(total_);
        for (long x = 0; x < total_; ++x) out[x] = Scalar(f(coords(x)[0]));
        return out;
    }

    // ---- derivatives on flattened fields -----------------------------------

    Vec partial(const Vec& u, int d) const {
        check_dim(d);
        Vec out(total_);
        if (d == 0) {
            const int K1 = K_[0];
            const int blocks = static_cast<int>(total_ / K1);
            for (int b = 0; b < blocks; ++b)
                out.segment(b * K1, K1) = D_[0] * u.segment(b * K1, K1);
        } else {
            const int K1 = K_[0], K2 = K_[1];
            Vec tmp(K2), res(K2);
            for (int i1 = 0; i1 < K1; ++i1) {
                for (int i2 = 0; i2 < K2; ++i2) tmp[i2] = u[i1 + K1 * i2];
                res = D_[1] * tmp;
                for (int i2 = 0; i2 < K2; ++i2) out[i1 + K1 * i2] = res[i2];
            }
        }
        return out;
    }

    std::vector<Vec> grad(const Vec& u) const {
        std::vector<Vec> g;
        g.reserve(static_cast<size_t>(n_));
        for (int d = 0; d < n_; ++d) g.push_back(partial(u, d));
        return g;
    }

    Vec div(const std::vector<Vec>& v) const {
        Vec out = partial(v[0], 0);
        for (int d = 1; d < n_; ++d) out += partial(v[static_cast<size_t>(d)], d);
        return out;
    }

    // Derivative in spatial dimension d of a theta-major field
    // (rows are angular nodes, columns are flattened spatial nodes).
    Mat partial_field(const Mat& F, int d) const {
        check_dim(d);
        Mat out(F.rows(), F.cols());
        if (d == 0) {
            const int K1 = K_[0];
            const int blocks = static_cast<int>(total_ / K1);
            for (int b = 0; b < blocks; ++b)
                out.middleCols(b * K1, K1) =
                    F.middleCols(b * K1, K1) * D_[0].transpose();
        } else {
            const int K1 = K_[0], K2 = K_[1];
            Mat tmp(F.rows(), K2);
            for (int i1 = 0; i1 < K1; ++i1) {
                for (int i2 = 0; i2 < K2; ++i2) tmp.col(i2) = F.col(i1 + K1 * i2);
                tmp = tmp * D_[1].transpose();
                for (int i2 = 0; i2 < K2; ++i2) out.col(i1 + K1 * i2) = tmp.col(i2);
            }
        }
        return out;
    }

    void check_mean_zero(const Vec& g, double tol_mean, const char* who) const {
        const double mean = static_cast<double>(quadrature(g));
        const double scale =
            quad_weight() * static_cast<double>(g.cwiseAbs().sum());
        if (std::abs(mean) > tol_mean * scale + 1e-300)
            throw NonZeroMean(std::string(who) + ": spatial field has mean " +
                              std::to_string(mean));
    }

    // ---- spectral shift ----------------------------------------------------

    // u(x) -> u(x - disp), exact for the band-limited interpolant.
    Vec shift(const Vec& u, std::array<double, 2> disp) const {
        Vec out = u;
        for (int d = 0; d < n_; ++d) {
            if (disp[d] == 0.0) continue;
            Mat S = shift_matrix(d, disp[d]);
            out = apply_along(out, S, d);
        }
        return out;
    }

    Mat shift_field(const Mat& F, std::array<double, 2> disp) const {
        Mat out = F;
        for (int d = 0; d < n_; ++d) {
            if (disp[d] == 0.0) continue;
            Mat S = shift_matrix(d, disp[d]);
            if (d == 0) {
                const int K1 = K_[0];
                const int blocks = static_cast<int>(total_ / K1);
                for (int b = 0; b < blocks; ++b)
                    out.middleCols(b * K1, K1) =
                        out.middleCols(b * K1, K1) * S.transpose();
            } else {
                const int K1 = K_[0], K2 = K_[1];
                Mat tmp(F.rows(), K2);
                for (int i1 = 0; i1 < K1; ++i1) {
                    for (int i2 = 0; i2 < K2; ++i2)
                        tmp.col(i2) = out.col(i1 + K1 * i2);
                    tmp = tmp * S.transpose();
                    for (int i2 = 0; i2 < K2; ++i2)
                        out.col(i1 + K1 * i2) = tmp.col(i2);
                }
            }
        }
        return out;
    }

    // ---- weighted Poisson solve -------------------------------------------

    // Returns phi with div(chi grad phi) = -rhs, zero mean normalized.
    // Dense minimum-norm solve in 1d; matrix-free conjugate gradients in 2d.
    Vec solve_weighted_poisson(const SpdField<Scalar>& chi, const Vec& rhs,
                               double tol_lin = 1e-10,
                               double tol_mean = 1e-10) const {
        chi.require_spd();
        check_mean_zero(rhs, tol_mean, "solve_weighted_poisson");
        Vec phi = (n_ == 1) ? poisson_dense_1d(chi, rhs) : poisson_cg(chi, rhs);
        phi.array() -= quadrature(phi) / Scalar(volume());
        // Verify by applying the forward operator.
        Vec resid = apply_weighted_laplacian(chi, phi) + rhs;
        const double rnorm = static_cast<double>(resid.norm());
        const double bnorm = static_cast<double>(rhs.norm());
        if (bnorm > 0 && rnorm > tol_lin * bnorm * 100)
            throw NoConvergence("weighted Poisson residual " +
                                std::to_string(rnorm / bnorm) +
                                " exceeds tolerance (unresolved content in rhs?)");
        return phi;
    }

    Vec apply_weighted_laplacian(const SpdField<Scalar>& chi,
                                 const Vec& phi) const {
        std::vector<Vec> g = grad(phi);
        std::vector<Vec> flux(static_cast<size_t>(n_));
        if (n_ == 1) {
            flux[0] = chi.a11.cwiseProduct(g[0]);
        } else {
            flux[0] = chi.a11.cwiseProduct(g[0]) + chi.a12.cwiseProduct(g[1]);
            flux[1] = chi.a12.cwiseProduct(g[0]) + chi.a22.cwiseProduct(g[1]);
        }
        return div(flux);
    }

private:
    void check_dim(int d) const {
        if (d < 0 || d >= n_) throw ConfigError("spatial dimension index out of range");
    }

    void build_deriv(int d) {
        const int K = K_[d];
        const double h = kTwoPi / K;
        Mat D = Mat::Zero(K, K);
        for (int j = 0; j < K; ++j)
            for (int k = 0; k < K; ++k) {
                if (j == k) continue;
                const int diff = j - k;
                const double sign = (diff % 2 == 0) ? 1.0 : -1.0;
                D(j, k) = Scalar(0.5 * sign / std::tan(0.5 * diff * h));
            }
        D_[d] = D * Scalar(kTwoPi / L_[d]);
    }

    Mat shift_matrix(int d, double disp) const {
        const int K = K_[d];
        std::vector<std::complex<double>> mult(static_cast<size_t>(K));
        for (int k = 0; k < K; ++k) {
            const int kk = detail::signed_wavenumber(k, K);
            const double phase = -kTwoPi * kk * disp / L_[d];
            if (kk == -K / 2)
                mult[static_cast<size_t>(k)] = std::cos(phase); // Nyquist as cosine
            else
                mult[static_cast<size_t>(k)] =
                    std::complex<double>(std::cos(phase), std::sin(phase));
        }
        return detail::circulant_from_multiplier<Scalar>(K, L_[d], mult);
    }

    Vec apply_along(const Vec& u, const Mat& Op, int d) const {
        Vec out(total_);
        if (d == 0) {
            const int K1 = K_[0];
            const int blocks = static_cast<int>(total_ / K1);
            for (int b = 0; b < blocks; ++b)
                out.segment(b * K1, K1) = Op * u.segment(b * K1, K1);
        } else {
            const int K1 = K_[0], K2 = K_[1];
            Vec tmp(K2), res(K2);
            for (int i1 = 0; i1 < K1; ++i1) {
                for (int i2 = 0; i2 < K2; ++i2) tmp[i2] = u[i1 + K1 * i2];
                res = Op * tmp;
                for (int i2 = 0; i2 < K2; ++i2) out[i1 + K1 * i2] = res[i2];
            }
        }
        return out;
    }

    Vec poisson_dense_1d(const SpdField<Scalar>& chi, const Vec& rhs) const {
        Mat P = D_[0] * chi.a11.asDiagonal() * D_[0];
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(P);
        cod.setThreshold(1e-10);
        return cod.solve((-rhs).eval());
    }

    // Conjugate gradients on -div(chi grad .), which is symmetric positive
    // semidefinite; the right hand side is mean free so iterates stay in the
    // solvable subspace.
    Vec poisson_cg(const SpdField<Scalar>& chi, const Vec& rhs) const {
        Vec x = Vec::Zero(total_);
        Vec r = rhs; // b - A x with x = 0, A = -div(chi grad .)
        Vec p = r;
        Scalar rs = r.squaredNorm();
        const Scalar b2 = rs;
        if (b2 == Scalar(0)) return x;
        const long maxit = 20L * total_;
        for (long it = 0; it < maxit; ++it) {
            Vec Ap = -apply_weighted_laplacian(chi, p);
            const Scalar pAp = p.dot(Ap);
            if (!(pAp > Scalar(0))) break;
            const Scalar alpha = rs / pAp;
            x += alpha * p;
            r -= alpha * Ap;
            const Scalar rs_new = r.squaredNorm();
            if (rs_new <= Scalar(1e-28) * b2) break;
            p = r + (rs_new / rs) * p;
            rs = rs_new;
        }
        return x;
    }

    int n_;
    std::array<int, 2> K_{1, 1};
    std::array<double, 2> L_{1.0, 1.0};
    long total_ = 0;
    std::array<Mat, 2> D_;
};

using Angular = AngularGrid<double>;
using Spatial = SpatialGrid<double>;
using Weight = SpdField<double>;

} // namespace slowfast
