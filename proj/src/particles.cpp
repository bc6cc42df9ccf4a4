#include "slowfast/particles.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "slowfast/errors.hpp"
#include "slowfast/parallel.hpp"

namespace slowfast {

namespace {

double wrap_angle(double x) {
    double y = std::remainder(x, kTwoPi);
    if (y <= -kPi) y += kTwoPi;
    return y;
}

double wrap_box(double x, double box) {
    double y = x - box * std::floor(x / box);
    if (y >= box) y -= box;
    if (y < 0.0) y = 0.0;
    return y;
}

double min_image(double d, double box) {
    return d - box * std::nearbyint(d / box);
}

double dt_cap(double stiffness, double vmax, double eps, double R) {
    double cap = std::numeric_limits<double>::infinity();
    if (stiffness > 0.0) cap = std::min(cap, 1.0 / stiffness);
    const double speed = std::abs(eps) * vmax;
    if (speed > 0.0 && std::isfinite(R)) cap = std::min(cap, R / speed);
    return 0.1 * cap;
}

// Cells of edge >= R so that every neighbor of a particle lives in the
// particle's own cell or one of the adjacent ones.
struct CellList {
    int dim = 1;
    int nc[2] = {1, 1};
    double edge[2] = {1.0, 1.0};
    std::vector<std::vector<long>> members;

    CellList(const Eigen::MatrixXd& pos, double R, double box, int n) {
        dim = n;
        for (int d = 0; d < n; ++d) {
            int c = 1;
            if (std::isfinite(R) && R > 0.0 && R < box)
                c = std::max(1, static_cast<int>(std::floor(box / R)));
            nc[d] = c;
            edge[d] = box / c;
        }
        members.assign(static_cast<size_t>(nc[0]) *
                           (dim == 2 ? static_cast<size_t>(nc[1]) : 1),
                       {});
        for (long i = 0; i < pos.rows(); ++i)
            members[cell_of(pos, i)].push_back(i);
    }

    size_t cell_of(const Eigen::MatrixXd& pos, long i) const {
        int idx[2] = {0, 0};
        for (int d = 0; d < dim; ++d)
            idx[d] = std::min(nc[d] - 1,
                              static_cast<int>(pos(i, d) / edge[d]));
        return static_cast<size_t>(idx[0]) +
               static_cast<size_t>(nc[0]) * static_cast<size_t>(idx[1]);
    }

    // Unique cell indices adjacent to (and including) the cell of particle i.
    void neighbors_of(const Eigen::MatrixXd& pos, long i,
                      std::vector<size_t>& out) const {
        out.clear();
        int idx[2] = {0, 0};
        for (int d = 0; d < dim; ++d)
            idx[d] = std::min(nc[d] - 1,
                              static_cast<int>(pos(i, d) / edge[d]));
        int ux[3], uy[3];
        const int nx = unique_line(idx[0], nc[0], ux);
        int ny = 1;
        uy[0] = 0;
        if (dim == 2) ny = unique_line(idx[1], nc[1], uy);
        for (int b = 0; b < ny; ++b)
            for (int a = 0; a < nx; ++a)
                out.push_back(static_cast<size_t>(ux[a]) +
                              static_cast<size_t>(nc[0]) *
                                  static_cast<size_t>(uy[b]));
    }

    static int unique_line(int c, int n, int out[3]) {
        int cnt = 0;
        for (int off = -1; off <= 1; ++off) {
            const int v = ((c + off) % n + n) % n;
            bool seen = false;
            for (int a = 0; a < cnt; ++a)
                if (out[a] == v) seen = true;
            if (!seen) out[cnt++] = v;
        }
        return cnt;
    }
};

struct BlockStat {
    double mean = 0.0;
    double se = 0.0;
};

// Mean of per-block values with a bootstrap error bar. Deterministic:
// the resampling uses its own fixed-seed counter stream.
BlockStat bootstrap_mean(const std::vector<double>& blocks,
                         std::uint64_t stream) {
    BlockStat st;
    const size_t B = blocks.size();
    if (B == 0) return st;
    double m = 0.0;
    for (double v : blocks) m += v;
    m /= static_cast<double>(B);
    st.mean = m;
    if (B < 2) return st;
    const CounterRng rng(0x9D2C5681u);
    const int reps = 256;
    // Resampled means are centered at the full mean before the spread is
    // accumulated, so identical blocks give an exactly zero error bar.
    double acc = 0.0, acc2 = 0.0;
    for (int r = 0; r < reps; ++r) {
        double rm = 0.0;
        for (size_t b = 0; b < B; ++b) {
            const double u = rng.uniform(stream, static_cast<std::uint64_t>(r),
                                         static_cast<std::uint64_t>(b));
            const size_t pick = std::min(
                B - 1, static_cast<size_t>(u * static_cast<double>(B)));
            rm += blocks[pick] - m;
        }
        rm /= static_cast<double>(B);
        acc += rm;
        acc2 += rm * rm;
    }
    const double bm = acc / reps;
    st.se = std::sqrt(std::max(0.0, acc2 / reps - bm * bm));
    return st;
}

void validate_sim_config(const SimConfig& cfg) {
    if (cfg.N < 1) throw ConfigError("particle count N must be at least 1");
    if (!(cfg.box > 0.0)) throw ConfigError("box length must be positive");
    if (!(cfg.R > 0.0)) throw ConfigError("interaction radius R must be positive");
    if (!(cfg.dt > 0.0)) throw ConfigError("time step dt must be positive");
    if (!(cfg.T > 0.0)) throw ConfigError("horizon T must be positive");
    if (cfg.burn_in < 0.0) throw ConfigError("burn_in must be nonnegative");
    if (cfg.sample_stride < 1) throw ConfigError("sample_stride must be at least 1");
    if (cfg.blocks < 2) throw ConfigError("blocks must be at least 2");
    if (cfg.max_mode < 1) throw ConfigError("max_mode must be at least 1");
}

} // namespace

TrigSeries::TrigSeries(const Eigen::VectorXd& samples, double drop_tol) {
    const int M = static_cast<int>(samples.size());
    if (M < 4 || M % 2 != 0)
        throw ConfigError("trig series needs an even sample count >= 4");
    half_ = M / 2;
    a0_ = samples.mean();
    double nyq = 0.0;
    for (int j = 0; j < M; ++j)
        nyq += (j % 2 == 0 ? samples[j] : -samples[j]);
    nyq /= M;

    std::vector<double> ac(static_cast<size_t>(half_ - 1));
    std::vector<double> as(static_cast<size_t>(half_ - 1));
    double mag_max = std::max(std::abs(a0_), std::abs(nyq));
    for (int k = 1; k < half_; ++k) {
        double ca = 0.0, sa = 0.0;
        for (int j = 0; j < M; ++j) {
            const double ph = kTwoPi * k * j / M;
            ca += samples[j] * std::cos(ph);
            sa += samples[j] * std::sin(ph);
        }
        ca *= 2.0 / M;
        sa *= 2.0 / M;
        ac[static_cast<size_t>(k - 1)] = ca;
        as[static_cast<size_t>(k - 1)] = sa;
        mag_max = std::max(mag_max, std::hypot(ca, sa));
    }
    const double cut = drop_tol * mag_max;
    for (int k = 1; k < half_; ++k) {
        const double ca = ac[static_cast<size_t>(k - 1)];
        const double sa = as[static_cast<size_t>(k - 1)];
        if (std::hypot(ca, sa) > cut) {
            kc_.push_back(k);
            ac_.push_back(ca);
            as_.push_back(sa);
        }
    }
    nyquist_ = std::abs(nyq) > cut ? nyq : 0.0;
}

double TrigSeries::operator()(double theta) const {
    double v = a0_;
    for (size_t m = 0; m < kc_.size(); ++m) {
        const double ph = kc_[m] * theta;
        v += ac_[m] * std::cos(ph) + as_[m] * std::sin(ph);
    }
    if (nyquist_ != 0.0) v += nyquist_ * std::cos(half_ * theta);
    return v;
}

TrigSeries TrigSeries::derivative() const {
    TrigSeries d;
    d.half_ = half_;
    d.a0_ = 0.0;
    d.nyquist_ = 0.0;
    d.kc_ = kc_;
    d.ac_.resize(ac_.size());
    d.as_.resize(as_.size());
    for (size_t m = 0; m < kc_.size(); ++m) {
        d.ac_[m] = kc_[m] * as_[m];
        d.as_[m] = -kc_[m] * ac_[m];
    }
    return d;
}

double TrigSeries::sup_abs() const {
    const int probes = std::max(1024, 8 * half_);
    double s = 0.0;
    for (int j = 0; j < probes; ++j)
        s = std::max(s, std::abs((*this)(kTwoPi * j / probes)));
    return s;
}

ParticleModel build_particle_model(const ModelSpec& spec, int table_size) {
    if (spec.n < 1 || spec.n > 2)
        throw ConfigError("model dimension n must be 1 or 2");
    if (table_size < 8 || table_size % 2 != 0)
        throw ConfigError("particle table size must be even and >= 8");

    ParticleModel pm;
    pm.n = spec.n;
    pm.epsilon = spec.epsilon;
    pm.Gamma = spec.Gamma;
    pm.V.assign(static_cast<size_t>(spec.n), nullptr);
    for (int d = 0; d < spec.n && d < static_cast<int>(spec.V.size()); ++d)
        pm.V[static_cast<size_t>(d)] = spec.V[static_cast<size_t>(d)];

    const int M = table_size;
    Eigen::VectorXd ueff(M);
    for (int j = 0; j < M; ++j) {
        const double th = kTwoPi * j / M;
        const double g = spec.Gamma ? spec.Gamma(th) : 1.0;
        if (!(g > 0.0))
            throw ConfigError("Gamma must be positive, found " +
                              std::to_string(g) + " at theta " +
                              std::to_string(th));
        ueff[j] = (spec.U ? spec.U(th) : 0.0) - std::log(g);
    }
    const TrigSeries ueff_series(ueff);
    pm.ueff_prime = ueff_series.derivative();
    pm.tilt = spec.tilt;
    const TrigSeries ueff_second = pm.ueff_prime.derivative();

    double stiff = 0.0;
    double vmax = 0.0;
    const int probes = 4 * M;
    for (int j = 0; j < probes; ++j) {
        const double th = kTwoPi * j / probes;
        const double g = spec.Gamma ? spec.Gamma(th) : 1.0;
        stiff = std::max(stiff, std::abs(g * ueff_second(th)));
        for (int d = 0; d < spec.n; ++d)
            if (pm.V[static_cast<size_t>(d)])
                vmax = std::max(vmax,
                                std::abs(pm.V[static_cast<size_t>(d)](th)));
    }
    pm.drift_stiffness = stiff;
    pm.vmax = vmax;

    pm.has_interaction = static_cast<bool>(spec.Wpair) && spec.coupling != 0.0;
    if (pm.has_interaction) {
        // The neighbor force is evaluated as F(theta_i - theta_j), which
        // requires W(a, b) = w(a - b). Verify on a coarse probe grid.
        double scale = 0.0, gap = 0.0;
        const int P = 24;
        for (int a = 0; a < P; ++a)
            for (int b = 0; b < P; ++b) {
                const double ta = kTwoPi * a / P, tb = kTwoPi * b / P;
                const double w = spec.Wpair(ta, tb);
                scale = std::max(scale, std::abs(w));
                gap = std::max(gap, std::abs(w - spec.Wpair(ta - tb, 0.0)));
            }
        if (gap > 1e-10 * std::max(1.0, scale))
            throw ConfigError(
                "particle simulator needs a difference pair potential "
                "W(a, b) = w(a - b); probe gap " +
                std::to_string(gap));
        Eigen::VectorXd w(M);
        for (int j = 0; j < M; ++j)
            w[j] = spec.coupling * spec.Wpair(kTwoPi * j / M, 0.0);
        pm.force = TrigSeries(w).derivative();
    }
    return pm;
}

double dt_max(const ParticleModel& model, double R) {
    return dt_cap(model.drift_stiffness, model.vmax, model.epsilon, R);
}

ParticleState init_uniform(const ParticleModel& model, long N, double R,
                           double box, std::uint64_t seed) {
    if (N < 1) throw ConfigError("particle count N must be at least 1");
    if (!(box > 0.0)) throw ConfigError("box length must be positive");
    if (!(R > 0.0)) throw ConfigError("interaction radius R must be positive");
    ParticleState st;
    st.positions.resize(N, model.n);
    st.angles.resize(N);
    st.epsilon = model.epsilon;
    st.R = R;
    st.box = box;
    st.rng_seed = seed;
    const CounterRng rng(seed);
    for (long i = 0; i < N; ++i) {
        const std::uint64_t ui = static_cast<std::uint64_t>(i);
        st.angles[i] = wrap_angle(-kPi + kTwoPi * rng.uniform(0, ui, 0));
        for (int d = 0; d < model.n; ++d)
            st.positions(i, d) =
                box * rng.uniform(0, ui, 1 + static_cast<std::uint64_t>(d));
    }
    st.unwrapped = st.positions;
    return st;
}

void step(ParticleState& st, const ParticleModel& pm, double dt) {
    const long N = st.count();
    const int n = pm.n;
    if (st.positions.cols() != n || st.angles.size() != N ||
        st.unwrapped.rows() != N || st.unwrapped.cols() != n)
        throw ConfigError("particle state arrays have inconsistent shapes");
    if (!(dt > 0.0)) throw ConfigError("particle step dt must be positive");
    const double cap =
        dt_cap(pm.drift_stiffness, pm.vmax, st.epsilon, st.R);
    if (dt > cap * (1.0 + 1e-12))
        throw ConfigError("dt " + std::to_string(dt) +
                          " exceeds dt_max " + std::to_string(cap));

    const CounterRng rng(st.rng_seed);
    const std::uint64_t sidx = st.step_index + 1;
    const double Reff2 = st.R * st.R;

    std::vector<CellList> cl;
    // The neighbor sum of F(theta_i - theta_j) expands through the force
    // modes into products of per-particle cos/sin tables, so the pair loop
    // below touches no trigonometry.
    std::vector<int> fmk;
    std::vector<double> fma, fmb;
    Eigen::MatrixXd ctab, stab;
    if (pm.has_interaction) {
        cl.emplace_back(st.positions, st.R, st.box, n);
        fmk = pm.force.mode_numbers();
        fma = pm.force.cos_coeffs();
        fmb = pm.force.sin_coeffs();
        if (pm.force.nyquist_coeff() != 0.0) {
            fmk.push_back(pm.force.grid_half());
            fma.push_back(pm.force.nyquist_coeff());
            fmb.push_back(0.0);
        }
        const int nm = static_cast<int>(fmk.size());
        ctab.resize(nm, N);
        stab.resize(nm, N);
        parallel_for(N, [&](long j) {
            for (int m = 0; m < nm; ++m) {
                const double ph = fmk[static_cast<size_t>(m)] * st.angles[j];
                ctab(m, j) = std::cos(ph);
                stab(m, j) = std::sin(ph);
            }
        });
    }
    const int FM = static_cast<int>(fmk.size());

    Eigen::VectorXd dtheta(N);
    Eigen::MatrixXd dq(N, n);
    parallel_for(N, [&](long i) {
        const double thi = st.angles[i];
        const double gam = pm.gamma(thi);
        double drift = -gam * (pm.ueff_prime(thi) + pm.tilt);
        if (pm.has_interaction) {
            thread_local std::vector<size_t> cand;
            thread_local std::vector<double> Sc, Ss;
            cl[0].neighbors_of(st.positions, i, cand);
            Sc.assign(static_cast<size_t>(FM), 0.0);
            Ss.assign(static_cast<size_t>(FM), 0.0);
            long cnt = 0;
            for (size_t c : cand)
                for (long j : cl[0].members[c]) {
                    double r2 = 0.0;
                    for (int d = 0; d < n; ++d) {
                        const double dd = min_image(
                            st.positions(i, d) - st.positions(j, d), st.box);
                        r2 += dd * dd;
                    }
                    if (r2 <= Reff2) {
                        ++cnt;
                        for (int m = 0; m < FM; ++m) {
                            Sc[static_cast<size_t>(m)] += ctab(m, j);
                            Ss[static_cast<size_t>(m)] += stab(m, j);
                        }
                    }
                }
            double fsum = pm.force.constant() * static_cast<double>(cnt);
            for (int m = 0; m < FM; ++m)
                fsum += fma[static_cast<size_t>(m)] *
                            (ctab(m, i) * Sc[static_cast<size_t>(m)] +
                             stab(m, i) * Ss[static_cast<size_t>(m)]) +
                        fmb[static_cast<size_t>(m)] *
                            (stab(m, i) * Sc[static_cast<size_t>(m)] -
                             ctab(m, i) * Ss[static_cast<size_t>(m)]);
            drift -= gam * fsum / static_cast<double>(cnt);
        }
        dtheta[i] = drift * dt +
                    std::sqrt(2.0 * gam * dt) * rng.normal(sidx, static_cast<std::uint64_t>(i), 0);
        for (int d = 0; d < n; ++d) {
            const auto& Vd = pm.V[static_cast<size_t>(d)];
            dq(i, d) = st.epsilon * (Vd ? Vd(thi) : 0.0) * dt;
        }
    });

    for (long i = 0; i < N; ++i) {
        st.angles[i] = wrap_angle(st.angles[i] + dtheta[i]);
        for (int d = 0; d < n; ++d) {
            st.positions(i, d) = wrap_box(st.positions(i, d) + dq(i, d), st.box);
            st.unwrapped(i, d) += dq(i, d);
        }
    }
    st.step_index = sidx;
    st.time += dt;
}

TransportEstimate estimate_transport(const ParticleModel& pm,
                                     const SimConfig& cfg) {
    validate_sim_config(cfg);
    const int n = pm.n;
    ParticleState st = init_uniform(pm, cfg.N, cfg.R, cfg.box, cfg.seed);

    const long burn_steps = std::llround(cfg.burn_in / cfg.dt);
    for (long s = 0; s < burn_steps; ++s) step(st, pm, cfg.dt);

    const long main_steps =
        std::max<long>(cfg.blocks * cfg.sample_stride,
                       std::llround(cfg.T / cfg.dt));
    const Eigen::MatrixXd base = st.unwrapped;
    const double t0 = st.time;
    const double eps2 = st.epsilon * st.epsilon;

    std::vector<double> taus;
    std::vector<Eigen::MatrixXd> covs;   // n x n per sample
    std::vector<Eigen::VectorXd> vbars;  // n per sample
    taus.reserve(static_cast<size_t>(main_steps / cfg.sample_stride) + 2);

    auto record = [&]() {
        Eigen::VectorXd vbar = Eigen::VectorXd::Zero(n);
        for (long i = 0; i < cfg.N; ++i)
            for (int d = 0; d < n; ++d) {
                const auto& Vd = pm.V[static_cast<size_t>(d)];
                vbar[d] += Vd ? Vd(st.angles[i]) : 0.0;
            }
        vbar /= static_cast<double>(cfg.N);
        vbars.push_back(vbar);

        Eigen::MatrixXd X = st.unwrapped - base;
        const Eigen::RowVectorXd xm = X.colwise().mean();
        X.rowwise() -= xm;
        Eigen::MatrixXd C = X.transpose() * X;
        C /= static_cast<double>(std::max<long>(1, cfg.N - 1));
        covs.push_back(C);
        taus.push_back(eps2 * (st.time - t0));
    };

    record();
    for (long s = 0; s < main_steps; ++s) {
        step(st, pm, cfg.dt);
        if ((s + 1) % cfg.sample_stride == 0 || s + 1 == main_steps) record();
    }

    const long S = static_cast<long>(taus.size());
    const int B = cfg.blocks;
    if (S < 2 * B)
        throw InsufficientSamples("recorded " + std::to_string(S) +
                                  " samples, need at least " +
                                  std::to_string(2 * B));

    TransportEstimate out;
    out.samples = S;
    out.slow_window = taus.back() - taus.front();
    out.drift.resize(n);
    out.drift_se.resize(n);
    out.diffusivity.resize(n, n);
    out.diffusivity_se.resize(n, n);

    // Block boundaries over the sample index range; sample 0 is the
    // reference point and excluded from the drift average.
    auto edge = [&](int b) {
        return 1 + static_cast<long>((S - 1) * static_cast<double>(b) / B);
    };

    for (int d = 0; d < n; ++d) {
        std::vector<double> blocks(static_cast<size_t>(B));
        for (int b = 0; b < B; ++b) {
            double m = 0.0;
            long c = 0;
            for (long s = edge(b); s < edge(b + 1); ++s, ++c)
                m += vbars[static_cast<size_t>(s)][d];
            blocks[static_cast<size_t>(b)] = m / std::max<long>(1, c);
        }
        const BlockStat bs =
            bootstrap_mean(blocks, 0x1000u + static_cast<std::uint64_t>(d));
        out.drift[d] = bs.mean;
        out.drift_se[d] = bs.se;
    }

    for (int a = 0; a < n; ++a)
        for (int b2 = 0; b2 < n; ++b2) {
            std::vector<double> blocks(static_cast<size_t>(B));
            for (int b = 0; b < B; ++b) {
                const long s0 = edge(b) - 1, s1 = edge(b + 1) - 1;
                const double dtau =
                    taus[static_cast<size_t>(s1)] - taus[static_cast<size_t>(s0)];
                const double dcov = covs[static_cast<size_t>(s1)](a, b2) -
                                    covs[static_cast<size_t>(s0)](a, b2);
                blocks[static_cast<size_t>(b)] =
                    dtau > 0.0 ? 0.5 * dcov / dtau : 0.0;
            }
            const BlockStat bs = bootstrap_mean(
                blocks, 0x2000u + static_cast<std::uint64_t>(2 * a + b2));
            out.diffusivity(a, b2) = bs.mean;
            out.diffusivity_se(a, b2) = bs.se;
        }

    if (std::isfinite(cfg.tolerance)) {
        const double vscale = std::max(pm.vmax, 1e-12);
        for (int d = 0; d < n; ++d)
            if (out.drift_se[d] > cfg.tolerance * vscale)
                throw InsufficientSamples(
                    "drift error bar " + std::to_string(out.drift_se[d]) +
                    " exceeds tolerance " +
                    std::to_string(cfg.tolerance * vscale));
        for (int d = 0; d < n; ++d) {
            const double scale = std::abs(out.diffusivity(d, d)) + 1e-12;
            if (out.diffusivity_se(d, d) > cfg.tolerance * scale)
                throw InsufficientSamples(
                    "diffusivity error bar " +
                    std::to_string(out.diffusivity_se(d, d)) +
                    " exceeds tolerance " +
                    std::to_string(cfg.tolerance * scale));
        }
    }
    return out;
}

FluctuationReport fluctuation_spectrum(const ParticleModel& pm,
                                       const SimConfig& cfg) {
    validate_sim_config(cfg);
    const int n = pm.n;
    ParticleState st = init_uniform(pm, cfg.N, cfg.R, cfg.box, cfg.seed);

    const long burn_steps = std::llround(cfg.burn_in / cfg.dt);
    for (long s = 0; s < burn_steps; ++s) step(st, pm, cfg.dt);

    const long main_steps =
        std::max<long>(cfg.blocks * cfg.sample_stride,
                       std::llround(cfg.T / cfg.dt));

    struct Mode {
        std::array<int, 2> k;
        int axis;
        int m;
    };
    std::vector<Mode> modes;
    for (int axis = 0; axis < n; ++axis)
        for (int m = 1; m <= cfg.max_mode; ++m) {
            Mode md;
            md.k = {axis == 0 ? m : 0, axis == 0 ? 0 : m};
            md.axis = axis;
            md.m = m;
            modes.push_back(md);
        }

    const double w = kTwoPi / cfg.box;
    std::vector<std::vector<std::complex<double>>> series(
        modes.size());

    auto record = [&]() {
        for (size_t mi = 0; mi < modes.size(); ++mi) {
            const Mode& md = modes[mi];
            std::complex<double> acc(0.0, 0.0);
            for (long i = 0; i < cfg.N; ++i) {
                const double ph = -w * md.m * st.positions(i, md.axis);
                acc += std::complex<double>(std::cos(ph), std::sin(ph));
            }
            series[mi].push_back(acc / static_cast<double>(cfg.N));
        }
    };

    for (long s = 0; s < main_steps; ++s) {
        step(st, pm, cfg.dt);
        if ((s + 1) % cfg.sample_stride == 0) record();
    }

    const long S = static_cast<long>(series.empty() ? 0 : series[0].size());
    const int B = cfg.blocks;
    if (S < 2 * B)
        throw InsufficientSamples("recorded " + std::to_string(S) +
                                  " samples, need at least " +
                                  std::to_string(2 * B));

    FluctuationReport out;
    out.samples = S;
    auto edge = [&](int b) {
        return static_cast<long>(S * static_cast<double>(b) / B);
    };

    for (size_t mi = 0; mi < modes.size(); ++mi) {
        std::complex<double> mean(0.0, 0.0);
        for (const auto& z : series[mi]) mean += z;
        mean /= static_cast<double>(S);

        std::vector<double> blocks(static_cast<size_t>(B));
        for (int b = 0; b < B; ++b) {
            double m2 = 0.0;
            long c = 0;
            for (long s = edge(b); s < edge(b + 1); ++s, ++c)
                m2 += std::norm(series[mi][static_cast<size_t>(s)] - mean);
            blocks[static_cast<size_t>(b)] = m2 / std::max<long>(1, c);
        }
        const BlockStat bs =
            bootstrap_mean(blocks, 0x3000u + static_cast<std::uint64_t>(mi));

        ModeVariance mv;
        mv.k = modes[mi].k;
        mv.variance = bs.mean;
        mv.se = bs.se;
        if (std::isfinite(cfg.tolerance) &&
            mv.se > cfg.tolerance * (mv.variance + 1e-300))
            throw InsufficientSamples(
                "mode variance error bar " + std::to_string(mv.se) +
                " exceeds tolerance at mode (" + std::to_string(mv.k[0]) +
                ", " + std::to_string(mv.k[1]) + ")");
        out.modes.push_back(mv);
    }
    return out;
}

} // namespace slowfast
