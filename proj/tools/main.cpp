#include <chrono>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slowfast/acceptance.hpp"
#include "slowfast/coeffs.hpp"
#include "slowfast/config.hpp"
#include "slowfast/equilibrium.hpp"
#include "slowfast/errors.hpp"
#include "slowfast/kinetic.hpp"
#include "slowfast/particles.hpp"
#include "slowfast/ratefunc.hpp"
#include "slowfast/report.hpp"

using namespace slowfast;

namespace {

// ---- config schema -------------------------------------------------------

const std::vector<std::string> kSections = {
    "model", "grid", "equilibrium", "ops", "coeffs",
    "kinetic", "rate", "sweep", "particles"};

const std::vector<std::string> kKnownKeys = {
    "model.preset", "model.dim", "model.epsilon", "model.coupling",
    "model.interaction_radius", "model.tilt", "model.u_const", "model.u_cos",
    "model.u_sin", "model.loggamma_const", "model.loggamma_cos",
    "model.loggamma_sin", "model.w_cos", "model.w_sin", "model.v1_const",
    "model.v1_cos", "model.v1_sin", "model.v2_const", "model.v2_cos",
    "model.v2_sin",
    "grid.m", "grid.k", "grid.length",
    "equilibrium.tol", "equilibrium.max_iter",
    "ops.tol",
    "coeffs.tol_cell",
    "kinetic.frame", "kinetic.t", "kinetic.dt", "kinetic.scheme_order",
    "kinetic.snapshot_stride", "kinetic.rho_amp", "kinetic.rho_mode",
    "rate.epsilon", "rate.t", "rate.slices", "rate.amp", "rate.mode",
    "rate.decay",
    "sweep.eps", "sweep.t", "sweep.slices", "sweep.amp", "sweep.mode",
    "sweep.decay",
    "particles.n", "particles.r", "particles.epsilon", "particles.dt",
    "particles.t", "particles.burn_in", "particles.seed", "particles.box",
    "particles.sample_stride", "particles.blocks", "particles.tolerance",
    "particles.max_mode"};

void validate_schema(const Config& cfg) {
    for (const auto& [key, value] : cfg.entries()) {
        const std::string section = key.substr(0, key.find('.'));
        bool known_section = false;
        for (const auto& s : kSections) known_section |= (s == section);
        if (!known_section)
            throw ConfigError("unknown config section in key " + key);
    }
    cfg.require_known(kSections, kKnownKeys);
}

std::function<double(double)> trig_fn(double c0, std::vector<double> ac,
                                      std::vector<double> as) {
    return [c0, ac = std::move(ac), as = std::move(as)](double th) {
        double v = c0;
        for (size_t m = 0; m < ac.size(); ++m)
            v += ac[m] * std::cos((m + 1.0) * th);
        for (size_t m = 0; m < as.size(); ++m)
            v += as[m] * std::sin((m + 1.0) * th);
        return v;
    };
}

bool family_present(const Config& cfg, const std::string& stem) {
    return cfg.has("model." + stem + "_const") ||
           cfg.has("model." + stem + "_cos") ||
           cfg.has("model." + stem + "_sin");
}

std::function<double(double)> family_fn(const Config& cfg,
                                        const std::string& stem) {
    return trig_fn(cfg.get_double("model." + stem + "_const", 0.0),
                   cfg.get_double_list("model." + stem + "_cos", {}),
                   cfg.get_double_list("model." + stem + "_sin", {}));
}

ModelSpec model_from_config(const Config& cfg) {
    const std::string preset = cfg.get_string("model.preset", "custom");
    ModelSpec spec;
    if (preset == "free_abp") {
        spec = ModelSpec::free_abp(
            static_cast<int>(cfg.get_long("model.dim", 2)));
    } else if (preset == "von_mises") {
        spec = ModelSpec::von_mises();
    } else if (preset == "active_2d") {
        spec = ModelSpec::active_2d(cfg.get_double("model.coupling"));
    } else if (preset == "custom") {
        spec.name = "custom";
        spec.n = static_cast<int>(cfg.get_long("model.dim", 1));
        if (family_present(cfg, "u")) spec.U = family_fn(cfg, "u");
        if (family_present(cfg, "loggamma")) {
            auto lg = family_fn(cfg, "loggamma");
            spec.Gamma = [lg](double th) { return std::exp(lg(th)); };
        }
        if (family_present(cfg, "w")) {
            auto w = family_fn(cfg, "w");
            spec.Wpair = [w](double a, double b) { return w(a - b); };
        }
        if (!family_present(cfg, "v1"))
            throw ConfigError(
                "custom model needs a velocity: set model.v1_cos, "
                "model.v1_sin, or model.v1_const");
        spec.V.clear();
        spec.V.push_back(family_fn(cfg, "v1"));
        if (spec.n == 2) {
            if (!family_present(cfg, "v2"))
                throw ConfigError(
                    "model.dim = 2 needs a second velocity family "
                    "model.v2_*");
            spec.V.push_back(family_fn(cfg, "v2"));
        }
    } else {
        throw ConfigError("model.preset: unknown preset '" + preset +
                          "', expected free_abp, von_mises, active_2d, or "
                          "custom");
    }
    if (cfg.has("model.epsilon"))
        spec.epsilon = cfg.get_double("model.epsilon");
    if (cfg.has("model.coupling"))
        spec.coupling = cfg.get_double("model.coupling");
    if (cfg.has("model.interaction_radius"))
        spec.interaction_radius = cfg.get_double("model.interaction_radius");
    spec.tilt = cfg.get_double("model.tilt", 0.0);
    return spec;
}

// ---- shared pipeline pieces ----------------------------------------------

struct Resolved {
    Angular grid;
    SampledModel model;
    EquilibriumState eq;
};

Resolved resolve_equilibrium(const Config& cfg) {
    Resolved r{Angular(static_cast<int>(cfg.get_long("grid.m", 128))), {}, {}};
    r.model = sample_model(r.grid, model_from_config(cfg));
    EquilibriumOptions opts;
    opts.tol_eq = cfg.get_double("equilibrium.tol", 1e-9);
    opts.max_iter = static_cast<int>(cfg.get_long("equilibrium.max_iter", 10000));
    r.eq = solve_equilibrium(r.grid, r.model, opts);
    return r;
}

Spatial spatial_from_config(const Config& cfg, int n) {
    const int k = static_cast<int>(cfg.get_long("grid.k", 64));
    const double L = cfg.get_double("grid.length", kTwoPi);
    return n == 2 ? Spatial::square(k, L) : Spatial::line(k, L);
}

nlohmann::json mat_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(encode_double(m(i, j)));
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json vec_json(const Eigen::VectorXd& v) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        row.push_back(encode_double(v(i)));
    return row;
}

struct RunContext {
    Config cfg;
    RunManifest manifest;
    std::filesystem::path out_dir;

    std::string path_of(const std::string& name) {
        manifest.outputs.push_back(name);
        return (out_dir / name).string();
    }
    void emit_json(const std::string& name, nlohmann::json j) {
        write_json(path_of(name), j);
    }
    void emit_csv(const std::string& name,
                  const std::vector<std::string>& header,
                  const std::vector<std::vector<double>>& rows) {
        write_csv(path_of(name), manifest, header, rows);
    }
};

// Time-sliced profile 1 + amp cos(mode 2 pi q0 / L) exp(-decay t) shared by
// the rate and sweep commands.
struct ProfileSpec {
    double horizon = 1.0;
    int slices = 25;
    double amp = 0.5;
    int mode = 1;
    double decay = 1.0;
};

ProfileSpec profile_from(const Config& cfg, const std::string& section) {
    ProfileSpec p;
    p.horizon = cfg.get_double(section + ".t", 1.0);
    p.slices = static_cast<int>(cfg.get_long(section + ".slices", 25));
    p.amp = cfg.get_double(section + ".amp", 0.5);
    p.mode = static_cast<int>(cfg.get_long(section + ".mode", 1));
    p.decay = cfg.get_double(section + ".decay", 1.0);
    if (p.slices < 3)
        throw ConfigError(section + ".slices: need at least 3 time slices");
    return p;
}

std::vector<double> profile_times(const ProfileSpec& p) {
    std::vector<double> t(static_cast<size_t>(p.slices));
    for (int s = 0; s < p.slices; ++s)
        t[static_cast<size_t>(s)] = p.horizon * s / (p.slices - 1);
    return t;
}

std::vector<Eigen::VectorXd> profile_slices(const Spatial& sg,
                                            const ProfileSpec& p,
                                            const std::vector<double>& times) {
    const double w = p.mode * kTwoPi / sg.length(0);
    std::vector<Eigen::VectorXd> rho;
    rho.reserve(times.size());
    for (double t : times) {
        Eigen::VectorXd r(sg.size());
        for (long x = 0; x < sg.size(); ++x)
            r(x) = 1.0 + p.amp * std::cos(w * sg.coords(x)[0]) *
                             std::exp(-p.decay * t);
        rho.push_back(std::move(r));
    }
    return rho;
}

// ---- subcommand handlers -------------------------------------------------

void run_equilibrium(RunContext& ctx) {
    Resolved r = resolve_equilibrium(ctx.cfg);
    auto j = report_envelope("equilibrium", ctx.manifest);
    j["residual"] = encode_double(r.eq.residual);
    j["iterations"] = r.eq.iterations;
    j["mean_drift"] = encode_double(r.eq.mean_drift);
    j["contraction_estimate"] = encode_double(r.eq.contraction_estimate);
    j["noncontractive"] = r.eq.noncontractive;
    j["lower_bound"] = encode_double(r.eq.lower_bound);
    j["upper_bound"] = encode_double(r.eq.upper_bound);
    ctx.emit_json("equilibrium.json", j);

    std::vector<std::vector<double>> rows;
    for (int i = 0; i < r.grid.size(); ++i)
        rows.push_back({r.grid.node(i), r.eq.G(i), r.eq.H(i)});
    ctx.emit_csv("equilibrium.csv", {"theta", "G", "H"}, rows);
}

void run_ops(RunContext& ctx) {
    Resolved r = resolve_equilibrium(ctx.cfg);
    LinearizedOps ops = assemble_linearized(r.grid, r.model, r.eq,
                                            ctx.cfg.get_double("ops.tol", 1e-8));
    auto j = report_envelope("linearized_ops", ctx.manifest);
    j["kappa_margin"] = encode_double(ops.kappa_margin);
    j["adjointness_gap"] = encode_double(ops.adjointness_gap);
    j["kernel_dim_L"] = ops.kernel_dim_L;
    j["kernel_dim_Ladj"] = ops.kernel_dim_Ladj;
    j["tol_op"] = encode_double(ops.tol_op);
    ctx.emit_json("ops.json", j);

    // Spectrum on the resolved subspace, sorted by descending real part.
    Eigen::MatrixXd Lr = ops.Qres.transpose() * ops.L * ops.Qres;
    Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(Lr).eigenvalues();
    std::vector<std::pair<double, double>> vals;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        vals.emplace_back(ev(i).real(), ev(i).imag());
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < vals.size(); ++i)
        rows.push_back({static_cast<double>(i), vals[i].first, vals[i].second});
    ctx.emit_csv("spectrum.csv", {"index", "real", "imag"}, rows);
}

void run_coeffs(RunContext& ctx) {
    Resolved r = resolve_equilibrium(ctx.cfg);
    LinearizedOps ops = assemble_linearized(r.grid, r.model, r.eq,
                                            ctx.cfg.get_double("ops.tol", 1e-8));
    CoefficientSet cs =
        solve_coefficients(r.grid, r.model, r.eq, ops,
                           ctx.cfg.get_double("coeffs.tol_cell", 1e-9));
    auto j = report_envelope("coefficients", ctx.manifest);
    j["diffusivity"] = mat_json(cs.Dmat);
    j["mobility"] = mat_json(cs.Sigma);
    j["velocity_coupling"] = mat_json(cs.Emat);
    j["flux_gram"] = mat_json(cs.Rmat);
    j["max_cell_residual"] = encode_double(cs.max_cell_residual);
    j["kappa_margin"] = encode_double(ops.kappa_margin);
    j["mean_velocity"] = vec_json([&] {
        Eigen::VectorXd v(r.model.n);
        for (int k = 0; k < r.model.n; ++k)
            v(k) = weighted_mean(r.grid, r.eq.G, r.model.V.col(k));
        return v;
    }());
    ctx.emit_json("coeffs.json", j);

    std::vector<std::string> header = {"theta"};
    for (const char* stem : {"psi", "omega", "xi", "flux_potential"})
        for (int k = 0; k < r.model.n; ++k)
            header.push_back(std::string(stem) + std::to_string(k));
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < r.grid.size(); ++i) {
        std::vector<double> row = {r.grid.node(i)};
        for (const Eigen::MatrixXd* m :
             {&cs.psi, &cs.omega, &cs.xi, &cs.flux_potential})
            for (int k = 0; k < r.model.n; ++k) row.push_back((*m)(i, k));
        rows.push_back(std::move(row));
    }
    ctx.emit_csv("coeffs.csv", header, rows);
}

void run_rate(RunContext& ctx) {
    Resolved r = resolve_equilibrium(ctx.cfg);
    LinearizedOps ops = assemble_linearized(r.grid, r.model, r.eq,
                                            ctx.cfg.get_double("ops.tol", 1e-8));
    CoefficientSet cs =
        solve_coefficients(r.grid, r.model, r.eq, ops,
                           ctx.cfg.get_double("coeffs.tol_cell", 1e-9));
    Spatial sg = spatial_from_config(ctx.cfg, r.model.n);
    const double eps = ctx.cfg.get_double("rate.epsilon", r.model.epsilon);
    ProfileSpec p = profile_from(ctx.cfg, "rate");
    auto times = profile_times(p);
    auto rho = profile_slices(sg, p, times);

    RecoverySequence rec =
        build_recovery(r.grid, sg, r.model, r.eq, cs, times, rho, eps);
    DensityPath recovered = combined_path(rec);
    const double rate =
        rate_eps(r.grid, sg, r.model, r.eq, recovered, eps);
    const double lower =
        liminf_bound(r.grid, sg, r.model, r.eq, cs, recovered, eps);
    const double limit = rate_limit(r.grid, sg, r.eq, cs, rec.base);

    auto j = report_envelope("rate", ctx.manifest);
    j["epsilon"] = eps;
    j["rate"] = encode_double(rate);
    j["lower_bound"] = encode_double(lower);
    j["limit"] = encode_double(limit);
    ctx.emit_json("rate.json", j);
}

void run_sweep(RunContext& ctx) {
    Resolved r = resolve_equilibrium(ctx.cfg);
    LinearizedOps ops = assemble_linearized(r.grid, r.model, r.eq,
                                            ctx.cfg.get_double("ops.tol", 1e-8));
    CoefficientSet cs =
        solve_coefficients(r.grid, r.model, r.eq, ops,
                           ctx.cfg.get_double("coeffs.tol_cell", 1e-9));
    Spatial sg = spatial_from_config(ctx.cfg, r.model.n);
    ProfileSpec p = profile_from(ctx.cfg, "sweep");
    auto ladder =
        ctx.cfg.get_double_list("sweep.eps", {0.2, 0.1, 0.05});
    auto times = profile_times(p);
    auto rho = profile_slices(sg, p, times);

    GammaSweepReport rep =
        gamma_sweep(r.grid, sg, r.model, r.eq, cs, times, rho, ladder);
    auto j = report_envelope("gamma_sweep", ctx.manifest);
    j["limit"] = encode_double(rep.limit);
    j["fitted_order"] = encode_double(rep.fitted_order);
    ctx.emit_json("sweep.json", j);

    std::vector<std::vector<double>> rows;
    for (const auto& row : rep.rows)
        rows.push_back({row.epsilon, row.rate, row.lower_bound});
    ctx.emit_csv("sweep.csv", {"epsilon", "rate", "lower_bound"}, rows);
}

void run_kinetic(RunContext& ctx) {
    Resolved r = resolve_equilibrium(ctx.cfg);
    LinearizedOps ops = assemble_linearized(r.grid, r.model, r.eq,
                                            ctx.cfg.get_double("ops.tol", 1e-8));
    CoefficientSet cs =
        solve_coefficients(r.grid, r.model, r.eq, ops,
                           ctx.cfg.get_double("coeffs.tol_cell", 1e-9));
    Spatial sg = spatial_from_config(ctx.cfg, r.model.n);

    const std::string frame_name =
        ctx.cfg.get_string("kinetic.frame", "moving");
    Frame frame;
    if (frame_name == "lab")
        frame = Frame::lab;
    else if (frame_name == "moving")
        frame = Frame::moving;
    else
        throw ConfigError("kinetic.frame: expected lab or moving, got '" +
                          frame_name + "'");

    const double T = ctx.cfg.get_double("kinetic.t", 1.0);
    const double amp = ctx.cfg.get_double("kinetic.rho_amp", 0.5);
    const int mode = static_cast<int>(ctx.cfg.get_long("kinetic.rho_mode", 1));
    const double w = mode * kTwoPi / sg.length(0);
    const double eps = r.model.epsilon;

    double dt = ctx.cfg.get_double("kinetic.dt", 0.0);
    if (dt <= 0.0) {
        // Stability-guided default: spatial advection is the only explicit
        // piece, the angular stiffness is implicit.
        const double kmax = kTwoPi / sg.length(0) * (sg.count(0) / 2);
        const double vsup = r.model.V.cwiseAbs().maxCoeff() + 1e-12;
        const double dscale = std::max(cs.Dmat.diagonal().maxCoeff(), 1e-3);
        if (frame == Frame::moving)
            dt = std::min({0.15 / (kmax * kmax * dscale), 0.5 * eps * eps,
                           T / 64.0});
        else
            dt = std::min(0.5 / (kmax * vsup * std::max(eps, 1e-12)),
                          T / 64.0);
    }

    Field f0(r.grid.size(), sg.size());
    for (long x = 0; x < sg.size(); ++x)
        f0.col(x) =
            (1.0 + amp * std::cos(w * sg.coords(x)[0])) * r.eq.G;

    KineticOptions opts;
    opts.scheme_order =
        static_cast<int>(ctx.cfg.get_long("kinetic.scheme_order", 2));
    opts.snapshot_stride =
        static_cast<int>(ctx.cfg.get_long("kinetic.snapshot_stride", 16));
    KineticSolution sol =
        integrate_kinetic(r.grid, sg, r.model, r.eq, f0, T, dt, frame, opts);

    auto j = report_envelope("kinetic", ctx.manifest);
    j["frame"] = frame_name;
    j["dt"] = sol.dt;
    j["slices"] = sol.path.slices();
    j["mass_drift"] = encode_double(sol.mass_drift);
    j["min_value"] = encode_double(sol.min_value);
    j["max_value"] = encode_double(sol.max_value);
    j["clipped_mass"] = encode_double(sol.clipped_mass);
    ctx.emit_json("kinetic.json", j);

    // Lowest tracked spatial mode of the marginal, slice by slice.
    std::vector<std::vector<double>> rows;
    for (int s = 0; s < sol.path.slices(); ++s) {
        Eigen::VectorXd rho = angular_marginal(r.grid, sol.path.values[s]);
        std::complex<double> c(0.0, 0.0);
        for (long x = 0; x < sg.size(); ++x)
            c += rho(x) * std::exp(std::complex<double>(0.0, -w * sg.coords(x)[0]));
        c *= 2.0 / static_cast<double>(sg.size());
        rows.push_back({sol.path.times[s], std::abs(c), c.real(), c.imag(),
                        sg.quadrature(rho)});
    }
    ctx.emit_csv("kinetic.csv", {"t", "mode_abs", "mode_re", "mode_im", "mass"},
                 rows);
}

SimConfig sim_from_config(const Config& cfg) {
    SimConfig sim;
    sim.N = cfg.get_long("particles.n", 1000);
    sim.R = cfg.get_double("particles.r", 1.0);
    sim.box = cfg.get_double("particles.box", kTwoPi);
    sim.dt = cfg.get_double("particles.dt", 0.02);
    sim.T = cfg.get_double("particles.t", 100.0);
    sim.burn_in = cfg.get_double("particles.burn_in", 10.0);
    sim.seed = static_cast<std::uint64_t>(cfg.get_long("particles.seed", 1));
    sim.sample_stride = cfg.get_long("particles.sample_stride", 10);
    sim.blocks = static_cast<int>(cfg.get_long("particles.blocks", 8));
    sim.tolerance = cfg.get_double("particles.tolerance", kInfValue);
    sim.max_mode = static_cast<int>(cfg.get_long("particles.max_mode", 4));
    return sim;
}

ParticleModel particle_model_from(const Config& cfg) {
    ModelSpec spec = model_from_config(cfg);
    if (cfg.has("particles.epsilon"))
        spec.epsilon = cfg.get_double("particles.epsilon");
    return build_particle_model(spec);
}

void run_simulate(RunContext& ctx) {
    ParticleModel pm = particle_model_from(ctx.cfg);
    SimConfig sim = sim_from_config(ctx.cfg);
    ctx.manifest.seeds.push_back(sim.seed);
    TransportEstimate est = estimate_transport(pm, sim);

    auto j = report_envelope("transport", ctx.manifest);
    j["drift"] = vec_json(est.drift);
    j["drift_se"] = vec_json(est.drift_se);
    j["diffusivity"] = mat_json(est.diffusivity);
    j["diffusivity_se"] = mat_json(est.diffusivity_se);
    j["samples"] = est.samples;
    j["slow_window"] = encode_double(est.slow_window);
    ctx.emit_json("simulate.json", j);
}

void run_fluctuations(RunContext& ctx) {
    ParticleModel pm = particle_model_from(ctx.cfg);
    SimConfig sim = sim_from_config(ctx.cfg);
    ctx.manifest.seeds.push_back(sim.seed);
    FluctuationReport rep = fluctuation_spectrum(pm, sim);

    auto j = report_envelope("fluctuations", ctx.manifest);
    j["samples"] = rep.samples;
    nlohmann::json modes = nlohmann::json::array();
    std::vector<std::vector<double>> rows;
    for (const auto& m : rep.modes) {
        nlohmann::json one;
        one["k"] = {m.k[0], m.k[1]};
        one["variance"] = encode_double(m.variance);
        one["se"] = encode_double(m.se);
        modes.push_back(one);
        rows.push_back({static_cast<double>(m.k[0]),
                        static_cast<double>(m.k[1]), m.variance, m.se});
    }
    j["modes"] = modes;
    ctx.emit_json("fluctuations.json", j);
    ctx.emit_csv("fluctuations.csv", {"k1", "k2", "variance", "se"}, rows);
}

// Returns false when a criterion failed.
bool run_verify(RunContext& ctx) {
    auto results = run_acceptance_checks([](const CheckResult& r) {
        std::printf("%s\n", format_check_line(r).c_str());
        std::fflush(stdout);
    });
    auto j = report_envelope("verification", ctx.manifest);
    nlohmann::json table = nlohmann::json::array();
    double total = 0.0;
    for (const auto& r : results) {
        nlohmann::json row;
        row["id"] = r.id;
        row["name"] = r.name;
        row["pass"] = r.pass;
        row["detail"] = r.detail;
        row["seconds"] = r.seconds;
        table.push_back(row);
        total += r.seconds;
    }
    j["checks"] = table;
    j["total_seconds"] = total;
    j["all_passed"] = all_passed(results);
    ctx.emit_json("verify.json", j);
    std::printf("%s  total %.1f s\n",
                all_passed(results) ? "ALL CHECKS PASSED" : "CHECKS FAILED",
                total);
    return all_passed(results);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stationary mean field models with slow-fast transport: "
                 "equilibria, linearized operators, transport coefficients, "
                 "rate functionals, kinetic integration, and particle "
                 "simulation"};
    app.require_subcommand(1);

    struct SubSpec {
        const char* name;
        const char* desc;
        bool config_required;
    };
    const SubSpec subs[] = {
        {"equilibrium", "solve the stationary angular density", true},
        {"ops", "assemble the linearized operator and its certificates", true},
        {"coeffs", "solve the cell problems and transport matrices", true},
        {"rate", "evaluate the finite-epsilon rate of a recovery path", true},
        {"gamma-sweep", "rate ladder over epsilon with its limit", true},
        {"kinetic", "integrate the kinetic equation", true},
        {"simulate", "particle transport estimates", true},
        {"fluctuations", "particle density mode variances", true},
        {"verify-all", "run the full verification suite", false},
    };

    std::map<std::string, std::string> config_paths;
    std::map<std::string, std::string> out_dirs;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.desc);
        auto* opt = sub->add_option("-c,--config", config_paths[s.name],
                                    "configuration file");
        if (s.config_required) opt->required();
        sub->add_option("-o,--out", out_dirs[s.name],
                        "output directory (default .)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        RunContext ctx;
        const std::string& cpath = config_paths[name];
        ctx.cfg = cpath.empty() ? Config::parse_string("", "<none>")
                                : Config::parse_file(cpath);
        validate_schema(ctx.cfg);
        ctx.out_dir = out_dirs[name].empty() ? "." : out_dirs[name];
        std::filesystem::create_directories(ctx.out_dir);
        ctx.manifest = make_manifest(name, ctx.cfg);

        const auto start = std::chrono::steady_clock::now();
        bool ok = true;
        if (name == "equilibrium")
            run_equilibrium(ctx);
        else if (name == "ops")
            run_ops(ctx);
        else if (name == "coeffs")
            run_coeffs(ctx);
        else if (name == "rate")
            run_rate(ctx);
        else if (name == "gamma-sweep")
            run_sweep(ctx);
        else if (name == "kinetic")
            run_kinetic(ctx);
        else if (name == "simulate")
            run_simulate(ctx);
        else if (name == "fluctuations")
            run_fluctuations(ctx);
        else
            ok = run_verify(ctx);

        ctx.manifest.elapsed_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          start)
                .count();
        write_json((ctx.out_dir / "manifest.json").string(),
                   ctx.manifest.to_json());
        if (!ok) return 4;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const NoConvergence& e) {
        std::fprintf(stderr, "no convergence: %s\n", e.what());
        return 3;
    } catch (const StepUnstable& e) {
        std::fprintf(stderr, "unstable step: %s\n", e.what());
        return 3;
    } catch (const NonZeroMean& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const InsufficientSamples& e) {
        std::fprintf(stderr, "insufficient samples: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
