#include "mfdelay/runner.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mfdelay/log.hpp"
#include "mfdelay/parallel.hpp"
#include "mfdelay/recursive_utility.hpp"

namespace mfdelay {

namespace {

namespace fs = std::filesystem;

// Locale-independent shortest round-trip formatting keeps the CSV byte
// contract stable.
std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::string& header) : out_(path) {
        if (!out_) throw NumericError("cannot open output file " + path.string());
        out_ << header << "\n";
    }

    void row(std::initializer_list<double> values) {
        bool first = true;
        for (double v : values) {
            if (!first) out_ << ",";
            out_ << format_double(v);
            first = false;
        }
        out_ << "\n";
    }

    void row_named(const std::string& name, std::initializer_list<double> values) {
        out_ << name;
        for (double v : values) out_ << "," << format_double(v);
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Lazily built shared state: most checks need the simulated candidate
// system, some need the adjoints on top.
struct Workspace {
    const ExperimentConfig& cfg;
    CoefficientModel model;
    RegressionBasis basis;
    TimeGrid grid;
    std::shared_ptr<const NoiseEnsemble> noise;
    std::optional<ControlProcess> pi;
    std::optional<ParticleEnsemble> ens;
    std::optional<BackwardTriple> triple;
    std::optional<Trajectory> lambda;
    std::optional<AdjointState> adjoint;
    bool forward_mean_written = false;

    explicit Workspace(const ExperimentConfig& config) : cfg(config) {
        model = build_model(cfg);
        verify_model_derivatives(model);
        basis = cfg.basis_degree == 0
                    ? constant_basis()
                    : polynomial_basis(cfg.basis_degree,
                                       cfg.basis_lifts ? model.n_lifts() : 0, cfg.ridge);
        grid = make_grid(cfg.T, cfg.dt, cfg.delta);
    }

    const ControlProcess& control() {
        if (!pi) pi = ControlProcess::constant(grid, cfg.control_value, model.U);
        return *pi;
    }

    const ParticleEnsemble& ensemble() {
        if (!ens) {
            MFDELAY_INFO("simulating " << cfg.n_particles << " particles on ["
                                       << grid.t_start() << ", " << grid.t_end() << "]");
            noise = std::make_shared<const NoiseEnsemble>(grid, model.jumps, cfg.n_particles,
                                                          cfg.seed);
            ens = simulate_forward(model, control(), noise, grid);
            write_forward_mean();
        }
        return *ens;
    }

    const BackwardTriple& backward() {
        if (!triple) {
            ensemble();
            MFDELAY_INFO("backward induction over " << grid.n_steps() << " steps");
            triple = solve_backward(model, *ens, control(), basis);
        }
        return *triple;
    }

    const Trajectory& lambda_path() {
        if (!lambda) lambda = solve_lambda_forward(model, backward(), *ens, control());
        return *lambda;
    }

    const AdjointState& adjoints() {
        if (!adjoint) {
            lambda_path();
            MFDELAY_INFO("costate backward induction");
            adjoint = solve_adjoint_backward(model, *ens, *triple, *lambda, control(), basis);
        }
        return *adjoint;
    }

    // Candidate adjoint pair of the consumption example: p = -lambda/pi0.
    AdjointState candidate_adjoints() {
        lambda_path();
        Trajectory p_path(grid);
        for (std::size_t i = 0; i < grid.size(); ++i) p_path[i] = -(*lambda)[i] / cfg.pi0;
        return AdjointState::from_deterministic(p_path, *lambda, cfg.n_particles,
                                                model.jumps.n_marks());
    }

    void write_forward_mean() {
        if (forward_mean_written) return;
        CsvWriter csv(fs::path(cfg.out_dir) / "forward_mean.csv", "t,mean,stderr");
        const std::size_t n = ens->n_particles();
        for (std::size_t k = 0; k < grid.n_main; ++k) {
            double mean = 0.0;
            for (std::size_t p = 0; p < n; ++p) mean += ens->X[p].at_main(k);
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                const double d = ens->X[p].at_main(k) - mean;
                var += d * d;
            }
            const double se =
                n > 1 ? std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n))
                      : 0.0;
            csv.row({grid.time(grid.main_index(k)), mean, se});
        }
        forward_mean_written = true;
    }
};

std::string pass_tag(bool pass) { return pass ? "[PASS]" : "[FAIL]"; }

CheckResult check_lambda(Workspace& ws) {
    CheckResult res{"lambda", false, ""};
    const ExperimentConfig& cfg = ws.cfg;
    const Trajectory& lam = ws.lambda_path();
    const double ab = cfg.alpha - cfg.beta;
    CsvWriter csv(fs::path(cfg.out_dir) / "lambda.csv", "t,lambda,closed_form,abs_err");
    double max_err = 0.0;
    for (std::size_t k = 0; k < ws.grid.n_main; ++k) {
        const double t = ws.grid.time(ws.grid.main_index(k));
        const double closed = closed_form_lambda(cfg.alpha, cfg.beta, t);
        const double err = std::abs(lam.at_main(k) - closed);
        max_err = std::max(max_err, err);
        csv.row({t, lam.at_main(k), closed, err});
    }
    const double tol = std::max(ab * ab * cfg.T * cfg.dt, 1e-9);
    res.pass = max_err <= tol;
    std::ostringstream os;
    os << "max |lambda - e^{-(alpha-beta)t}| = " << max_err << " (tol " << tol << ")";
    res.detail = os.str();
    return res;
}

CheckResult check_p(Workspace& ws) {
    CheckResult res{"p", false, ""};
    const ExperimentConfig& cfg = ws.cfg;
    const ConsumptionModel cm = consumption_params(cfg);
    const double p_T = -ws.lambda_path().at_main(ws.grid.n_steps()) / cfg.pi0;
    const Trajectory p = solve_p_deterministic(cm, ws.grid, p_T);
    CsvWriter csv(fs::path(cfg.out_dir) / "p.csv", "t,p,closed_form,abs_err");
    double max_err = 0.0;
    for (std::size_t k = 0; k < ws.grid.n_main; ++k) {
        const double t = ws.grid.time(ws.grid.main_index(k));
        const double closed = p_T * std::exp(-cfg.c * (cfg.T - t));
        const double err = std::abs(p.at_main(k) - closed);
        max_err = std::max(max_err, err);
        csv.row({t, p.at_main(k), closed, err});
    }
    const double tol = std::max(
        2.0 * std::abs(p_T) * cfg.c * cfg.c * cfg.T * std::exp(std::abs(cfg.c) * cfg.T) * cfg.dt,
        1e-9);
    res.pass = max_err <= tol;
    std::ostringstream os;
    os << "max |p - p_T e^{-c(T-t)}| = " << max_err << " (tol " << tol << ")";
    res.detail = os.str();
    return res;
}

CheckResult check_residual(Workspace& ws) {
    CheckResult res{"residual", false, ""};
    const ExperimentConfig& cfg = ws.cfg;
    ws.backward();
    const AdjointState adj = cfg.model == "recursive_utility"
                                 ? ws.candidate_adjoints()
                                 : ws.adjoints();
    const ResidualPath path = necessary_residual(ws.model, ws.control(), *ws.ens, *ws.triple,
                                                 adj, cfg.flow, ws.basis);
    CsvWriter csv(fs::path(cfg.out_dir) / "residual.csv", "t,residual,stderr");
    double max_se = 0.0;
    for (std::size_t k = 0; k < path.residual.size(); ++k) {
        csv.row({ws.grid.time(ws.grid.main_index(k)), path.residual[k], path.std_error[k]});
        max_se = std::max(max_se, path.std_error[k]);
    }
    const double tol = 5.0 * max_se + cfg.tol_residual;
    res.pass = path.sup_norm <= tol;
    std::ostringstream os;
    os << "sup_t |E[dH/du | G_t]| = " << path.sup_norm << " (tol " << tol << ")";
    res.detail = os.str();
    return res;
}

CheckResult check_gradient(Workspace& ws) {
    CheckResult res{"gradient", true, ""};
    const ExperimentConfig& cfg = ws.cfg;
    CsvWriter csv(fs::path(cfg.out_dir) / "gradcheck.csv", "eta_id,lhs,rhs,ci");

    // Keep the base control a perturbation-width clear of the boundary.
    const double width = ws.model.U.width();
    const double height = 0.2 * width;
    const double margin = cfg.s_fd * height * 1.01;
    const double base =
        std::min(std::max(cfg.control_value, ws.model.U.lo + margin), ws.model.U.hi - margin);
    const ControlProcess pi = ControlProcess::constant(ws.grid, base, ws.model.U);

    RandomStream rs(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
    const GradientCheckContext ctx =
        make_gradient_context(ws.model, pi, ws.grid, cfg.n_particles, cfg.seed, ws.basis);
    double worst = 0.0;
    for (std::size_t i = 0; i < cfg.gradient_bumps; ++i) {
        const double horizon = ws.grid.t_end();
        const double t0 =
            std::floor(rs.uniform(0.0, 0.7 * horizon) / cfg.dt) * cfg.dt;
        const double bump_width =
            std::max(cfg.dt, std::floor(rs.uniform(0.1, 0.3) * horizon / cfg.dt) * cfg.dt);
        const Perturbation eta = Perturbation::bump(ws.grid, t0, bump_width, height);
        const GradientCheckResult g = gradient_identity_check(ws.model, ctx, eta, cfg.s_fd,
                                                              ws.basis);
        csv.row({static_cast<double>(i), g.lhs, g.rhs, g.ci});
        const double gap = std::abs(g.lhs - g.rhs);
        worst = std::max(worst, gap - g.ci);
        if (gap > g.ci + cfg.tol_gradient) res.pass = false;
    }
    std::ostringstream os;
    os << cfg.gradient_bumps << " bump directions, worst |lhs - rhs| - ci = " << worst
       << " (tol " << cfg.tol_gradient << ")";
    res.detail = os.str();
    return res;
}

CheckResult check_scaling(Workspace& ws) {
    CheckResult res{"scaling", false, ""};
    const ExperimentConfig& cfg = ws.cfg;
    ws.ensemble();
    const Perturbation eta = Perturbation::constant(ws.grid, 0.2 * ws.model.U.width());

    std::vector<double> la, le;
    bool degenerate = true;
    for (double alpha : {0.1, 0.05, 0.025, 0.0125}) {
        const ControlProcess shifted =
            shifted_control_clamped(ws.control(), eta, alpha, ws.model.U);
        const ParticleEnsemble ens2 = simulate_forward(ws.model, shifted, ws.noise, ws.grid);
        double acc = 0.0;
        for (std::size_t p = 0; p < cfg.n_particles; ++p) {
            double sup = 0.0;
            for (std::size_t k = 0; k < ws.grid.n_main; ++k) {
                const double d = ens2.X[p].at_main(k) - ws.ens->X[p].at_main(k);
                sup = std::max(sup, d * d);
            }
            acc += sup;
        }
        acc /= static_cast<double>(cfg.n_particles);
        if (acc > 1e-300) degenerate = false;
        la.push_back(std::log(alpha));
        le.push_back(acc > 1e-300 ? std::log(acc) : 0.0);
    }
    if (degenerate) {
        res.pass = true;
        res.detail = "forward dynamics are control-insensitive; scaling not applicable";
        return res;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(la.size());
    for (std::size_t i = 0; i < la.size(); ++i) {
        sx += la[i];
        sy += le[i];
        sxx += la[i] * la[i];
        sxy += la[i] * le[i];
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    res.pass = slope >= cfg.tol_scaling_lo && slope <= cfg.tol_scaling_hi;
    std::ostringstream os;
    os << "log-log slope of E[sup|dX|^2] vs alpha = " << slope << " (window ["
       << cfg.tol_scaling_lo << ", " << cfg.tol_scaling_hi << "])";
    res.detail = os.str();
    return res;
}

CheckResult check_bsde(Workspace& ws) {
    CheckResult res{"bsde", true, ""};
    const ExperimentConfig& cfg = ws.cfg;
    ws.backward();
    const std::size_t n_steps = ws.grid.n_steps();
    const double tol =
        5.0 / std::sqrt(static_cast<double>(cfg.n_particles)) + 5.0 * cfg.dt;
    std::ostringstream os;
    os << "martingale-consistency RMS over [t, T']: ";
    const std::pair<std::size_t, std::size_t> windows[] = {
        {0, n_steps / 2}, {n_steps / 4, (3 * n_steps) / 4}, {n_steps / 2, n_steps}};
    for (const auto& [t_node, T_node] : windows) {
        const double r = bsde_consistency_check(*ws.triple, ws.model, *ws.ens, ws.control(),
                                                t_node, T_node, ws.basis);
        os << r << " ";
        if (r > tol) res.pass = false;
    }
    os << "(tol " << tol << ")";
    res.detail = os.str();
    return res;
}

CheckResult check_fubini(Workspace& ws) {
    CheckResult res{"fubini", true, ""};
    const ExperimentConfig& cfg = ws.cfg;
    // Dedicated micro-grid: 10^3 steps, short delay span.
    const TimeGrid grid = make_grid(1.0, 1e-3, 0.1);
    RandomStream rs(cfg.seed ^ 0xFEEDFACEULL);
    Trajectory phi(grid), x(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        phi[i] = rs.uniform(-1.0, 1.0);
        x[i] = rs.uniform(-1.0, 1.0);
    }
    CsvWriter csv(fs::path(cfg.out_dir) / "fubini_gap.csv", "measure,gap");
    double worst = 0.0;
    const std::pair<const char*, DelayMeasure> measures[] = {
        {"dirac0", DelayMeasure::dirac_at_zero()},
        {"dirac_minus_delta", DelayMeasure::dirac_at_minus_delta(0.1)},
        {"exponential", DelayMeasure::exponential(1.5, 0.1, 1e-3)},
    };
    for (const auto& [name, mu] : measures) {
        const double gap = fubini_identity_check(phi, x, mu);
        csv.row_named(name, {gap});
        worst = std::max(worst, gap);
        if (gap > cfg.tol_fubini) res.pass = false;
    }
    std::ostringstream os;
    os << "worst pairing gap = " << worst << " (tol " << cfg.tol_fubini << ")";
    res.detail = os.str();
    return res;
}

CheckResult check_hamiltonian(Workspace& ws) {
    CheckResult res{"hamiltonian", true, ""};
    const ExperimentConfig& cfg = ws.cfg;
    const CoefficientModel& model = ws.model;
    RandomStream rs(cfg.seed ^ 0xABCDEF12ULL);
    const std::size_t n_lifts = model.n_lifts();
    const std::size_t n_marks = model.jumps.n_marks();

    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        HamiltonianPoint pt;
        pt.t = rs.uniform(0.0, cfg.T);
        pt.x.resize(n_lifts);
        pt.m.resize(n_lifts);
        for (auto& v : pt.x) v = rs.uniform(-2.0, 2.0);
        for (auto& v : pt.m) v = rs.uniform(-2.0, 2.0);
        pt.m_phi = rs.uniform(-2.0, 2.0);
        pt.y = rs.uniform(-2.0, 2.0);
        pt.n = rs.uniform(-2.0, 2.0);
        pt.z = rs.uniform(-2.0, 2.0);
        pt.k.assign(n_marks, 0.0);
        for (auto& v : pt.k) v = rs.uniform(-1.0, 1.0);
        pt.u = rs.uniform(model.U.lo + 0.05 * model.U.width(),
                          model.U.hi - 0.05 * model.U.width());
        pt.p = rs.uniform(-2.0, 2.0);
        pt.q = rs.uniform(-2.0, 2.0);
        pt.r.assign(n_marks, 0.0);
        for (auto& v : pt.r) v = rs.uniform(-1.0, 1.0);
        pt.lambda = rs.uniform(-2.0, 2.0);

        const CoeffArgs a = pt.args();
        const double lhs = eval_H(model, pt) - model.f(a) - model.g(a) * pt.lambda;
        double rhs = model.b(a) * pt.p + model.sigma(a) * pt.q;
        for (std::size_t j = 0; j < n_marks; ++j)
            rhs += model.gamma(a, model.jumps.marks[j]) * pt.r[j] * model.jumps.weights[j];
        const double gap = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
        worst = std::max(worst, gap);
        if (gap > cfg.tol_hamiltonian) res.pass = false;
    }

    std::string probe = "derivative probe ok";
    try {
        verify_model_derivatives(model, 100, cfg.seed ^ 0x12345ULL);
    } catch (const PreconditionError& e) {
        res.pass = false;
        probe = e.what();
    }
    std::ostringstream os;
    os << "decomposition residual (relative) " << worst << " at 1000 points (tol "
       << cfg.tol_hamiltonian << "); " << probe;
    res.detail = os.str();
    return res;
}

CheckResult check_jumps(Workspace& ws) {
    CheckResult res{"jumps", true, ""};
    const ExperimentConfig& cfg = ws.cfg;
    const ParticleEnsemble& ens = ws.ensemble();
    const std::size_t n = ens.n_particles();
    double worst = 0.0;
    for (std::size_t k = 0; k < ws.grid.n_main; ++k) {
        double mean = 0.0;
        for (std::size_t p = 0; p < n; ++p) mean += ens.X[p].at_main(k);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            const double d = ens.X[p].at_main(k) - mean;
            var += d * d;
        }
        const double se =
            n > 1 ? std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
        const double gap = std::abs(mean - cfg.x0) - 3.0 * se;
        worst = std::max(worst, gap);
        if (gap > 1e-12) res.pass = false;
    }
    std::ostringstream os;
    os << "compensated-jump mean: worst |mean - x0| - 3 SE = " << worst;
    res.detail = os.str();
    return res;
}

CheckResult check_norms(Workspace& ws) {
    CheckResult res{"norms", true, ""};
    const MeanSquareNorms norms = mean_square_norms(ws.ensemble(), ws.cfg.kappa);
    res.pass = !norms.divergence_flag;
    std::ostringstream os;
    os << "E[int X^2 dt] = " << norms.l2_time_integral
       << ", E[sup e^{kt} X^2] = " << norms.sup_weighted
       << ", divergence " << (norms.divergence_flag ? "flagged" : "not flagged");
    if (ws.model.is_infinite()) {
        // truncation sanity: the computed costate must carry the same decay
        const AdjointDecayNorms adj_norms =
            adjoint_decay_norms(ws.adjoints(), ws.model.jumps, ws.cfg.kappa);
        os << "; costate E[sup e^{kt} p^2] = " << adj_norms.sup_weighted_p << ", decay "
           << (adj_norms.divergence_flag ? "violated" : "holds");
        res.pass = res.pass && !adj_norms.divergence_flag;
    }
    res.detail = os.str();
    return res;
}

CheckResult check_transversality(Workspace& ws) {
    CheckResult res{"transversality", false, ""};
    const ExperimentConfig& cfg = ws.cfg;
    const ConsumptionModel cm = consumption_params(cfg);

    std::vector<double> T_list = cfg.T_list;
    if (T_list.empty()) {
        for (int i = 1; i <= 5; ++i) {
            const double T = std::round(cfg.T * static_cast<double>(i) / 5.0 / cfg.dt) * cfg.dt;
            if (T > 0.0) T_list.push_back(T);
        }
    }

    const AdjointProvider provider = [&cm](const CoefficientModel& mdl,
                                           const ParticleEnsemble& e, const BackwardTriple&,
                                           const ControlProcess&, const RegressionBasis&) {
        Trajectory lam(e.grid), p_path(e.grid);
        for (std::size_t i = 0; i < e.grid.size(); ++i) {
            const double t = std::max(0.0, e.grid.time(i));
            lam[i] = closed_form_lambda(cm.alpha, cm.beta, t);
            p_path[i] = -lam[i] / cm.pi0;
        }
        return AdjointState::from_deterministic(p_path, lam, e.n_particles(),
                                                mdl.jumps.n_marks());
    };

    const TransversalityTable table = transversality_check(
        ws.model, T_list, cfg.dt,
        [&](const TimeGrid& g) { return ControlProcess::constant(g, cm.pi0, ws.model.U); },
        [&](const TimeGrid& g) {
            return ControlProcess::constant(g, 0.0, Interval{0.0, ws.model.U.hi});
        },
        cfg.n_particles, cfg.seed, ws.basis, provider, /*solve_alternative_backward=*/false);

    CsvWriter csv(fs::path(cfg.out_dir) / "transversality.csv", "T,pX,stderr,fitted_slope");
    for (const auto& row : table.rows)
        csv.row({row.T, row.p_X_alt, row.p_X_alt_se, table.fitted_slope});

    const double expected = -(cfg.alpha - cfg.beta - cfg.c);
    std::ostringstream os;
    if (cfg.c < cfg.alpha - cfg.beta) {
        const double err = std::abs(table.fitted_slope - expected);
        res.pass = err <= cfg.tol_transversality_rel * std::abs(expected);
        os << "fitted decay slope " << table.fitted_slope << " vs -(alpha-beta-c) = "
           << expected << " (rel tol " << cfg.tol_transversality_rel << ")";
    } else {
        res.pass = table.fitted_slope > 0.0;
        os << "decay condition violated: c < alpha - beta required; fitted slope "
           << table.fitted_slope << " correctly positive";
        if (!res.pass) os << " -- expected a positive slope";
    }
    res.detail = os.str();
    return res;
}

} // namespace

int run_experiment(const ExperimentConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    set_worker_count(cfg.threads);

    fs::create_directories(cfg.out_dir);

    nlohmann::json manifest;
    {
        std::ostringstream hash_os;
        hash_os << "0x" << std::hex << config_hash(cfg);
        manifest["config_hash"] = hash_os.str();
    }
    manifest["code_version"] = kCodeVersion;
    manifest["seed"] = cfg.seed;
    manifest["threads"] = cfg.threads;
    manifest["checks"] = nlohmann::json::object();

    std::vector<CheckResult> results;
    bool numerical_failure = false;
    std::string failure_point;

    const auto finalize = [&](int code) {
        const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - t_start)
                              .count();
        manifest["wall_clock_ms"] = wall;
        manifest["exit_code"] = code;
        if (!failure_point.empty()) manifest["failure_point"] = failure_point;

        std::ofstream report(fs::path(cfg.out_dir) / "report.txt");
        report << kCodeVersion << " -- model " << cfg.model << ", seed " << cfg.seed
               << ", n_particles " << cfg.n_particles << ", dt " << cfg.dt << ", T " << cfg.T
               << "\n\n";
        for (const auto& r : results) {
            report << pass_tag(r.pass) << " " << r.name << ": " << r.detail << "\n";
        }
        if (!failure_point.empty()) report << "[ERROR] " << failure_point << "\n";
        report << "\nexit code " << code << "\n";

        std::ofstream mf(fs::path(cfg.out_dir) / "manifest.json");
        mf << manifest.dump(2) << "\n";
        return code;
    };

    try {
        Workspace ws(cfg);
        for (const std::string& name : cfg.checks) {
            MFDELAY_INFO("running check " << name);
            CheckResult result;
            if (name == "lambda") result = check_lambda(ws);
            else if (name == "p") result = check_p(ws);
            else if (name == "residual") result = check_residual(ws);
            else if (name == "gradient") result = check_gradient(ws);
            else if (name == "scaling") result = check_scaling(ws);
            else if (name == "bsde") result = check_bsde(ws);
            else if (name == "fubini") result = check_fubini(ws);
            else if (name == "hamiltonian") result = check_hamiltonian(ws);
            else if (name == "jumps") result = check_jumps(ws);
            else if (name == "norms") result = check_norms(ws);
            else if (name == "transversality") result = check_transversality(ws);
            else continue; // validated earlier
            manifest["checks"][result.name] = result.pass ? "pass" : "fail";
            results.push_back(std::move(result));
        }
    } catch (const std::exception& e) {
        numerical_failure = true;
        failure_point = e.what();
        MFDELAY_ERROR(e.what());
    }

    if (numerical_failure) return finalize(kExitNumerical);
    for (const auto& r : results)
        if (!r.pass) return finalize(kExitCheckFailure);
    return finalize(kExitAllPass);
}

} // namespace mfdelay
