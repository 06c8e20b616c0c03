// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Every tolerance is pinned here; the statistical checks run on fixed seeds
// so the whole suite is reproducible bit for bit.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "mfdelay/builtin_models.hpp"
#include "mfdelay/recursive_utility.hpp"

using namespace mfdelay;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail, double seconds) {
    std::printf("[%s] criterion %2d: %s (%.1fs)\n", pass ? "PASS" : "FAIL", criterion,
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

struct SolvedSystem {
    TimeGrid grid;
    std::shared_ptr<const NoiseEnsemble> noise;
    ControlProcess pi;
    ParticleEnsemble ens;
    BackwardTriple triple;
};

SolvedSystem solve_system(const CoefficientModel& model, double T, double dt, double u,
                          std::size_t n, std::uint64_t seed, const RegressionBasis& basis) {
    SolvedSystem s;
    s.grid = make_grid(T, dt, model.delay.delta);
    s.noise = std::make_shared<const NoiseEnsemble>(s.grid, model.jumps, n, seed);
    s.pi = ControlProcess::constant(s.grid, u, model.U);
    s.ens = simulate_forward(model, s.pi, s.noise, s.grid);
    s.triple = solve_backward(model, s.ens, s.pi, basis);
    return s;
}

AdjointState candidate_adjoints(const ConsumptionModel& cm, const Trajectory& lambda,
                                std::size_t n_particles) {
    Trajectory p_path(lambda.grid());
    for (std::size_t i = 0; i < lambda.grid().size(); ++i) p_path[i] = -lambda[i] / cm.pi0;
    return AdjointState::from_deterministic(p_path, lambda, n_particles, 0);
}

// ---------------------------------------------------------------------------

void criterion_1_lambda_closed_form() {
    Timer timer;
    ConsumptionModel cm; // alpha 0.4, beta 0.1
    cm.T_max = 2.0;
    const double dt = 1e-3;
    const CoefficientModel model = make_consumption_model(cm);
    const auto s = solve_system(model, cm.T_max, dt, cm.pi0, 10000, 11, polynomial_basis(2));
    const Trajectory lambda = solve_lambda_forward(model, s.triple, s.ens, s.pi);
    double max_err = 0.0;
    for (std::size_t k = 0; k < s.grid.n_main; ++k) {
        const double t = s.grid.time(s.grid.main_index(k));
        max_err = std::max(max_err, std::abs(lambda.at_main(k) - std::exp(-0.3 * t)));
    }
    std::ostringstream os;
    os << "lambda vs e^{-0.3t} at dt=1e-3: max abs err " << max_err << " <= 1e-4";
    report(1, max_err <= 1e-4, os.str(), timer.seconds());
}

void criterion_2_optimality_residual() {
    Timer timer;
    ConsumptionModel cm;
    cm.T_max = 5.0;
    const CoefficientModel model = make_consumption_model(cm);
    const double dt = 1e-2;
    const std::size_t n = 10000;
    const auto s = solve_system(model, cm.T_max, dt, cm.pi0, n, 22, polynomial_basis(2));
    const Trajectory lambda = solve_lambda_forward(model, s.triple, s.ens, s.pi);
    const AdjointState adj = candidate_adjoints(cm, lambda, n);

    const ResidualPath at_hat = necessary_residual(model, s.pi, s.ens, s.triple, adj,
                                                   InformationFlow::full(), polynomial_basis(2));
    double max_se = 0.0;
    for (double se : at_hat.std_error) max_se = std::max(max_se, se);
    const bool hat_ok = at_hat.sup_norm <= 5.0 * max_se + 0.05;

    const ControlProcess pi_scaled =
        ControlProcess::constant(s.grid, 1.5 * cm.pi0, model.U);
    const ParticleEnsemble ens2 = simulate_forward(model, pi_scaled, s.noise, s.grid);
    const BackwardTriple tr2 = solve_backward(model, ens2, pi_scaled, polynomial_basis(2));
    const ResidualPath at_scaled = necessary_residual(model, pi_scaled, ens2, tr2, adj,
                                                      InformationFlow::full(),
                                                      polynomial_basis(2));
    std::size_t exceed = 0, sign_ok = 0;
    for (std::size_t k = 0; k < at_scaled.residual.size(); ++k) {
        const double thr = 5.0 * at_scaled.std_error[k] + 0.05;
        // predicted value -p - lambda/(1.5 pi0) = lambda/(3 pi0) > 0
        if (std::abs(at_scaled.residual[k]) > thr) {
            ++exceed;
            if (at_scaled.residual[k] > 0.0) ++sign_ok;
        }
    }
    const double frac =
        static_cast<double>(exceed) / static_cast<double>(at_scaled.residual.size());
    const bool scaled_ok = frac >= 0.9 && exceed == sign_ok;

    std::ostringstream os;
    os << "residual at candidate sup " << at_hat.sup_norm << " <= " << 5.0 * max_se + 0.05
       << "; at 1.5x candidate significant at " << 100.0 * frac
       << "% of nodes with the predicted sign";
    report(2, hat_ok && scaled_ok, os.str(), timer.seconds());
}

void criterion_3_gradient_identity() {
    Timer timer;
    ConsumptionModel cm;
    cm.T_max = 2.0;
    const CoefficientModel model = make_consumption_model(cm);
    const double dt = 1e-2;
    const TimeGrid grid = make_grid(cm.T_max, dt, 0.0);
    const ControlProcess pi = ControlProcess::constant(grid, 1.2, model.U); // non-optimal
    const GradientCheckContext ctx =
        make_gradient_context(model, pi, grid, 10000, 33, polynomial_basis(2));

    RandomStream rs(44);
    bool all_ok = true;
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
        const double t0 = std::floor(rs.uniform(0.0, 1.4) / dt) * dt;
        const double width = std::max(dt, std::floor(rs.uniform(0.1, 0.4) / dt) * dt);
        const Perturbation eta = Perturbation::bump(grid, t0, width, 0.3);
        const GradientCheckResult g = gradient_identity_check(model, ctx, eta, 1e-3,
                                                              polynomial_basis(2));
        const double gap = std::abs(g.lhs - g.rhs);
        worst = std::max(worst, gap - g.ci);
        if (gap > g.ci + 0.02) all_ok = false;
    }
    std::ostringstream os;
    os << "5 random bumps: worst |dJ_crn - E[sum dH/du eta dt]| - 3SE = " << worst
       << " <= 0.02";
    report(3, all_ok, os.str(), timer.seconds());
}

void criterion_4_derivative_scaling() {
    Timer timer;
    // quadratic-drift toy: b = -x - 0.2 x^2 + u, sigma = 0.3
    CoefficientModel model = make_linear_toy(LinearToyParams{});
    model.b.value = [](const CoeffArgs& a) { return -a.x[0] - 0.2 * a.x[0] * a.x[0] + a.u; };
    model.b.partials.clear();
    model.b.partials[DerivKey::x(0)] = [](const CoeffArgs& a) { return -1.0 - 0.4 * a.x[0]; };
    model.b.partials[DerivKey::u()] = [](const CoeffArgs&) { return 1.0; };
    model.sigma.value = [](const CoeffArgs&) { return 0.3; };

    const std::size_t n = 10000;
    const auto s = solve_system(model, 1.0, 1e-2, 0.4, n, 55, polynomial_basis(2));
    const Perturbation eta = Perturbation::constant(s.grid, 1.0);

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double alpha : {0.1, 0.05, 0.025, 0.0125}) {
        const ControlProcess shifted = shifted_control(s.pi, eta, alpha, model.U);
        const ParticleEnsemble ens2 = simulate_forward(model, shifted, s.noise, s.grid);
        double acc = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            double sup = 0.0;
            for (std::size_t k = 0; k < s.grid.n_main; ++k) {
                const double d = ens2.X[p].at_main(k) - s.ens.X[p].at_main(k);
                sup = std::max(sup, d * d);
            }
            acc += sup;
        }
        const double lx = std::log(alpha);
        const double ly = std::log(acc / static_cast<double>(n));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double slope = (4.0 * sxy - sx * sy) / (4.0 * sxx - sx * sx);
    std::ostringstream os;
    os << "E[sup|X^{pi+a eta} - X^pi|^2] log-log slope " << slope << " in [1.8, 2.2]";
    report(4, slope >= 1.8 && slope <= 2.2, os.str(), timer.seconds());
}

void criterion_5_transversality_decay() {
    Timer timer;
    ConsumptionModel cm; // (alpha, beta, c) = (0.4, 0.1, 0.05)
    const double dt = 1e-2;
    const std::size_t n = 10000;

    const auto make_provider = [](const ConsumptionModel& params) {
        return AdjointProvider([params](const CoefficientModel& mdl, const ParticleEnsemble& e,
                                        const BackwardTriple&, const ControlProcess&,
                                        const RegressionBasis&) {
            Trajectory lam(e.grid), p_path(e.grid);
            for (std::size_t i = 0; i < e.grid.size(); ++i) {
                const double t = std::max(0.0, e.grid.time(i));
                lam[i] = closed_form_lambda(params.alpha, params.beta, t);
                p_path[i] = -lam[i] / params.pi0;
            }
            return AdjointState::from_deterministic(p_path, lam, e.n_particles(),
                                                    mdl.jumps.n_marks());
        });
    };

    cm.T_max = 10.0;
    const CoefficientModel model = make_consumption_model(cm);
    const auto hat_gen = [&](const TimeGrid& g) {
        return ControlProcess::constant(g, cm.pi0, model.U);
    };
    const auto zero_gen = [&](const TimeGrid& g) {
        return ControlProcess::constant(g, 0.0, Interval{0.0, model.U.hi});
    };
    const TransversalityTable table =
        transversality_check(model, {2.0, 4.0, 6.0, 8.0, 10.0}, dt, hat_gen, zero_gen, n, 66,
                             polynomial_basis(2), make_provider(cm), false);
    const double expected = -(cm.alpha - cm.beta - cm.c); // -0.25
    const bool decay_ok = std::abs(table.fitted_slope - expected) <= 0.15 * std::abs(expected);

    ConsumptionModel bad = cm;
    bad.c = 0.5;
    bad.T_max = 6.0;
    const CoefficientModel bad_model = make_consumption_model(bad);
    const TransversalityTable bad_table = transversality_check(
        bad_model, {2.0, 4.0, 6.0}, dt,
        [&](const TimeGrid& g) { return ControlProcess::constant(g, bad.pi0, bad_model.U); },
        [&](const TimeGrid& g) {
            return ControlProcess::constant(g, 0.0, Interval{0.0, bad_model.U.hi});
        },
        n, 66, polynomial_basis(2), make_provider(bad), false);
    const bool divergence_detected = bad_table.fitted_slope > 0.0 && !bad_table.decay_ok;

    std::ostringstream os;
    os << "fitted slope " << table.fitted_slope << " vs -(alpha-beta-c) = " << expected
       << " within 15%; with c = 0.5 the slope " << bad_table.fitted_slope
       << " is positive and the check reports the violated condition c < alpha - beta";
    report(5, decay_ok && divergence_detected, os.str(), timer.seconds());
}

void criterion_6_bsde_martingale() {
    Timer timer;
    const CoefficientModel model = make_brownian_bsde(BrownianBsdeParams{});
    const std::size_t n = 10000;
    const auto s = solve_system(model, 1.0, 1e-2, 0.0, n, 77, polynomial_basis(2));
    double dev_y = 0.0, dev_z = 0.0;
    for (std::size_t k = 0; k < s.grid.n_steps(); ++k) {
        double sy = 0.0, sz = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            const double ey = s.triple.Y[p].at_main(k) - s.ens.X[p].at_main(k);
            const double ez = s.triple.Z[p][k] - 1.0;
            sy += ey * ey;
            sz += ez * ez;
        }
        dev_y = std::max(dev_y, std::sqrt(sy / static_cast<double>(n)));
        dev_z = std::max(dev_z, std::sqrt(sz / static_cast<double>(n)));
    }
    std::ostringstream os;
    os << "Brownian martingale recovery: max_t RMS|Y - X| = " << dev_y
       << ", max_t RMS|Z - 1| = " << dev_z << " <= 0.05";
    report(6, dev_y <= 0.05 && dev_z <= 0.05, os.str(), timer.seconds());
}

void criterion_7_fubini() {
    Timer timer;
    const TimeGrid grid = make_grid(1.0, 1e-3, 0.1); // 10^3-step grid
    RandomStream rs(88);
    Trajectory phi(grid), x(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        phi[i] = rs.uniform(-1.0, 1.0);
        x[i] = rs.uniform(-1.0, 1.0);
    }
    for (std::size_t i = 0; i < grid.n_pre; ++i) x[i] = 0.0;

    const DelayMeasure measures[] = {
        DelayMeasure::dirac_at_zero(),
        DelayMeasure::dirac_at_minus_delta(0.1),
        DelayMeasure::exponential(1.5, 0.1, 1e-3),
    };
    bool ok = true;
    double worst = 0.0;
    for (const auto& mu : measures) {
        // brute-force double sum over the index set {r = t - s_a on the grid}
        const auto shifts = mu.shifts_on(grid);
        long double brute = 0.0L, lhs = 0.0L, rhs = 0.0L;
        for (std::size_t k = 0; k < grid.n_main; ++k) {
            for (std::size_t a2 = 0; a2 < shifts.size(); ++a2) {
                const long r = static_cast<long>(k) - shifts[a2];
                if (r < 0 || r >= static_cast<long>(grid.n_main)) continue;
                brute += static_cast<long double>(phi.at_main(static_cast<std::size_t>(r))) *
                         mu.masses()[a2] * x.at_main(k);
            }
            const double t = grid.time(grid.main_index(k));
            lhs += static_cast<long double>(x.at_main(k)) *
                   anticipated_convolution(phi, t, mu, true);
            rhs += static_cast<long double>(phi.at_main(k)) * segment_functional(x, t, mu);
        }
        const double gap_op = fubini_identity_check(phi, x, mu);
        const double gap_lhs = std::abs(static_cast<double>(lhs - brute)) * grid.dt;
        const double gap_rhs = std::abs(static_cast<double>(rhs - brute)) * grid.dt;
        worst = std::max({worst, gap_op, gap_lhs, gap_rhs});
        if (gap_op > 1e-12 || gap_lhs > 1e-12 || gap_rhs > 1e-12) ok = false;
    }
    std::ostringstream os;
    os << "pairing gap vs brute-force double sum: worst " << worst
       << " <= 1e-12 for dirac0, dirac at -delta, atomized exponential";
    report(7, ok, os.str(), timer.seconds());
}

void criterion_8_hamiltonian_decomposition() {
    Timer timer;
    ConsumptionModel cm;
    cm.sigma0 = 0.3;
    cm.gamma_scale = 0.5;
    cm.jumps = JumpSpec({0.4, -0.2}, {1.0, 2.0});
    std::vector<CoefficientModel> models;
    models.push_back(make_consumption_model(cm));
    LinearToyParams lp;
    lp.delta = 0.2;
    lp.c2 = 0.3;
    lp.gy = -0.4;
    models.push_back(make_linear_toy(lp));
    models.push_back(make_brownian_bsde(BrownianBsdeParams{}));
    models.push_back(make_jump_martingale(JumpMartingaleParams{}));

    bool ok = true;
    double worst = 0.0;
    RandomStream rs(99);
    for (const auto& model : models) {
        const std::size_t n_lifts = model.n_lifts();
        const std::size_t n_marks = model.jumps.n_marks();
        for (int i = 0; i < 1000; ++i) {
            HamiltonianPoint pt;
            pt.t = rs.uniform(0.0, model.horizon_T());
            pt.x.resize(n_lifts);
            pt.m.resize(n_lifts);
            for (auto& v : pt.x) v = rs.uniform(-2.0, 2.0);
            for (auto& v : pt.m) v = rs.uniform(-2.0, 2.0);
            pt.m_phi = rs.uniform(-2.0, 2.0);
            pt.y = rs.uniform(-2.0, 2.0);
            pt.n = rs.uniform(-2.0, 2.0);
            pt.z = rs.uniform(-2.0, 2.0);
            pt.k.resize(n_marks);
            for (auto& v : pt.k) v = rs.uniform(-1.0, 1.0);
            pt.u = rs.uniform(model.U.lo + 0.05 * model.U.width(),
                              model.U.hi - 0.05 * model.U.width());
            pt.p = rs.uniform(-2.0, 2.0);
            pt.q = rs.uniform(-2.0, 2.0);
            pt.r.resize(n_marks);
            for (auto& v : pt.r) v = rs.uniform(-1.0, 1.0);
            pt.lambda = rs.uniform(-2.0, 2.0);

            const CoeffArgs a = pt.args();
            const double lhs = eval_H(model, pt) - model.f(a) - model.g(a) * pt.lambda;
            double rhs = model.b(a) * pt.p + model.sigma(a) * pt.q;
            for (std::size_t j = 0; j < n_marks; ++j)
                rhs += model.gamma(a, model.jumps.marks[j]) * pt.r[j] * model.jumps.weights[j];
            const double gap = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
            worst = std::max(worst, gap);
            if (gap > 1e-12) ok = false;
        }
        try {
            verify_model_derivatives(model, 100, 0x8888ULL);
        } catch (const std::exception& e) {
            ok = false;
            std::fprintf(stderr, "derivative probe: %s\n", e.what());
        }
    }
    std::ostringstream os;
    os << "H - f - g lambda vs p b + q sigma + sum r gamma w: worst relative gap " << worst
       << " <= 1e-12 over 4 models x 1000 points; analytic derivatives match central "
          "differences within 1e-5";
    report(8, ok, os.str(), timer.seconds());
}

void criterion_9_reproducibility() {
    Timer timer;
#ifndef MFDELAY_CLI_PATH
    report(9, false, "CLI path not configured at build time", timer.seconds());
    return;
#else
    const fs::path work = fs::temp_directory_path() / "mfdelay_acceptance";
    fs::create_directories(work);
    const fs::path conf = work / "repro.conf";
    {
        std::ofstream out(conf);
        out << "model = recursive_utility\nT = 2\ndt = 0.01\nn_particles = 2000\n"
               "sigma0 = 0.2\nseed = 424242\nchecks = lambda, residual, fubini\n";
    }
    const auto run = [&](const std::string& out_dir, int threads) {
        std::ostringstream cmd;
        cmd << MFDELAY_CLI_PATH << " " << conf.string() << " --out " << out_dir
            << " --threads " << threads << " > /dev/null 2>&1";
        return std::system(cmd.str().c_str());
    };
    const int rc1 = run((work / "t1").string(), 1);
    const int rc8 = run((work / "t8").string(), 8);

    const auto read_file = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    bool identical = rc1 == 0 && rc8 == 0;
    for (const char* name : {"forward_mean.csv", "lambda.csv", "residual.csv",
                             "fubini_gap.csv"}) {
        const std::string a = read_file(work / "t1" / name);
        const std::string b = read_file(work / "t8" / name);
        if (a.empty() || a != b) identical = false;
    }
    std::ostringstream os;
    os << "identical config + seed across --threads 1 and --threads 8: CSV outputs "
       << (identical ? "byte-identical" : "DIFFER");
    report(9, identical, os.str(), timer.seconds());
#endif
}

void criterion_10_jump_compensation() {
    Timer timer;
    const CoefficientModel model = make_jump_martingale(JumpMartingaleParams{});
    const std::size_t n = 10000;
    const TimeGrid grid = make_grid(1.0, 1e-2, 0.0);
    const auto noise = std::make_shared<const NoiseEnsemble>(grid, model.jumps, n, 101);
    const ParticleEnsemble ens =
        simulate_forward(model, ControlProcess::constant(grid, 0.0, model.U), noise, grid);
    bool ok = true;
    double worst = -1e300;
    for (std::size_t k = 0; k < grid.n_main; ++k) {
        double mean = 0.0;
        for (std::size_t p = 0; p < n; ++p) mean += ens.X[p].at_main(k);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            const double d = ens.X[p].at_main(k) - mean;
            var += d * d;
        }
        const double se =
            std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n));
        const double gap = std::abs(mean - 1.0) - 3.0 * se;
        worst = std::max(worst, gap);
        if (gap > 1e-12) ok = false;
    }
    std::ostringstream os;
    os << "compensated-jump martingale: worst |mean - x0| - 3 SE = " << worst
       << " <= 0 across all nodes";
    report(10, ok, os.str(), timer.seconds());
}

} // namespace

int main() {
    std::printf("mfdelay acceptance suite\n");
    criterion_1_lambda_closed_form();
    criterion_2_optimality_residual();
    criterion_3_gradient_identity();
    criterion_4_derivative_scaling();
    criterion_5_transversality_decay();
    criterion_6_bsde_martingale();
    criterion_7_fubini();
    criterion_8_hamiltonian_decomposition();
    criterion_9_reproducibility();
    criterion_10_jump_compensation();
    if (g_failures > 0) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
