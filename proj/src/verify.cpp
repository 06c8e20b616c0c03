#include "mfdelay/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfdelay/lsmc_step.hpp"
#include "mfdelay/solution_view.hpp"

namespace mfdelay {

namespace {

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double std_error_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size() - 1) /
                     static_cast<double>(v.size()));
}

} // namespace

DerivativeProcesses simulate_derivative_processes(const CoefficientModel& model,
                                                  const ControlProcess& pi,
                                                  const Perturbation& eta,
                                                  const ParticleEnsemble& ens,
                                                  const BackwardTriple& triple,
                                                  const RegressionBasis& basis) {
    const TimeGrid& grid = ens.grid;
    const SolutionView sc(model, ens, triple, pi);
    const std::size_t n = sc.n;
    const std::size_t n_steps = sc.n_steps;
    const std::size_t n_marks = sc.n_marks;
    const std::size_t n_lifts = model.n_lifts();
    const double dt = grid.dt;
    const NoiseEnsemble& noise = *ens.noise;
    const double fd = model.fd_step;

    DerivativeProcesses dp;
    dp.X.assign(n, Trajectory(grid)); // zero prehistory per definition
    dp.Y.assign(n, Trajectory(grid));
    dp.Z.assign(n, std::vector<double>(n_steps, 0.0));
    dp.K.assign(n, std::vector<double>(n_steps * n_marks, 0.0));

    // Forward variation. vlift holds the lifted variation per particle; its
    // per-node averages close the mean-field linearization terms.
    std::vector<std::vector<double>> vmean(grid.n_main, std::vector<double>(n_lifts, 0.0));
    std::vector<double> vlift(n * n_lifts);
    std::vector<double> lift_buf;

    for (std::size_t k = 0; k <= n_steps; ++k) {
        const std::size_t node = grid.main_index(k);
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t i = 0; i < n_lifts; ++i)
                vlift[p * n_lifts + i] = sc.delay.lift(dp.X[p], node, i);
        for (std::size_t i = 0; i < n_lifts; ++i) {
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += vlift[p * n_lifts + i];
            vmean[k][i] = acc / static_cast<double>(n);
        }
        if (k == n_steps) break;

        const double eta_k = eta.values[k];
        for (std::size_t p = 0; p < n; ++p) {
            const CoeffArgs a = sc.args_at(p, k, lift_buf);
            const double* vl = &vlift[p * n_lifts];

            double drift = model.b.partial(a, DerivKey::u(), fd) * eta_k;
            double diffu = model.sigma.partial(a, DerivKey::u(), fd) * eta_k;
            for (std::size_t i = 0; i < n_lifts; ++i) {
                drift += model.b.partial(a, DerivKey::x(i), fd) * vl[i] +
                         model.b.partial(a, DerivKey::m(i), fd) * vmean[k][i];
                diffu += model.sigma.partial(a, DerivKey::x(i), fd) * vl[i] +
                         model.sigma.partial(a, DerivKey::m(i), fd) * vmean[k][i];
            }
            double next = dp.X[p][node] + drift * dt + diffu * noise.db(p, k);
            for (std::size_t j = 0; j < n_marks; ++j) {
                const double e = model.jumps.marks[j];
                double gj = model.gamma.partial(a, e, DerivKey::u(), fd) * eta_k;
                for (std::size_t i = 0; i < n_lifts; ++i) {
                    gj += model.gamma.partial(a, e, DerivKey::x(i), fd) * vl[i] +
                          model.gamma.partial(a, e, DerivKey::m(i), fd) * vmean[k][i];
                }
                next += gj * noise.compensated(p, k, j);
            }
            dp.X[p][node + 1] = next;
            if (!std::isfinite(next))
                throw NumericError("derivative process non-finite at step " +
                                   std::to_string(k + 1));
        }
    }

    // Backward variation from Y(T) = a X(T).
    const std::size_t last = grid.main_index(n_steps);
    for (std::size_t p = 0; p < n; ++p) dp.Y[p][last] = model.a * dp.X[p][last];

    std::vector<double> xs(n), next_y(n);
    MartingaleStep ms;
    std::vector<std::vector<double>> base_lifts(n, std::vector<double>(n_lifts));

    for (std::size_t k = n_steps; k-- > 0;) {
        const std::size_t node = grid.main_index(k);
        const double t = grid.time(node);
        for (std::size_t p = 0; p < n; ++p) {
            xs[p] = ens.X[p][node];
            sc.delay.lift_all(ens.X[p], node, base_lifts[p]);
        }
        const CrossSectionRegression reg = make_step_regression(basis, xs, base_lifts, t);

        for (std::size_t p = 0; p < n; ++p) next_y[p] = dp.Y[p][node + 1];
        backward_martingale_step(reg, noise, k, next_y, ms);
        const std::vector<double>& cont = ms.cont;
        for (std::size_t p = 0; p < n; ++p) {
            dp.Z[p][k] = ms.z[p];
            for (std::size_t j = 0; j < n_marks; ++j)
                dp.K[p][k * n_marks + j] = ms.k[p * n_marks + j];
        }

        const double cont_mean = mean_of(cont);
        const double eta_k = eta.values[k];
        for (std::size_t p = 0; p < n; ++p) {
            const CoeffArgs a = sc.args_at(p, k, lift_buf);
            double drift = model.g.partial(a, DerivKey::u(), fd) * eta_k +
                           model.g.partial(a, DerivKey::y(), fd) * cont[p] +
                           model.g.partial(a, DerivKey::n(), fd) * cont_mean +
                           model.g.partial(a, DerivKey::z(), fd) * dp.Z[p][k];
            for (std::size_t i = 0; i < n_lifts; ++i) {
                const double vl = sc.delay.lift(dp.X[p], node, i);
                drift += model.g.partial(a, DerivKey::x(i), fd) * vl +
                         model.g.partial(a, DerivKey::m(i), fd) * vmean[k][i];
            }
            for (std::size_t j = 0; j < n_marks; ++j)
                drift += model.g.partial(a, DerivKey::k(j), fd) * dp.K[p][k * n_marks + j];
            dp.Y[p][node] = cont[p] + drift * dt;
        }
    }
    return dp;
}

ObjectiveEstimate evaluate_objective(const CoefficientModel& model, const ParticleEnsemble& ens,
                                     const BackwardTriple& triple, const ControlProcess& pi) {
    const TimeGrid& grid = ens.grid;
    const SolutionView sc(model, ens, triple, pi);
    const std::size_t n = sc.n;
    const bool infinite = model.is_infinite();

    double psi_mean = 0.0;
    const std::size_t last = grid.main_index(grid.n_steps());
    if (!infinite) {
        for (std::size_t p = 0; p < n; ++p) psi_mean += model.psi.value(ens.X[p][last]);
        psi_mean /= static_cast<double>(n);
    }

    ObjectiveEstimate est;
    est.per_particle.assign(n, 0.0);
    std::vector<double> lift_buf;
    for (std::size_t p = 0; p < n; ++p) {
        double acc = 0.0;
        for (std::size_t k = 0; k < grid.n_steps(); ++k) {
            const CoeffArgs a = sc.args_at(p, k, lift_buf);
            acc += model.f(a) * grid.dt;
        }
        const double y0 = triple.Y[p].at_main(0);
        if (infinite) {
            acc += model.h.value(y0);
        } else {
            acc += model.h1.value(y0) + model.h2.value(ens.X[p][last], psi_mean);
        }
        est.per_particle[p] = acc;
    }
    est.value = mean_of(est.per_particle);
    est.std_error = std_error_of(est.per_particle, est.value);
    return est;
}

ObjectiveEstimate objective_for_control(const CoefficientModel& model, const ControlProcess& pi,
                                        std::shared_ptr<const NoiseEnsemble> noise,
                                        const RegressionBasis& basis) {
    const ParticleEnsemble ens = simulate_forward(model, pi, std::move(noise), pi.grid());
    const BackwardTriple triple = solve_backward(model, ens, pi, basis);
    return evaluate_objective(model, ens, triple, pi);
}

GradientCheckContext make_gradient_context(const CoefficientModel& model,
                                           const ControlProcess& pi, const TimeGrid& grid,
                                           std::size_t n_particles, std::uint64_t seed,
                                           const RegressionBasis& basis) {
    GradientCheckContext ctx;
    ctx.pi = pi;
    ctx.noise = std::make_shared<const NoiseEnsemble>(grid, model.jumps, n_particles, seed);
    ctx.ens = simulate_forward(model, pi, ctx.noise, grid);
    ctx.triple = solve_backward(model, ctx.ens, pi, basis);
    ctx.lambda = solve_lambda_forward(model, ctx.triple, ctx.ens, pi);
    ctx.adj = solve_adjoint_backward(model, ctx.ens, ctx.triple, ctx.lambda, pi, basis);
    ctx.dhdu = control_derivative_path(model, ctx.ens, ctx.triple, ctx.adj, pi);
    return ctx;
}

GradientCheckResult gradient_identity_check(const CoefficientModel& model,
                                            const GradientCheckContext& ctx,
                                            const Perturbation& eta, double s_fd,
                                            const RegressionBasis& basis) {
    if (!(s_fd > 0.0)) throw PreconditionError("gradient_identity_check: s_fd must be positive");
    const TimeGrid& grid = ctx.pi.grid();

    const ControlProcess pi_plus = shifted_control(ctx.pi, eta, s_fd, model.U);
    const ControlProcess pi_minus = shifted_control(ctx.pi, eta, -s_fd, model.U);

    const ObjectiveEstimate j_plus = objective_for_control(model, pi_plus, ctx.noise, basis);
    const ObjectiveEstimate j_minus = objective_for_control(model, pi_minus, ctx.noise, basis);

    const std::size_t n = ctx.noise->n_particles();
    std::vector<double> diff(n), rhs(n), gap(n);
    for (std::size_t p = 0; p < n; ++p) {
        diff[p] = (j_plus.per_particle[p] - j_minus.per_particle[p]) / (2.0 * s_fd);
        double acc = 0.0;
        for (std::size_t k = 0; k < grid.n_steps(); ++k)
            acc += ctx.dhdu[p][k] * eta.values[k] * grid.dt;
        rhs[p] = acc;
        gap[p] = diff[p] - rhs[p];
    }

    GradientCheckResult res;
    res.lhs = mean_of(diff);
    res.rhs = mean_of(rhs);
    res.ci = 3.0 * std_error_of(gap, mean_of(gap));
    return res;
}

GradientCheckResult gradient_identity_check(const CoefficientModel& model,
                                            const ControlProcess& pi, const Perturbation& eta,
                                            double s_fd, const TimeGrid& grid,
                                            std::size_t n_particles, std::uint64_t seed,
                                            const RegressionBasis& basis) {
    const GradientCheckContext ctx =
        make_gradient_context(model, pi, grid, n_particles, seed, basis);
    return gradient_identity_check(model, ctx, eta, s_fd, basis);
}

ResidualPath necessary_residual(const CoefficientModel& model, const ControlProcess& pi,
                                const ParticleEnsemble& ens, const BackwardTriple& triple,
                                const AdjointState& adj, const InformationFlow& flow,
                                const RegressionBasis& basis) {
    const TimeGrid& grid = ens.grid;
    const std::size_t n = ens.n_particles();
    const std::size_t n_steps = grid.n_steps();
    const auto dhdu = control_derivative_path(model, ens, triple, adj, pi);

    ResidualPath path;
    path.residual.assign(n_steps, 0.0);
    path.std_error.assign(n_steps, 0.0);

    std::size_t lag_steps = 0;
    if (flow.mode == InformationFlow::Mode::DelayedInfo) {
        const double steps = flow.lag / grid.dt;
        if (std::abs(steps - std::round(steps)) > 1e-7)
            throw PreconditionError("necessary_residual: information lag must be grid-aligned");
        lag_steps = static_cast<std::size_t>(std::round(steps));
    }

    const CompiledDelay delay(model.delay, grid);
    std::vector<double> values(n), xs(n), fitted(n);
    std::vector<std::vector<double>> lifts(n, std::vector<double>(model.n_lifts()));

    for (std::size_t k = 0; k < n_steps; ++k) {
        for (std::size_t p = 0; p < n; ++p) values[p] = dhdu[p][k];

        if (flow.mode == InformationFlow::Mode::FullInfo) {
            const double m = mean_of(values);
            path.residual[k] = m;
            path.std_error[k] = std_error_of(values, m);
        } else {
            const std::size_t k_lag = k > lag_steps ? k - lag_steps : 0;
            const std::size_t node = grid.main_index(k_lag);
            for (std::size_t p = 0; p < n; ++p) {
                xs[p] = ens.X[p][node];
                delay.lift_all(ens.X[p], node, lifts[p]);
            }
            const CrossSectionRegression reg =
                make_step_regression(basis, xs, lifts, grid.time(node));
            reg.fit_into(values, fitted);
            double rms = 0.0, noise = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                rms += fitted[p] * fitted[p];
                const double e = values[p] - fitted[p];
                noise += e * e;
            }
            path.residual[k] = std::sqrt(rms / static_cast<double>(n));
            path.std_error[k] =
                std::sqrt(noise / static_cast<double>(n)) / std::sqrt(static_cast<double>(n));
        }
        path.sup_norm = std::max(path.sup_norm, std::abs(path.residual[k]));
    }
    return path;
}

SufficientProbeReport sufficient_conditions_probe(const CoefficientModel& model,
                                                  const ControlProcess& pi_hat,
                                                  const ParticleEnsemble& ens,
                                                  const BackwardTriple& triple,
                                                  const AdjointState& adj,
                                                  const std::vector<ControlProcess>& alternatives,
                                                  std::size_t n_probe, std::uint64_t seed,
                                                  const RegressionBasis& basis) {
    const TimeGrid& grid = ens.grid;
    const SolutionView sc(model, ens, triple, pi_hat);
    const std::size_t n = sc.n;
    const std::size_t n_steps = sc.n_steps;
    const std::size_t n_lifts = model.n_lifts();
    const std::size_t n_marks = sc.n_marks;
    RandomStream rs(seed);

    SufficientProbeReport rep;
    rep.n_probe = n_probe;
    rep.grid_resolution = model.U.width() / 100.0;

    std::vector<double> lift_buf;
    const auto point_at = [&](std::size_t p, std::size_t k) {
        const std::size_t node = grid.main_index(k);
        const CoeffArgs a = sc.args_at(p, k, lift_buf);
        HamiltonianPoint pt;
        pt.t = a.t;
        pt.x.assign(a.x.begin(), a.x.end());
        pt.m.assign(a.m.begin(), a.m.end());
        pt.m_phi = a.m_phi;
        pt.y = a.y;
        pt.n = a.y_mean;
        pt.z = a.z;
        pt.k.assign(a.k.begin(), a.k.end());
        pt.u = a.u;
        pt.p = adj.p[p][node];
        pt.q = k < n_steps ? adj.q[p][k] : 0.0;
        pt.r.assign(n_marks, 0.0);
        if (k < n_steps)
            for (std::size_t j = 0; j < n_marks; ++j) pt.r[j] = adj.r[p][k * n_marks + j];
        pt.lambda = adj.lambda[node];
        return pt;
    };

    // (a) Midpoint concavity of H in (x, m, y, z, k, u) at random point
    // pairs around solution points; t, p, q, r, lambda stay fixed.
    const auto perturb = [&](const HamiltonianPoint& base) {
        HamiltonianPoint pt = base;
        for (auto& v : pt.x) v += rs.uniform(-0.5, 0.5);
        for (auto& v : pt.m) v += rs.uniform(-0.5, 0.5);
        pt.m_phi += rs.uniform(-0.5, 0.5);
        pt.y += rs.uniform(-0.5, 0.5);
        pt.z += rs.uniform(-0.5, 0.5);
        for (auto& v : pt.k) v += rs.uniform(-0.5, 0.5);
        pt.u = rs.uniform(model.U.lo, model.U.hi);
        return pt;
    };
    const auto midpoint = [&](const HamiltonianPoint& a, const HamiltonianPoint& b) {
        HamiltonianPoint pt = a;
        for (std::size_t i = 0; i < n_lifts; ++i) pt.x[i] = 0.5 * (a.x[i] + b.x[i]);
        for (std::size_t i = 0; i < n_lifts; ++i) pt.m[i] = 0.5 * (a.m[i] + b.m[i]);
        pt.m_phi = 0.5 * (a.m_phi + b.m_phi);
        pt.y = 0.5 * (a.y + b.y);
        pt.z = 0.5 * (a.z + b.z);
        for (std::size_t j = 0; j < n_marks; ++j) pt.k[j] = 0.5 * (a.k[j] + b.k[j]);
        pt.u = 0.5 * (a.u + b.u);
        return pt;
    };

    for (std::size_t probe = 0; probe < n_probe; ++probe) {
        const auto p = static_cast<std::size_t>(rs.next_u64() % n);
        const auto k = static_cast<std::size_t>(rs.next_u64() % n_steps);
        const HamiltonianPoint base = point_at(p, k);
        const HamiltonianPoint pa = perturb(base);
        const HamiltonianPoint pb = perturb(base);
        const HamiltonianPoint mid = midpoint(pa, pb);
        const double lhs = eval_H(model, mid);
        const double rhs = 0.5 * (eval_H(model, pa) + eval_H(model, pb));
        if (lhs < rhs - 1e-9) ++rep.concavity_violations;
    }

    // (b) Conditional-maximum probe on a uniform control grid over U.
    const std::size_t stride = std::max<std::size_t>(1, n_steps / 10);
    bool max_ok = true;
    for (std::size_t k = 0; k < n_steps; k += stride) {
        double best_v = model.U.lo, best_val = 0.0, worst_val = 0.0;
        for (std::size_t iv = 0; iv <= 100; ++iv) {
            const double v = model.U.lo + rep.grid_resolution * static_cast<double>(iv);
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                HamiltonianPoint pt = point_at(p, k);
                pt.u = v;
                acc += eval_H(model, pt);
            }
            acc /= static_cast<double>(n);
            if (iv == 0 || acc > best_val) {
                best_val = acc;
                best_v = v;
            }
            if (iv == 0 || acc < worst_val) worst_val = acc;
        }
        if (best_val - worst_val <= 1e-12 * std::max(1.0, std::abs(best_val))) {
            rep.degenerate_max = true;
            continue;
        }
        const double gap = std::abs(best_v - pi_hat.at_step(k));
        rep.max_argmax_gap = std::max(rep.max_argmax_gap, gap);
        if (gap > rep.grid_resolution + 1e-9) max_ok = false;
    }
    rep.conditional_max_pass = max_ok;

    // (c) Objective comparison against the supplied alternatives under
    // common random numbers.
    const ObjectiveEstimate j_hat = evaluate_objective(model, ens, triple, pi_hat);
    for (const auto& alt : alternatives) {
        const ObjectiveEstimate j_alt = objective_for_control(model, alt, ens.noise, basis);
        std::vector<double> diff(n);
        for (std::size_t p = 0; p < n; ++p)
            diff[p] = j_hat.per_particle[p] - j_alt.per_particle[p];
        const double m = mean_of(diff);
        const double se = std_error_of(diff, m);
        ControlComparison cmp;
        cmp.value_candidate = j_hat.value;
        cmp.value_alternative = j_alt.value;
        cmp.se_diff = se;
        cmp.pass = m >= -3.0 * se;
        rep.comparisons_pass = rep.comparisons_pass && cmp.pass;
        rep.comparisons.push_back(cmp);
    }
    return rep;
}

TransversalityTable transversality_check(
    const CoefficientModel& model_template, const std::vector<double>& T_list, double dt,
    const std::function<ControlProcess(const TimeGrid&)>& pi_hat_gen,
    const std::function<ControlProcess(const TimeGrid&)>& pi_alt_gen, std::size_t n_particles,
    std::uint64_t seed, const RegressionBasis& basis,
    const std::optional<AdjointProvider>& provider, bool solve_alternative_backward) {
    TransversalityTable table;

    for (double T : T_list) {
        CoefficientModel model = model_template;
        if (model.is_infinite()) {
            std::get<InfiniteHorizon>(model.horizon).T_max = T;
        } else {
            std::get<FiniteHorizon>(model.horizon).T = T;
        }
        const TimeGrid grid = make_grid(T, dt, model.delay.delta);
        const auto noise =
            std::make_shared<const NoiseEnsemble>(grid, model.jumps, n_particles, seed);

        const ControlProcess pi_hat = pi_hat_gen(grid);
        const ControlProcess pi_alt = pi_alt_gen(grid);

        const ParticleEnsemble ens_hat = simulate_forward(model, pi_hat, noise, grid);
        const ParticleEnsemble ens_alt = simulate_forward(model, pi_alt, noise, grid);
        const BackwardTriple tr_hat = solve_backward(model, ens_hat, pi_hat, basis);
        BackwardTriple tr_alt;
        if (solve_alternative_backward) tr_alt = solve_backward(model, ens_alt, pi_alt, basis);

        AdjointState adj;
        if (provider) {
            adj = (*provider)(model, ens_hat, tr_hat, pi_hat, basis);
        } else {
            const Trajectory lambda = solve_lambda_forward(model, tr_hat, ens_hat, pi_hat);
            adj = solve_adjoint_backward(model, ens_hat, tr_hat, lambda, pi_hat, basis);
        }

        Perturbation eta;
        eta.values.assign(grid.n_main, 0.0);
        for (std::size_t k = 0; k < grid.n_main; ++k) {
            eta.values[k] = pi_alt.at_step(k) - pi_hat.at_step(k);
            eta.bound = std::max(eta.bound, std::abs(eta.values[k]));
        }
        const DerivativeProcesses dpr =
            simulate_derivative_processes(model, pi_hat, eta, ens_hat, tr_hat, basis);

        const std::size_t last = grid.main_index(grid.n_steps());
        const std::size_t n = n_particles;
        std::vector<double> pdx(n), lamdy(n), pxalt(n);
        double p_derx = 0.0, lam_dery = 0.0;
        const double lamT = adj.lambda[last];
        for (std::size_t p = 0; p < n; ++p) {
            const double pT = adj.p[p][last];
            pdx[p] = pT * (ens_hat.X[p][last] - ens_alt.X[p][last]);
            if (solve_alternative_backward)
                lamdy[p] = lamT * (tr_hat.Y[p][last] - tr_alt.Y[p][last]);
            pxalt[p] = pT * ens_alt.X[p][last];
            p_derx += pT * dpr.X[p][last];
            lam_dery += lamT * dpr.Y[p][last];
        }

        TransversalityRow row;
        row.T = T;
        row.p_dX = mean_of(pdx);
        row.p_dX_se = std_error_of(pdx, row.p_dX);
        if (solve_alternative_backward) {
            row.lam_dY = mean_of(lamdy);
            row.lam_dY_se = std_error_of(lamdy, row.lam_dY);
        } else {
            row.lam_dY = std::numeric_limits<double>::quiet_NaN();
            row.lam_dY_se = std::numeric_limits<double>::quiet_NaN();
        }
        row.p_X_alt = mean_of(pxalt);
        row.p_X_alt_se = std_error_of(pxalt, row.p_X_alt);
        row.p_derX = p_derx / static_cast<double>(n);
        row.lam_derY = lam_dery / static_cast<double>(n);
        table.rows.push_back(row);
    }

    // Log-linear fit of |E[p(T) X_alt(T)]| over the horizons.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (const auto& row : table.rows) {
        const double mag = std::abs(row.p_X_alt);
        if (mag < 1e-300) continue;
        const double ly = std::log(mag);
        sx += row.T;
        sy += ly;
        sxx += row.T * row.T;
        sxy += row.T * ly;
        ++m;
    }
    if (m >= 2) {
        const double denom = static_cast<double>(m) * sxx - sx * sx;
        table.fitted_slope = (static_cast<double>(m) * sxy - sx * sy) / denom;
        table.decay_ok = table.fitted_slope < 0.0;
    }
    return table;
}

double fubini_identity_check(const Trajectory& phi, const Trajectory& X, const DelayMeasure& mu) {
    if (!(phi.grid() == X.grid()))
        throw PreconditionError("fubini_identity_check: phi and X must share a grid");
    const TimeGrid& grid = phi.grid();

    Trajectory Xz = X;
    for (std::size_t idx = 0; idx < grid.n_pre; ++idx) Xz[idx] = 0.0; // zero prehistory

    long double lhs = 0.0L, rhs = 0.0L;
    for (std::size_t k = 0; k < grid.n_main; ++k) {
        const double t = grid.time(grid.main_index(k));
        lhs += static_cast<long double>(Xz.at_main(k)) *
               static_cast<long double>(anticipated_convolution(phi, t, mu, true));
        rhs += static_cast<long double>(phi.at_main(k)) *
               static_cast<long double>(segment_functional(Xz, t, mu));
    }
    return static_cast<double>(std::abs(static_cast<double>(lhs - rhs)) * grid.dt);
}

} // namespace mfdelay
