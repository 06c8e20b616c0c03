#include "mfdelay/hamiltonian.hpp"

#include <cmath>

#include "mfdelay/lsmc_step.hpp"
#include "mfdelay/solution_view.hpp"

namespace mfdelay {

double eval_H(const CoefficientModel& model, const HamiltonianPoint& pt) {
    const CoeffArgs a = pt.args();
    double H = model.f(a) + model.b(a) * pt.p + model.sigma(a) * pt.q + model.g(a) * pt.lambda;
    for (std::size_t j = 0; j < model.jumps.n_marks(); ++j) {
        H += model.gamma(a, model.jumps.marks[j]) * pt.r[j] * model.jumps.weights[j];
    }
    return H;
}

double grad_H(const CoefficientModel& model, const HamiltonianPoint& pt, const DerivKey& key) {
    const CoeffArgs a = pt.args();
    const double fd = model.fd_step;
    double v = model.f.partial(a, key, fd) + model.b.partial(a, key, fd) * pt.p +
               model.sigma.partial(a, key, fd) * pt.q + model.g.partial(a, key, fd) * pt.lambda;
    for (std::size_t j = 0; j < model.jumps.n_marks(); ++j) {
        v += model.gamma.partial(a, model.jumps.marks[j], key, fd) * pt.r[j] *
             model.jumps.weights[j];
    }
    return v;
}

AdjointState AdjointState::from_deterministic(const Trajectory& p_path,
                                              const Trajectory& lambda_path,
                                              std::size_t n_particles, std::size_t n_marks) {
    AdjointState adj;
    const std::size_t n_steps = p_path.grid().n_steps();
    adj.p.assign(n_particles, p_path);
    adj.q.assign(n_particles, std::vector<double>(n_steps, 0.0));
    adj.r.assign(n_particles, std::vector<double>(n_steps * n_marks, 0.0));
    adj.lambda = lambda_path;
    adj.upsilon.assign(n_particles, std::vector<double>(n_steps, 0.0));
    return adj;
}

SolutionView::SolutionView(const CoefficientModel& m, const ParticleEnsemble& e,
                           const BackwardTriple& tr, const ControlProcess& c)
    : model(m), ens(e), triple(tr), pi(c), delay(m.delay, e.grid),
      zero_marks(m.jumps.n_marks(), 0.0), n(e.n_particles()), n_steps(e.grid.n_steps()),
      n_marks(m.jumps.n_marks()) {
    y_means.assign(e.grid.n_main, 0.0);
    for (std::size_t k = 0; k < e.grid.n_main; ++k) {
        double acc = 0.0;
        for (std::size_t p = 0; p < n; ++p) acc += tr.Y[p].at_main(k);
        y_means[k] = acc / static_cast<double>(n);
    }
}

CoeffArgs SolutionView::args_at(std::size_t p, std::size_t k, std::vector<double>& lift_buf) const {
    const std::size_t node = ens.grid.main_index(k);
    delay.lift_all(ens.X[p], node, lift_buf);
    CoeffArgs a;
    a.t = ens.grid.time(node);
    a.x = lift_buf;
    a.m = ens.mean_lift[k];
    a.m_phi = ens.mean_phi[k];
    a.y = triple.Y[p][node];
    a.y_mean = y_means[k];
    if (k < n_steps) {
        a.z = triple.Z[p][k];
        a.k = std::span<const double>(&triple.K[p][k * n_marks], n_marks);
    } else {
        a.z = 0.0;
        a.k = zero_marks;
    }
    a.u = pi.at_step(k);
    return a;
}

double SolutionView::dH(const CoeffArgs& a, const DerivKey& key, double p_val, double q_val,
                        const double* r_vals, double lambda_val) const {
    const double fd = model.fd_step;
    double v = model.f.partial(a, key, fd) + model.b.partial(a, key, fd) * p_val +
               model.sigma.partial(a, key, fd) * q_val +
               model.g.partial(a, key, fd) * lambda_val;
    for (std::size_t j = 0; j < n_marks; ++j) {
        v += model.gamma.partial(a, model.jumps.marks[j], key, fd) * r_vals[j] *
             model.jumps.weights[j];
    }
    return v;
}

Trajectory solve_lambda_forward(const CoefficientModel& model, const BackwardTriple& triple,
                                const ParticleEnsemble& ens, const ControlProcess& pi) {
    const TimeGrid& grid = ens.grid;
    const SolutionView sc(model, ens, triple, pi);
    const bool infinite = model.is_infinite();

    Trajectory lambda(grid);
    const double y0 = sc.y_means[0];
    double lam = infinite ? model.h.deriv(y0) : model.h1.deriv(y0);
    for (std::size_t idx = 0; idx <= grid.n_pre; ++idx) lambda[idx] = lam;

    std::vector<double> lift_buf;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        double drift = 0.0;
        for (std::size_t p = 0; p < sc.n; ++p) {
            const CoeffArgs a = sc.args_at(p, k, lift_buf);
            double d = model.f.partial(a, DerivKey::y(), model.fd_step) +
                       lam * model.g.partial(a, DerivKey::y(), model.fd_step);
            if (infinite) {
                d += model.f.partial(a, DerivKey::n(), model.fd_step) +
                     lam * model.g.partial(a, DerivKey::n(), model.fd_step);
            }
            drift += d;
        }
        drift /= static_cast<double>(sc.n);
        lam += grid.dt * drift;
        if (!std::isfinite(lam))
            throw NumericError("lambda path non-finite at step " + std::to_string(k + 1));
        lambda[grid.main_index(k + 1)] = lam;
    }
    return lambda;
}

HamiltonianDerivativePaths build_hamiltonian_derivative_paths(const CoefficientModel& model,
                                                              const ParticleEnsemble& ens,
                                                              const BackwardTriple& triple,
                                                              const AdjointState& adj,
                                                              const ControlProcess& pi) {
    const TimeGrid& grid = ens.grid;
    const SolutionView sc(model, ens, triple, pi);
    const std::size_t n_lifts = model.n_lifts();
    const bool infinite = model.is_infinite();

    HamiltonianDerivativePaths paths;
    paths.dH_dx.assign(n_lifts,
                       std::vector<std::vector<double>>(grid.n_main, std::vector<double>(sc.n)));
    if (infinite) {
        paths.dH_dm_avg.assign(n_lifts, std::vector<double>(grid.n_main, 0.0));
    } else {
        paths.dH_dmphi_avg.assign(grid.n_main, 0.0);
        paths.phi_prime.assign(grid.n_main, std::vector<double>(sc.n));
    }

    std::vector<double> lift_buf;
    for (std::size_t k = 0; k < grid.n_main; ++k) {
        const std::size_t node = grid.main_index(k);
        const double lam = adj.lambda[node];
        for (std::size_t p = 0; p < sc.n; ++p) {
            const CoeffArgs a = sc.args_at(p, k, lift_buf);
            const double p_val = adj.p[p][node];
            const double q_val = k < sc.n_steps ? adj.q[p][k] : 0.0;
            const double* r_vals =
                k < sc.n_steps ? &adj.r[p][k * sc.n_marks] : sc.zero_marks.data();

            for (std::size_t i = 0; i < n_lifts; ++i)
                paths.dH_dx[i][k][p] = sc.dH(a, DerivKey::x(i), p_val, q_val, r_vals, lam);
            if (infinite) {
                for (std::size_t i = 0; i < n_lifts; ++i)
                    paths.dH_dm_avg[i][k] +=
                        sc.dH(a, DerivKey::m(i), p_val, q_val, r_vals, lam);
            } else {
                paths.dH_dmphi_avg[k] +=
                    sc.dH(a, DerivKey::m_phi(), p_val, q_val, r_vals, lam);
                paths.phi_prime[k][p] = model.Phi.deriv(ens.X[p][node]);
            }
        }
        const double inv_n = 1.0 / static_cast<double>(sc.n);
        if (infinite) {
            for (std::size_t i = 0; i < n_lifts; ++i) paths.dH_dm_avg[i][k] *= inv_n;
        } else {
            paths.dH_dmphi_avg[k] *= inv_n;
        }
    }
    return paths;
}

std::vector<double> compute_upsilon(const CoefficientModel& model,
                                    const HamiltonianDerivativePaths& paths,
                                    const TimeGrid& grid, std::size_t node_k) {
    const CompiledDelay delay(model.delay, grid);
    const std::size_t n_lifts = model.n_lifts();
    const bool infinite = model.is_infinite();
    const std::size_t n = paths.dH_dx.at(0).at(0).size();
    const long last = static_cast<long>(grid.n_main) - 1;

    std::vector<double> ups(n, 0.0);
    for (std::size_t i = 0; i < n_lifts; ++i) {
        const auto& shifts = delay.shifts[i];
        const auto& masses = delay.masses[i];
        for (std::size_t a = 0; a < shifts.size(); ++a) {
            const long uk = static_cast<long>(node_k) - shifts[a]; // shifts <= 0
            if (uk > last) continue;                               // horizon clamp
            const auto u = static_cast<std::size_t>(uk);
            const double mf = infinite ? paths.dH_dm_avg[i][u] : 0.0;
            for (std::size_t p = 0; p < n; ++p)
                ups[p] += masses[a] * (paths.dH_dx[i][u][p] + mf);
        }
    }
    if (infinite) return ups;

    // Finite-horizon orientation: leading minus, mean-field term at the
    // current time through Phi'.
    for (std::size_t p = 0; p < n; ++p)
        ups[p] = -ups[p] - paths.dH_dmphi_avg[node_k] * paths.phi_prime[node_k][p];
    return ups;
}

AdjointState solve_adjoint_backward(const CoefficientModel& model, const ParticleEnsemble& ens,
                                    const BackwardTriple& triple, const Trajectory& lambda,
                                    const ControlProcess& pi, const RegressionBasis& basis) {
    const TimeGrid& grid = ens.grid;
    const SolutionView sc(model, ens, triple, pi);
    const std::size_t n = sc.n;
    const std::size_t n_steps = sc.n_steps;
    const std::size_t n_marks = sc.n_marks;
    const std::size_t n_lifts = model.n_lifts();
    const double dt = grid.dt;
    const bool infinite = model.is_infinite();
    const NoiseEnsemble& noise = *ens.noise;

    AdjointState adj;
    adj.lambda = lambda;
    adj.p.assign(n, Trajectory(grid));
    adj.q.assign(n, std::vector<double>(n_steps, 0.0));
    adj.r.assign(n, std::vector<double>(n_steps * n_marks, 0.0));
    adj.upsilon.assign(n, std::vector<double>(n_steps, 0.0));

    // Terminal condition.
    const std::size_t last_node = grid.main_index(n_steps);
    if (infinite) {
        for (std::size_t p = 0; p < n; ++p) adj.p[p][last_node] = 0.0;
    } else {
        double n_psi = 0.0;
        for (std::size_t p = 0; p < n; ++p) n_psi += model.psi.value(ens.X[p][last_node]);
        n_psi /= static_cast<double>(n);
        const double a_lam = model.a * lambda[last_node];
        for (std::size_t p = 0; p < n; ++p) {
            const double xT = ens.X[p][last_node];
            adj.p[p][last_node] = a_lam + model.h2.dx(xT, n_psi) +
                                  model.h2.dn(xT, n_psi) * model.psi.deriv(xT);
        }
    }

    // Cross-sectional averages of dH/dm_i at completed nodes (infinite mode).
    std::vector<std::vector<double>> dHdm_avg;
    std::vector<double> lift_buf;
    const auto fill_node_average = [&](std::size_t k) {
        if (!infinite) return;
        const std::size_t node = grid.main_index(k);
        const double lam = lambda[node];
        for (std::size_t i = 0; i < n_lifts; ++i) {
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                const CoeffArgs a = sc.args_at(p, k, lift_buf);
                const double q_val = k < n_steps ? adj.q[p][k] : 0.0;
                const double* r_vals =
                    k < n_steps ? &adj.r[p][k * n_marks] : sc.zero_marks.data();
                acc += sc.dH(a, DerivKey::m(i), adj.p[p][node], q_val, r_vals, lam);
            }
            dHdm_avg[i][k] = acc / static_cast<double>(n);
        }
    };
    if (infinite) {
        dHdm_avg.assign(n_lifts, std::vector<double>(grid.n_main, 0.0));
        fill_node_average(n_steps);
    }

    std::vector<double> next_p(n), cont(n), target(n), fitted(n);
    MartingaleStep ms;
    std::vector<double> cur_dHdx(n_lifts * n), cur_dHdm_avg(n_lifts, 0.0);
    std::vector<double> xs(n);
    std::vector<std::vector<double>> lifts(n, std::vector<double>(n_lifts));

    for (std::size_t k = n_steps; k-- > 0;) {
        const std::size_t node = grid.main_index(k);
        const double t = grid.time(node);
        const double lam = lambda[node];

        for (std::size_t p = 0; p < n; ++p) {
            xs[p] = ens.X[p][node];
            sc.delay.lift_all(ens.X[p], node, lifts[p]);
        }
        const CrossSectionRegression reg = make_step_regression(basis, xs, lifts, t);

        for (std::size_t p = 0; p < n; ++p) next_p[p] = adj.p[p][node + 1];
        backward_martingale_step(reg, noise, k, next_p, ms);
        cont = ms.cont;
        for (std::size_t p = 0; p < n; ++p) {
            adj.q[p][k] = ms.z[p];
            for (std::size_t j = 0; j < n_marks; ++j)
                adj.r[p][k * n_marks + j] = ms.k[p * n_marks + j];
        }

        // Current-node derivative values with the fitted continuation of p.
        double cur_mphi_avg = 0.0;
        for (std::size_t i = 0; i < n_lifts; ++i) cur_dHdm_avg[i] = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            const CoeffArgs a = sc.args_at(p, k, lift_buf);
            const double* r_row = &adj.r[p][k * n_marks];
            for (std::size_t i = 0; i < n_lifts; ++i)
                cur_dHdx[i * n + p] = sc.dH(a, DerivKey::x(i), cont[p], adj.q[p][k], r_row, lam);
            if (infinite) {
                for (std::size_t i = 0; i < n_lifts; ++i)
                    cur_dHdm_avg[i] += sc.dH(a, DerivKey::m(i), cont[p], adj.q[p][k], r_row, lam);
            } else {
                cur_mphi_avg += sc.dH(a, DerivKey::m_phi(), cont[p], adj.q[p][k], r_row, lam);
            }
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        cur_mphi_avg *= inv_n;
        for (auto& v : cur_dHdm_avg) v *= inv_n;

        // Driver assembly: convolve dH/dx (+ E[dH/dm] in infinite mode) over
        // the look-ahead window, clamped at the horizon.
        const long last = static_cast<long>(grid.n_main) - 1;
        for (std::size_t p = 0; p < n; ++p) {
            double ups = 0.0;
            for (std::size_t i = 0; i < n_lifts; ++i) {
                const auto& shifts = sc.delay.shifts[i];
                const auto& masses = sc.delay.masses[i];
                for (std::size_t a = 0; a < shifts.size(); ++a) {
                    const long uk = static_cast<long>(k) - shifts[a];
                    if (uk > last) continue;
                    const auto u = static_cast<std::size_t>(uk);
                    double dval;
                    double mf = 0.0;
                    if (u == k) {
                        dval = cur_dHdx[i * n + p];
                        if (infinite) mf = cur_dHdm_avg[i];
                    } else {
                        const CoeffArgs a_u = sc.args_at(p, u, lift_buf);
                        const double q_val = u < n_steps ? adj.q[p][u] : 0.0;
                        const double* r_vals =
                            u < n_steps ? &adj.r[p][u * n_marks] : sc.zero_marks.data();
                        dval = sc.dH(a_u, DerivKey::x(i), adj.p[p][grid.main_index(u)], q_val,
                                     r_vals, lambda[grid.main_index(u)]);
                        if (infinite) mf = dHdm_avg[i][u];
                    }
                    ups += masses[a] * (dval + mf);
                }
            }
            if (!infinite) {
                ups += cur_mphi_avg * model.Phi.deriv(ens.X[p][node]);
            }
            adj.upsilon[p][k] = ups;
            double cv = next_p[p] - adj.q[p][k] * noise.db(p, k);
            for (std::size_t j = 0; j < n_marks; ++j)
                cv -= adj.r[p][k * n_marks + j] * noise.compensated(p, k, j);
            target[p] = cv + dt * ups;
        }

        reg.fit_into(target, fitted);
        for (std::size_t p = 0; p < n; ++p) {
            adj.p[p][node] = fitted[p];
            if (!std::isfinite(fitted[p]))
                throw NumericError("costate non-finite at step " + std::to_string(k));
        }
        fill_node_average(k);
    }
    return adj;
}

AdjointDecayNorms adjoint_decay_norms(const AdjointState& adj, const JumpSpec& jumps,
                                      double kappa) {
    AdjointDecayNorms out;
    if (adj.p.empty()) return out;
    const TimeGrid& g = adj.p[0].grid();
    const std::size_t n = adj.p.size();
    const std::size_t n_marks = jumps.n_marks();
    const double dt = g.dt;

    std::vector<double> cumulative(g.n_main, 0.0);
    double sup_p = 0.0, qr = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        double run = 0.0;
        double sup_path = 0.0;
        for (std::size_t k = 0; k < g.n_main; ++k) {
            const double t = g.time(g.main_index(k));
            const double w = std::exp(kappa * t);
            const double pv = adj.p[p].at_main(k);
            sup_path = std::max(sup_path, w * pv * pv);
            if (k < g.n_steps()) {
                double r2 = 0.0;
                for (std::size_t j = 0; j < n_marks; ++j) {
                    const double rv = adj.r[p][k * n_marks + j];
                    r2 += rv * rv * jumps.weights[j];
                }
                qr += w * (adj.q[p][k] * adj.q[p][k] + r2) * dt;
                run += w * pv * pv * dt;
            }
            cumulative[k] += run;
        }
        sup_p += sup_path;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    out.sup_weighted_p = sup_p * inv_n;
    out.weighted_qr_integral = qr * inv_n;
    for (std::size_t k = 0; k < g.n_main; ++k) {
        const double lam = adj.lambda.at_main(k);
        if (k < g.n_steps()) out.lambda_l2 += lam * lam * dt;
    }
    if (g.n_main >= 8) {
        const std::size_t i_half = (g.n_main - 1) / 2;
        const std::size_t i_3q = (3 * (g.n_main - 1)) / 4;
        const std::size_t i_end = g.n_main - 1;
        const double q3 = (cumulative[i_3q] - cumulative[i_half]) * inv_n;
        const double q4 = (cumulative[i_end] - cumulative[i_3q]) * inv_n;
        out.divergence_flag = q4 > 1.5 * q3 + 1e-12;
    }
    return out;
}

std::vector<std::vector<double>> control_derivative_path(const CoefficientModel& model,
                                                         const ParticleEnsemble& ens,
                                                         const BackwardTriple& triple,
                                                         const AdjointState& adj,
                                                         const ControlProcess& pi) {
    const SolutionView sc(model, ens, triple, pi);
    std::vector<std::vector<double>> out(sc.n, std::vector<double>(sc.n_steps, 0.0));
    std::vector<double> lift_buf;
    for (std::size_t p = 0; p < sc.n; ++p) {
        for (std::size_t k = 0; k < sc.n_steps; ++k) {
            const std::size_t node = ens.grid.main_index(k);
            const CoeffArgs a = sc.args_at(p, k, lift_buf);
            out[p][k] = sc.dH(a, DerivKey::u(), adj.p[p][node], adj.q[p][k],
                              &adj.r[p][k * sc.n_marks], adj.lambda[node]);
        }
    }
    return out;
}

} // namespace mfdelay
