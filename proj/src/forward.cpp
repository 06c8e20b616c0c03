#include "mfdelay/forward.hpp"

#include <cmath>
#include <sstream>

#include "mfdelay/parallel.hpp"

namespace mfdelay {

CompiledDelay::CompiledDelay(const DelaySpec& spec, const TimeGrid& grid) {
    shifts.reserve(spec.measures.size());
    masses.reserve(spec.measures.size());
    for (const auto& mu : spec.measures) {
        shifts.push_back(mu.shifts_on(grid));
        masses.push_back(mu.masses());
    }
}

ParticleEnsemble simulate_forward(const CoefficientModel& model, const ControlProcess& pi,
                                  std::shared_ptr<const NoiseEnsemble> noise,
                                  const TimeGrid& grid) {
    if (!noise) throw PreconditionError("simulate_forward: noise ensemble required");
    if (!(noise->grid() == grid))
        throw PreconditionError("simulate_forward: noise sampled on a different grid");
    if (!(pi.grid() == grid))
        throw PreconditionError("simulate_forward: control defined on a different grid");

    const std::size_t n_particles = noise->n_particles();
    const std::size_t n_steps = grid.n_steps();
    const std::size_t n_lifts = model.n_lifts();
    const std::size_t n_marks = model.jumps.n_marks();
    const double dt = grid.dt;

    ParticleEnsemble ens;
    ens.grid = grid;
    ens.noise = std::move(noise);
    ens.X.assign(n_particles, Trajectory(grid));
    ens.mean_lift.assign(grid.n_main, std::vector<double>(n_lifts, 0.0));
    ens.mean_phi.assign(grid.n_main, 0.0);

    for (auto& traj : ens.X) set_prehistory(traj, model.x0);

    const CompiledDelay delay(model.delay, grid);

    // Per-particle lift scratch, filled in parallel, reduced serially.
    std::vector<double> lifts(n_particles * n_lifts);
    std::vector<double> phis(n_particles);

    const std::size_t threads = worker_count();
    for (std::size_t k = 0; k <= n_steps; ++k) {
        const std::size_t node = grid.main_index(k);

        parallel_for(n_particles, threads, [&](std::size_t p) {
            for (std::size_t i = 0; i < n_lifts; ++i)
                lifts[p * n_lifts + i] = delay.lift(ens.X[p], node, i);
            phis[p] = model.Phi.value(ens.X[p][node]);
        });
        for (std::size_t i = 0; i < n_lifts; ++i) {
            double acc = 0.0;
            for (std::size_t p = 0; p < n_particles; ++p) acc += lifts[p * n_lifts + i];
            ens.mean_lift[k][i] = acc / static_cast<double>(n_particles);
        }
        {
            double acc = 0.0;
            for (std::size_t p = 0; p < n_particles; ++p) acc += phis[p];
            ens.mean_phi[k] = acc / static_cast<double>(n_particles);
        }
        if (k == n_steps) break;

        const double t = grid.time(node);
        const double u = pi.at_step(k);

        parallel_for(n_particles, threads, [&](std::size_t p) {
            CoeffArgs a;
            a.t = t;
            a.x = std::span<const double>(&lifts[p * n_lifts], n_lifts);
            a.m = ens.mean_lift[k];
            a.m_phi = ens.mean_phi[k];
            a.u = u;

            const double xk = ens.X[p][node];
            double next = xk + model.b(a) * dt + model.sigma(a) * ens.noise->db(p, k);
            for (std::size_t j = 0; j < n_marks; ++j) {
                next += model.gamma(a, model.jumps.marks[j]) * ens.noise->compensated(p, k, j);
            }
            ens.X[p][node + 1] = next;
        });

        for (std::size_t p = 0; p < n_particles; ++p) {
            if (!std::isfinite(ens.X[p][node + 1])) {
                std::ostringstream os;
                os << "forward state non-finite for particle " << p << " at step " << k + 1
                   << " (t = " << grid.time(node + 1) << ")";
                throw NumericError(os.str());
            }
        }
    }
    return ens;
}

MeanSquareNorms mean_square_norms(const ParticleEnsemble& ens, double kappa) {
    const TimeGrid& g = ens.grid;
    const std::size_t n_particles = ens.n_particles();
    const double dt = g.dt;

    MeanSquareNorms out;
    // Cumulative E[ int_0^t X^2 ds ] sampled at the quarter points to detect
    // superlinear growth over the final quarter of the horizon.
    std::vector<double> cumulative(g.n_main, 0.0);

    double l2 = 0.0, supw = 0.0, intw = 0.0;
    for (std::size_t p = 0; p < n_particles; ++p) {
        double run = 0.0;
        double sup_p = 0.0;
        for (std::size_t k = 0; k < g.n_main; ++k) {
            const double t = g.time(g.main_index(k));
            const double x = ens.X[p].at_main(k);
            const double x2 = x * x;
            const double w = std::exp(kappa * t);
            sup_p = std::max(sup_p, w * x2);
            if (k + 1 < g.n_main) {
                run += x2 * dt;
                intw += w * x2 * dt;
            }
            cumulative[k] += run;
        }
        l2 += run;
        supw += sup_p;
    }
    const double inv_n = 1.0 / static_cast<double>(n_particles);
    out.l2_time_integral = l2 * inv_n;
    out.sup_weighted = supw * inv_n;
    out.weighted_integral = intw * inv_n;

    // Compare the last-quarter increment of the running integral with the
    // preceding quarter; a linear-in-time integrand keeps them equal.
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

} // namespace mfdelay
