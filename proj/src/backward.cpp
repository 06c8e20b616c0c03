#include "mfdelay/backward.hpp"

#include <cmath>

#include "mfdelay/lsmc_step.hpp"

namespace mfdelay {

namespace {

// Shared scaffolding for the backward sweeps: per-node particle states and
// lifted states, plus the factored step regression.
struct StepContext {
    std::vector<double> x;                    // X_p(t_k)
    std::vector<std::vector<double>> lifts;   // [particle][measure]

    void load(const ParticleEnsemble& ens, const CompiledDelay& delay, std::size_t k) {
        const std::size_t n = ens.n_particles();
        const std::size_t node = ens.grid.main_index(k);
        x.resize(n);
        if (lifts.size() != n) lifts.resize(n);
        for (std::size_t p = 0; p < n; ++p) {
            x[p] = ens.X[p][node];
            delay.lift_all(ens.X[p], node, lifts[p]);
        }
    }
};

} // namespace

BackwardTriple solve_backward(const CoefficientModel& model, const ParticleEnsemble& ens,
                              const ControlProcess& pi, const RegressionBasis& basis) {
    const TimeGrid& grid = ens.grid;
    const std::size_t n = ens.n_particles();
    const std::size_t n_steps = grid.n_steps();
    const std::size_t n_marks = model.jumps.n_marks();
    const double dt = grid.dt;
    const NoiseEnsemble& noise = *ens.noise;

    BackwardTriple tr;
    tr.Y.assign(n, Trajectory(grid));
    tr.Z.assign(n, std::vector<double>(n_steps, 0.0));
    tr.K.assign(n, std::vector<double>(n_steps * n_marks, 0.0));

    // Terminal condition Y(T) = a X(T), exact per particle.
    const std::size_t last = grid.main_index(n_steps);
    for (std::size_t p = 0; p < n; ++p) tr.Y[p][last] = model.a * ens.X[p][last];

    const CompiledDelay delay(model.delay, grid);
    StepContext ctx;
    MartingaleStep ms;
    std::vector<double> next_y(n);

    for (std::size_t k = n_steps; k-- > 0;) {
        const std::size_t node = grid.main_index(k);
        const double t = grid.time(node);
        ctx.load(ens, delay, k);
        const CrossSectionRegression reg = make_step_regression(basis, ctx.x, ctx.lifts, t);

        for (std::size_t p = 0; p < n; ++p) next_y[p] = tr.Y[p][node + 1];
        backward_martingale_step(reg, noise, k, next_y, ms);
        for (std::size_t p = 0; p < n; ++p) {
            tr.Z[p][k] = ms.z[p];
            for (std::size_t j = 0; j < n_marks; ++j)
                tr.K[p][k * n_marks + j] = ms.k[p * n_marks + j];
        }

        double y_mean = 0.0;
        for (std::size_t p = 0; p < n; ++p) y_mean += ms.cont[p];
        y_mean /= static_cast<double>(n);

        const double u = pi.at_step(k);
        for (std::size_t p = 0; p < n; ++p) {
            CoeffArgs a;
            a.t = t;
            a.x = ctx.lifts[p];
            a.m = ens.mean_lift[k];
            a.m_phi = ens.mean_phi[k];
            a.y = ms.cont[p];
            a.y_mean = y_mean;
            a.z = tr.Z[p][k];
            a.k = std::span<const double>(&tr.K[p][k * n_marks], n_marks);
            a.u = u;
            tr.Y[p][node] = ms.cont[p] + model.g(a) * dt;
            if (!std::isfinite(tr.Y[p][node]))
                throw NumericError("backward value non-finite at step " + std::to_string(k));
        }
    }
    return tr;
}

double bsde_consistency_check(const BackwardTriple& triple, const CoefficientModel& model,
                              const ParticleEnsemble& ens, const ControlProcess& pi,
                              std::size_t t_node, std::size_t T_node,
                              const RegressionBasis& basis) {
    const TimeGrid& grid = ens.grid;
    if (t_node > T_node || T_node >= grid.n_main)
        throw PreconditionError("bsde_consistency_check: need t <= T' within the main grid");

    const std::size_t n = ens.n_particles();
    const std::size_t n_marks = model.jumps.n_marks();
    const double dt = grid.dt;

    // Per-particle gap Y(t) - Y(T') - sum_{t <= s < T'} g ds along the solved
    // paths; its projection on F_t-measurable features estimates the drift
    // mismatch E[gap | F_t].
    std::vector<double> gap(n, 0.0);
    const CompiledDelay delay(model.delay, grid);
    std::vector<double> lift_buf;

    std::vector<double> y_means(grid.n_main, 0.0);
    for (std::size_t k = 0; k < grid.n_main; ++k) {
        double acc = 0.0;
        for (std::size_t q = 0; q < n; ++q) acc += triple.Y[q].at_main(k);
        y_means[k] = acc / static_cast<double>(n);
    }

    for (std::size_t p = 0; p < n; ++p) {
        double acc = 0.0;
        for (std::size_t k = t_node; k < T_node; ++k) {
            const std::size_t node = grid.main_index(k);
            delay.lift_all(ens.X[p], node, lift_buf);

            CoeffArgs a;
            a.t = grid.time(node);
            a.x = lift_buf;
            a.m = ens.mean_lift[k];
            a.m_phi = ens.mean_phi[k];
            a.y = triple.Y[p][node];
            a.y_mean = y_means[k];
            a.z = triple.Z[p][k];
            a.k = std::span<const double>(&triple.K[p][k * n_marks], n_marks);
            a.u = pi.at_step(k);
            acc += model.g(a) * dt;
        }
        gap[p] = triple.Y[p][grid.main_index(t_node)] - triple.Y[p][grid.main_index(T_node)] - acc;
    }

    StepContext ctx;
    ctx.load(ens, delay, t_node);
    const CrossSectionRegression reg =
        make_step_regression(basis, ctx.x, ctx.lifts, grid.time(grid.main_index(t_node)));
    const std::vector<double> fitted = reg.fit(gap);

    double rms = 0.0;
    for (double v : fitted) rms += v * v;
    return std::sqrt(rms / static_cast<double>(n));
}

} // namespace mfdelay
