#include "mfdelay/lsmc_step.hpp"

namespace mfdelay {

void backward_martingale_step(const CrossSectionRegression& reg, const NoiseEnsemble& noise,
                              std::size_t step, std::span<const double> next,
                              MartingaleStep& out) {
    const std::size_t n = next.size();
    const std::size_t n_marks = noise.jumps().n_marks();
    const double dt = noise.grid().dt;

    out.cont.resize(n);
    out.z.resize(n);
    out.k.resize(n * n_marks);

    std::vector<double> target(n), stage1(n);

    reg.fit_into(next, out.cont);

    // diffusion loading, two-stage
    for (std::size_t p = 0; p < n; ++p)
        target[p] = (next[p] - out.cont[p]) * noise.db(p, step);
    reg.fit_into(target, stage1);
    for (std::size_t p = 0; p < n; ++p) {
        const double db = noise.db(p, step);
        target[p] = (next[p] - out.cont[p]) * db - (stage1[p] / dt) * (db * db - dt);
    }
    reg.fit_into(target, out.z);
    for (std::size_t p = 0; p < n; ++p) out.z[p] /= dt;

    // jump loadings per mark, two-stage against the compensated variance w dt
    for (std::size_t j = 0; j < n_marks; ++j) {
        const double wdt = noise.jumps().weights[j] * dt;
        for (std::size_t p = 0; p < n; ++p)
            target[p] = (next[p] - out.cont[p]) * noise.compensated(p, step, j);
        reg.fit_into(target, stage1);
        for (std::size_t p = 0; p < n; ++p) {
            const double cj = noise.compensated(p, step, j);
            target[p] = (next[p] - out.cont[p]) * cj - (stage1[p] / wdt) * (cj * cj - wdt);
        }
        reg.fit_into(target, stage1);
        for (std::size_t p = 0; p < n; ++p) out.k[p * n_marks + j] = stage1[p] / wdt;
    }

    // continuation refit with the martingale part as a control variate
    for (std::size_t p = 0; p < n; ++p) {
        double cv = next[p] - out.z[p] * noise.db(p, step);
        for (std::size_t j = 0; j < n_marks; ++j)
            cv -= out.k[p * n_marks + j] * noise.compensated(p, step, j);
        target[p] = cv;
    }
    reg.fit_into(target, out.cont);
}

} // namespace mfdelay
