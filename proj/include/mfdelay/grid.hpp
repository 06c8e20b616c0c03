#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mfdelay/errors.hpp"

namespace mfdelay {

/// Uniform time grid with a prehistory segment.
///
/// Nodes are t_k = (k - n_pre) * dt for k = 0 .. n_pre + n_main - 1, so the
/// grid covers [-delta, T] with node n_pre sitting exactly at time 0. The
/// prehistory segment is the closed interval [-delta, 0]; it shares the node
/// at 0 with the main segment. delta and T must be integer multiples of dt,
/// which guarantees that every delay lookup t + s lands on a node.
struct TimeGrid {
    double dt = 0.0;
    std::size_t n_pre = 0;  // nodes strictly before time 0 (times -delta .. -dt)
    std::size_t n_main = 0; // nodes at times 0 .. T

    std::size_t size() const { return n_pre + n_main; }
    std::size_t n_steps() const { return n_main - 1; }

    double time(std::size_t idx) const {
        return (static_cast<double>(idx) - static_cast<double>(n_pre)) * dt;
    }
    double t_start() const { return n_pre == 0 ? 0.0 : -static_cast<double>(n_pre) * dt; }
    double t_end() const { return static_cast<double>(n_main - 1) * dt; }
    double delta() const { return static_cast<double>(n_pre) * dt; }

    /// Index of the main-segment node k (k = 0 is time 0).
    std::size_t main_index(std::size_t k) const { return n_pre + k; }

    /// Exact node lookup. Throws std::out_of_range when t is not a grid node.
    std::size_t index_of(double t) const;

    /// Largest node index with node time <= t (cadlag evaluation support).
    std::size_t floor_index(double t) const;

    bool operator==(const TimeGrid& other) const {
        return dt == other.dt && n_pre == other.n_pre && n_main == other.n_main;
    }
};

/// Builds the grid for horizon T, step dt and delay span delta.
/// Both T/dt and delta/dt must be integral within 1e-9.
TimeGrid make_grid(double T, double dt, double delta);

/// A scalar path on a TimeGrid, prehistory included. Evaluation between
/// nodes is left-constant (cadlag).
class Trajectory {
public:
    Trajectory() = default;
    explicit Trajectory(const TimeGrid& grid, double fill = 0.0)
        : grid_(grid), values_(grid.size(), fill) {}

    const TimeGrid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }

    double& operator[](std::size_t idx) { return values_[idx]; }
    double operator[](std::size_t idx) const { return values_[idx]; }

    double& at_main(std::size_t k) { return values_[grid_.main_index(k)]; }
    double at_main(std::size_t k) const { return values_[grid_.main_index(k)]; }

    /// Left-constant interpolation; throws std::out_of_range outside the grid span.
    double at_time(double t) const { return values_[grid_.floor_index(t)]; }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

private:
    TimeGrid grid_;
    std::vector<double> values_;
};

/// Writes x0 onto every node with time in [-delta, 0] (the node at 0
/// included); later main nodes are untouched.
void set_prehistory(Trajectory& traj, const std::function<double(double)>& x0);

} // namespace mfdelay
