#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mba/state.hpp"

namespace mba {

/// Uniform 1D grid. Periodic grids exclude the right end point.
struct Grid {
    Eigen::Index n = 0;
    double length = 2.0 * std::numbers::pi;
    bool periodic = true;

    Grid() = default;
    Grid(Eigen::Index n_points, double domain_length, bool is_periodic)
        : n(n_points), length(domain_length), periodic(is_periodic) {
        if (n < 2) throw ConfigError("grid needs at least two points");
        if (!(length > 0.0)) throw ConfigError("grid length must be positive");
    }

    double dx() const { return periodic ? length / static_cast<double>(n) : length / static_cast<double>(n - 1); }
    double x(Eigen::Index i) const { return static_cast<double>(i) * dx(); }
    Vector coordinates() const {
        Vector c(n);
        for (Eigen::Index i = 0; i < n; ++i) c[i] = x(i);
        return c;
    }
    /// Index of the grid point nearest to position `pos`.
    Eigen::Index nearest(double pos) const {
        auto i = static_cast<Eigen::Index>(std::lround(pos / dx()));
        return periodic ? ((i % n) + n) % n : std::clamp<Eigen::Index>(i, 0, n - 1);
    }
};

struct TimeGrid {
    int n_steps = 0;
    double dt = 0.0;
    double t0 = 0.0;

    double t_end() const { return t0 + n_steps * dt; }
    double time(int k) const { return t0 + k * dt; }
};

namespace detail {
inline void check_stencil(const Grid& grid, int order) {
    if (order != 2 && order != 4) throw ConfigError("derivative order must be 2 or 4");
    const Eigen::Index needed = order + 1;
    if (grid.n < needed)
        throw ConfigError("grid of " + std::to_string(grid.n) + " points too small for order " +
                          std::to_string(order) + " stencil");
}
}  // namespace detail

/// Central first derivative of the requested order. Non-periodic grids use
/// one-sided stencils of the same order at the boundary points.
template <typename Derived>
VectorX<typename Derived::Scalar> ddx(const Eigen::MatrixBase<Derived>& f, const Grid& grid, int order) {
    using Scalar = typename Derived::Scalar;
    if (f.size() != grid.n) throw ContractError("field length differs from grid");
    detail::check_stencil(grid, order);
    const Eigen::Index n = grid.n;
    const Scalar inv_dx = Scalar(1) / Scalar(grid.dx());
    VectorX<Scalar> d(n);

    if (grid.periodic) {
        auto at = [&](Eigen::Index i) { return f[((i % n) + n) % n]; };
        if (order == 2) {
            for (Eigen::Index i = 0; i < n; ++i) d[i] = (at(i + 1) - at(i - 1)) * (Scalar(0.5) * inv_dx);
        } else {
            const Scalar c = inv_dx / Scalar(12);
            for (Eigen::Index i = 0; i < n; ++i)
                d[i] = (at(i - 2) - Scalar(8) * at(i - 1) + Scalar(8) * at(i + 1) - at(i + 2)) * c;
        }
        return d;
    }

    if (order == 2) {
        const Scalar c = Scalar(0.5) * inv_dx;
        d[0] = (Scalar(-3) * f[0] + Scalar(4) * f[1] - f[2]) * c;
        for (Eigen::Index i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) * c;
        d[n - 1] = (Scalar(3) * f[n - 1] - Scalar(4) * f[n - 2] + f[n - 3]) * c;
        return d;
    }

    const Scalar c = inv_dx / Scalar(12);
    d[0] = (Scalar(-25) * f[0] + Scalar(48) * f[1] - Scalar(36) * f[2] + Scalar(16) * f[3] - Scalar(3) * f[4]) * c;
    d[1] = (Scalar(-3) * f[0] - Scalar(10) * f[1] + Scalar(18) * f[2] - Scalar(6) * f[3] + f[4]) * c;
    for (Eigen::Index i = 2; i + 2 < n; ++i)
        d[i] = (f[i - 2] - Scalar(8) * f[i - 1] + Scalar(8) * f[i + 1] - f[i + 2]) * c;
    d[n - 2] = (Scalar(3) * f[n - 1] + Scalar(10) * f[n - 2] - Scalar(18) * f[n - 3] + Scalar(6) * f[n - 4] -
                f[n - 5]) *
               c;
    d[n - 1] = (Scalar(25) * f[n - 1] - Scalar(48) * f[n - 2] + Scalar(36) * f[n - 3] - Scalar(16) * f[n - 4] +
                Scalar(3) * f[n - 5]) *
               c;
    return d;
}

/// Second derivative as the first derivative applied twice (not a compact stencil).
template <typename Derived>
VectorX<typename Derived::Scalar> d2dx2(const Eigen::MatrixBase<Derived>& f, const Grid& grid, int order) {
    return ddx(ddx(f, grid, order), grid, order);
}

/// Classical four-stage Runge-Kutta step of y' = rhs(t, y). Negative dt
/// integrates backwards.
template <typename Rhs, typename Scalar>
VectorX<Scalar> rk4_step(Rhs&& rhs, const VectorX<Scalar>& y, Scalar t, Scalar dt) {
    if (dt == Scalar(0)) throw ContractError("time step must be nonzero");
    auto stage = [&](Scalar ts, const VectorX<Scalar>& ys, int k) {
        VectorX<Scalar> r = rhs(ts, ys);
        if (!r.allFinite()) throw NumericalError("non-finite Runge-Kutta stage", k);
        return r;
    };
    const Scalar half = dt / Scalar(2);
    const VectorX<Scalar> k1 = stage(t, y, 1);
    const VectorX<Scalar> k2 = stage(t + half, y + half * k1, 2);
    const VectorX<Scalar> k3 = stage(t + half, y + half * k2, 3);
    const VectorX<Scalar> k4 = stage(t + dt, y + dt * k3, 4);
    return y + (dt / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
}

/// CFL-limited step dt = cfl * dx / u_max.
inline double cfl_dt(double u_max, double dx, double cfl) {
    if (!(u_max > 0.0)) throw ConfigError("CFL speed must be positive");
    if (!(cfl > 0.0)) throw ConfigError("CFL number must be positive");
    if (!(dx > 0.0)) throw ConfigError("grid spacing must be positive");
    return cfl * dx / u_max;
}

}  // namespace mba
