#pragma once

#include <functional>
#include <optional>

#include "mba/discretization.hpp"

namespace mba {

/// Autonomous spatial operator q -> rhs(q) on flat state vectors.
using RhsFunction = std::function<Vector(const Vector&)>;

// ---------------------------------------------------------------------------
// Burgers

struct BurgersParams {
    double mu = 0.0;
    Grid grid;
    int order = 4;
};

/// du/dt = -d/dx(u^2/2) + mu d2/dx2 u, flux form.
Vector burgers_rhs(const Vector& u, const BurgersParams& p);

struct BurgersSplit {
    Vector transport;
    Vector friction;
};
BurgersSplit burgers_split_rhs(const Vector& u, const BurgersParams& p);
Vector burgers_transport_rhs(const Vector& u, const BurgersParams& p);
Vector burgers_friction_rhs(const Vector& u, const BurgersParams& p);

/// Continuous Burgers adjoint written as du*/dt = -u0 du*/dx - mu d2u*/dx2,
/// integrated backwards with the primal snapshot u0.
Vector burgers_adjoint_analytic_rhs(const Vector& ustar, const Vector& u0, const BurgersParams& p);

// ---------------------------------------------------------------------------
// Euler in primitive variables (rho, u, p)

enum class EulerBoundary { Periodic, OpenSponge };

struct SpongeProfile {
    Vector sigma;            ///< damping rate per grid point
    Vector reference_state;  ///< flat (rho, u, p) state the sponge relaxes toward
    double fraction = 0.1;

    /// Quadratic ramp from 0 at the interior edge to `sigma_max` at each
    /// boundary, covering `fraction` of the domain on both sides.
    static SpongeProfile quadratic(const Grid& grid, const Vector& reference_state, double sigma_max,
                                   double fraction = 0.1);
};

struct PressureSource {
    double frequency = 0.75;
    double location = 0.0;
    double amplitude = 5e-4;
    double width_cells = 4.0;  ///< Gaussian width in grid spacings
};

struct EulerParams {
    double gamma = 1.4;
    Grid grid;
    int order = 4;
    EulerBoundary boundary = EulerBoundary::Periodic;
    std::optional<SpongeProfile> sponge;
    std::optional<PressureSource> forcing;
};

inline constexpr int kEulerFields = 3;

/// Periodic Euler equations (mass, momentum divided by rho, pressure).
Vector euler_rhs(const Vector& q, const EulerParams& p);

/// Open-boundary Euler: interior central differences, non-reflecting
/// characteristic closure at both end points, and sponge relaxation.
/// The pressure source is not included; see the overload taking t.
Vector euler_open_rhs(const Vector& q, const EulerParams& p);
Vector euler_open_rhs(const Vector& q, const EulerParams& p, double t);

/// amplitude * sin(2 pi f t) * exp(-((x - x_s)/(width dx))^2)
Vector pressure_source_eval(const PressureSource& src, const Grid& grid, double t);

/// Flux Jacobian of the linearized Euler equations about a uniform state,
/// rows and columns ordered (rho, u, p).
Eigen::Matrix3d lin_euler_matrix(double rho0, double u0, double p0, double gamma);

/// Uniform state with the given primitive values.
Vector uniform_euler_state(const Grid& grid, double rho0, double u0, double p0);

}  // namespace mba
