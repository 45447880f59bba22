#include "mba/models.hpp"

#include <cmath>

namespace mba {

namespace {

void require_finite(const Vector& v, const char* what) {
    if (!v.allFinite()) throw NumericalError(std::string("non-finite input to ") + what);
}

void require_admissible(const Vector& q, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(q[i] > 0.0)) throw StateError("nonpositive density", i);
        if (!(q[2 * n + i] > 0.0)) throw StateError("nonpositive pressure", i);
    }
}

}  // namespace

Vector burgers_transport_rhs(const Vector& u, const BurgersParams& p) {
    if (u.size() != p.grid.n) throw ContractError("Burgers state length differs from grid");
    require_finite(u, "burgers_rhs");
    const Vector flux = 0.5 * u.array().square();
    return -ddx(flux, p.grid, p.order);
}

Vector burgers_friction_rhs(const Vector& u, const BurgersParams& p) {
    if (u.size() != p.grid.n) throw ContractError("Burgers state length differs from grid");
    if (p.mu == 0.0) return Vector::Zero(u.size());
    return p.mu * d2dx2(u, p.grid, p.order);
}

BurgersSplit burgers_split_rhs(const Vector& u, const BurgersParams& p) {
    return {burgers_transport_rhs(u, p), burgers_friction_rhs(u, p)};
}

Vector burgers_rhs(const Vector& u, const BurgersParams& p) {
    auto parts = burgers_split_rhs(u, p);
    return parts.transport + parts.friction;
}

Vector burgers_adjoint_analytic_rhs(const Vector& ustar, const Vector& u0, const BurgersParams& p) {
    if (ustar.size() != p.grid.n || u0.size() != p.grid.n) throw ContractError("Burgers adjoint shape mismatch");
    Vector r = -(u0.array() * ddx(ustar, p.grid, p.order).array()).matrix();
    if (p.mu != 0.0) r -= p.mu * d2dx2(ustar, p.grid, p.order);
    return r;
}

Vector euler_rhs(const Vector& q, const EulerParams& p) {
    const Eigen::Index n = p.grid.n;
    if (q.size() != kEulerFields * n) throw ContractError("Euler state length differs from 3 x grid");
    require_finite(q, "euler_rhs");
    require_admissible(q, n);
    const auto rho = q.segment(0, n).array();
    const auto u = q.segment(n, n).array();
    const auto pr = q.segment(2 * n, n).array();
    const Grid& g = p.grid;

    const Vector mass_flux = (rho * u).matrix();
    const Vector work = (pr * u).matrix();
    const Vector ux = ddx(q.segment(n, n), g, p.order);
    const Vector px = ddx(q.segment(2 * n, n), g, p.order);

    Vector r(q.size());
    r.segment(0, n) = -ddx(mass_flux, g, p.order);
    r.segment(n, n) = (-u * ux.array() - px.array() / rho).matrix();
    r.segment(2 * n, n) = (-p.gamma * ddx(work, g, p.order).array() + (p.gamma - 1.0) * u * px.array()).matrix();
    return r;
}

Vector euler_open_rhs(const Vector& q, const EulerParams& p) {
    const Eigen::Index n = p.grid.n;
    if (p.grid.periodic) throw ConfigError("open-boundary Euler needs a non-periodic grid");
    Vector r = euler_rhs(q, p);

    // Characteristic closure: waves entering the domain carry no amplitude.
    const double gamma = p.gamma;
    const Grid& g = p.grid;
    const Vector rhox = ddx(q.segment(0, n), g, p.order);
    const Vector ux = ddx(q.segment(n, n), g, p.order);
    const Vector px = ddx(q.segment(2 * n, n), g, p.order);
    for (const Eigen::Index i : {Eigen::Index{0}, n - 1}) {
        const double rho = q[i];
        const double u = q[n + i];
        const double pr = q[2 * n + i];
        const double c = std::sqrt(gamma * pr / rho);
        double l1 = (u - c) * (px[i] - rho * c * ux[i]);
        double l2 = u * (c * c * rhox[i] - px[i]);
        double l5 = (u + c) * (px[i] + rho * c * ux[i]);
        const bool left = (i == 0);
        auto incoming = [left](double speed) { return left ? speed > 0.0 : speed < 0.0; };
        if (incoming(u - c)) l1 = 0.0;
        if (incoming(u)) l2 = 0.0;
        if (incoming(u + c)) l5 = 0.0;
        r[i] = -(l2 + 0.5 * (l5 + l1)) / (c * c);
        r[n + i] = -(l5 - l1) / (2.0 * rho * c);
        r[2 * n + i] = -0.5 * (l5 + l1);
    }

    if (p.sponge) {
        const auto& s = *p.sponge;
        for (int f = 0; f < kEulerFields; ++f)
            r.segment(f * n, n).array() -=
                s.sigma.array() * (q.segment(f * n, n) - s.reference_state.segment(f * n, n)).array();
    }
    return r;
}

Vector euler_open_rhs(const Vector& q, const EulerParams& p, double t) {
    Vector r = euler_open_rhs(q, p);
    if (p.forcing) r.segment(2 * p.grid.n, p.grid.n) += pressure_source_eval(*p.forcing, p.grid, t);
    return r;
}

SpongeProfile SpongeProfile::quadratic(const Grid& grid, const Vector& reference_state, double sigma_max,
                                       double fraction) {
    if (!(fraction > 0.0 && fraction < 0.5)) throw ConfigError("sponge fraction must lie in (0, 0.5)");
    if (sigma_max < 0.0) throw ConfigError("sponge strength must be nonnegative");
    SpongeProfile s;
    s.fraction = fraction;
    s.reference_state = reference_state;
    s.sigma = Vector::Zero(grid.n);
    const double width = fraction * grid.length;
    for (Eigen::Index i = 0; i < grid.n; ++i) {
        const double x = grid.x(i);
        double depth = 0.0;
        if (x < width) depth = (width - x) / width;
        if (x > grid.length - width) depth = (x - (grid.length - width)) / width;
        s.sigma[i] = sigma_max * depth * depth;
    }
    return s;
}

Vector pressure_source_eval(const PressureSource& src, const Grid& grid, double t) {
    if (!(src.frequency > 0.0)) throw ConfigError("source frequency must be positive");
    const double w = src.width_cells * grid.dx();
    const double phase = std::sin(2.0 * std::numbers::pi * src.frequency * t);
    Vector f(grid.n);
    for (Eigen::Index i = 0; i < grid.n; ++i) {
        const double d = (grid.x(i) - src.location) / w;
        f[i] = src.amplitude * phase * std::exp(-d * d);
    }
    return f;
}

Eigen::Matrix3d lin_euler_matrix(double rho0, double u0, double p0, double gamma) {
    Eigen::Matrix3d a;
    a << u0, rho0, 0.0,  //
        0.0, u0, 1.0 / rho0,  //
        0.0, gamma * p0, u0;
    return a;
}

Vector uniform_euler_state(const Grid& grid, double rho0, double u0, double p0) {
    Vector q(kEulerFields * grid.n);
    q.segment(0, grid.n).setConstant(rho0);
    q.segment(grid.n, grid.n).setConstant(u0);
    q.segment(2 * grid.n, grid.n).setConstant(p0);
    return q;
}

}  // namespace mba
