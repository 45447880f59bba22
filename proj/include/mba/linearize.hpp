#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "mba/dam.hpp"
#include "mba/models.hpp"

namespace mba {

struct FrechetConfig {
    double epsilon = std::sqrt(std::numeric_limits<double>::epsilon());
    /// Two-sided differences; only used as a refinement oracle.
    bool central = false;
};

/// Directional derivative of `rhs` at q0 along v by a difference quotient.
/// The step is epsilon * max(1, |q0|_inf) / |v|_inf, so the perturbation is
/// small relative to the state but never below its rounding level.
Vector frechet_apply(const RhsFunction& rhs, const Vector& q0, const Vector& v, const FrechetConfig& cfg = {});

/// Linearization about a fixed state with rhs(q0) evaluated once.
class Linearization {
  public:
    Linearization(RhsFunction rhs, Vector q0, FrechetConfig cfg = {});

    Vector apply(const Vector& v) const;
    LinearAction<double> action() const {
        return [this](const Vector& v) { return apply(v); };
    }

    const Vector& base_state() const noexcept { return q0_; }
    const Vector& base_rhs() const noexcept { return f0_; }
    /// RHS evaluations issued through apply(), excluding the base evaluation.
    long rhs_calls() const noexcept { return calls_; }

  private:
    RhsFunction rhs_;
    Vector q0_;
    Vector f0_;
    FrechetConfig cfg_;
    double q0_scale_ = 1.0;
    mutable long calls_ = 0;
};

/// Dense linearized operator, column j = frechet_apply(rhs, q0, e_j).
Matrix build_full_operator(const RhsFunction& rhs, const Vector& q0, const FrechetConfig& cfg = {});

/// Transposed dense operator applied to y.
Vector reference_adjoint_action(const RhsFunction& rhs, const Vector& q0, const Vector& y,
                                const FrechetConfig& cfg = {});

/// Dense reference adjoint with the operator cached until the base state changes.
class ReferenceAdjoint {
  public:
    explicit ReferenceAdjoint(RhsFunction rhs, FrechetConfig cfg = {}) : rhs_(std::move(rhs)), cfg_(cfg) {}

    const Matrix& operator_at(const Vector& q0);
    Vector apply(const Vector& q0, const Vector& y) { return operator_at(q0).transpose() * y; }
    int builds() const noexcept { return builds_; }

  private:
    RhsFunction rhs_;
    FrechetConfig cfg_;
    Vector cached_q0_;
    Matrix cached_;
    int builds_ = 0;
};

void write_matrix_csv(const Matrix& m, const std::string& path);

}  // namespace mba
