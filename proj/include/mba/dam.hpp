#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "mba/plan.hpp"
#include "mba/state.hpp"

namespace mba {

/// Matrix-free action v -> A v.
template <typename Scalar>
using LinearAction = std::function<VectorX<Scalar>(const VectorX<Scalar>&)>;

template <typename Scalar>
Scalar default_lin_dep_tolerance() {
    return std::max(Scalar(1e-10), Scalar(100) * std::numeric_limits<Scalar>::epsilon());
}

/// Dynamic Arnoldi factorization  A V = V Hbar + P.
///
/// Every appended test vector adds one column to V, Hbar and P. A linearly
/// dependent test vector appends zero columns so that pile positions stay
/// aligned with plan lines. Nonzero columns of V are orthonormal; pile column j
/// is orthogonal to the V columns that existed when it was created and is never
/// re-orthogonalized later.
template <typename Scalar>
class DamFactorization {
  public:
    using VectorType = VectorX<Scalar>;
    using MatrixType = MatrixX<Scalar>;

    explicit DamFactorization(Scalar eps_lin_dep = default_lin_dep_tolerance<Scalar>())
        : eps_lin_dep_(eps_lin_dep) {}

    Eigen::Index rows() const noexcept { return V_.rows(); }
    Eigen::Index cols() const noexcept { return V_.cols(); }
    bool empty() const noexcept { return V_.cols() == 0; }

    const MatrixType& V() const noexcept { return V_; }
    const MatrixType& P() const noexcept { return P_; }
    const MatrixType& Hbar() const noexcept { return Hbar_; }
    Scalar eps_lin_dep() const noexcept { return eps_lin_dep_; }

    /// 2-norm of each test vector before orthogonalization.
    const std::vector<Scalar>& norms() const noexcept { return norms_; }
    /// Whether column j carries a vector (false for linearly dependent input).
    const std::vector<bool>& active() const noexcept { return active_; }
    /// Plan lines that produced the columns (empty for direct dam_update use).
    const std::vector<PlanLine>& lines() const noexcept { return lines_; }
    /// Number of operator applications spent so far.
    int operator_calls() const noexcept { return operator_calls_; }

    /// Update routine: orthogonalize q against V, append it (normalized) when it
    /// has an independent part, and push the residual of A v onto the pile.
    void append(const VectorType& q, const LinearAction<Scalar>& apply_A) {
        if (!empty() && q.size() != rows()) throw ContractError("test vector shape differs from factorization");
        const Eigen::Index n = q.size();
        const Eigen::Index m = cols();

        VectorType v = q;
        if (m > 0) {
            // Classical Gram-Schmidt with one reorthogonalization pass.
            for (int pass = 0; pass < 2; ++pass) v.noalias() -= V_ * (V_.transpose() * v);
        }
        const Scalar q_norm = q.norm();
        const Scalar v_norm = v.norm();

        V_.conservativeResize(n, m + 1);
        P_.conservativeResize(n, m + 1);
        Hbar_.conservativeResize(m + 1, m + 1);
        Hbar_.row(m).setZero();
        Hbar_.col(m).setZero();
        norms_.push_back(q_norm);

        if (!(q_norm > Scalar(0)) || !(v_norm > eps_lin_dep_ * q_norm)) {
            V_.col(m).setZero();
            P_.col(m).setZero();
            active_.push_back(false);
            return;
        }

        V_.col(m) = v / v_norm;
        VectorType w = apply_A(V_.col(m));
        ++operator_calls_;
        if (w.size() != n || !w.allFinite())
            throw NumericalError("operator application returned non-finite values", static_cast<std::ptrdiff_t>(m));
        VectorType beta = V_.transpose() * w;
        w.noalias() -= V_ * beta;
        const VectorType correction = V_.transpose() * w;
        w.noalias() -= V_ * correction;
        beta += correction;

        Hbar_.col(m) = beta;
        P_.col(m) = w;
        active_.push_back(true);
    }

    void record_line(const PlanLine& line) { lines_.push_back(line); }

  private:
    Scalar eps_lin_dep_;
    MatrixType V_;
    MatrixType P_;
    MatrixType Hbar_;
    std::vector<Scalar> norms_;
    std::vector<bool> active_;
    std::vector<PlanLine> lines_;
    int operator_calls_ = 0;
};

/// Functional form of the update routine.
template <typename Scalar>
DamFactorization<Scalar> dam_update(DamFactorization<Scalar> fact, const VectorX<Scalar>& q,
                                    const LinearAction<Scalar>& apply_A) {
    fact.append(q, apply_A);
    return fact;
}

/// Fetch, mask and apply one plan line to an existing factorization.
template <typename Scalar>
void execute_plan_line(DamFactorization<Scalar>& fact, const PlanLine& line, std::span<const VectorX<Scalar>> inputs,
                       const LinearAction<Scalar>& apply_A) {
    const auto position = static_cast<std::ptrdiff_t>(fact.cols());
    const VectorX<Scalar>* source = nullptr;
    VectorX<Scalar> pile_column;
    if (line.source == PlanSource::Input) {
        if (line.index < 1 || line.index > static_cast<int>(inputs.size()))
            throw PlanError("input index " + std::to_string(line.index) + " out of range (have " +
                                std::to_string(inputs.size()) + " inputs)",
                            position);
        source = &inputs[line.index - 1];
    } else {
        if (line.index < 1 || line.index > fact.cols())
            throw PlanError("pile index " + std::to_string(line.index) + " out of range", position);
        pile_column = fact.P().col(line.index - 1);
        source = &pile_column;
    }
    if (line.mask.size() == 0 || source->size() % line.mask.size() != 0)
        throw PlanError("mask length does not divide the state length", position);
    fact.append(apply_mask(*source, line.mask), apply_A);
    fact.record_line(line);
}

/// Dynamic Arnoldi method: execute every plan line in order.
template <typename Scalar>
DamFactorization<Scalar> run_dam(const CalculationPlan& plan, std::span<const VectorX<Scalar>> inputs,
                                 const LinearAction<Scalar>& apply_A,
                                 Scalar eps_lin_dep = default_lin_dep_tolerance<Scalar>()) {
    plan.validate();
    DamFactorization<Scalar> fact(eps_lin_dep);
    for (const auto& line : plan.lines()) execute_plan_line(fact, line, inputs, apply_A);
    return fact;
}

template <typename Scalar>
DamFactorization<Scalar> run_dam(const CalculationPlan& plan, const std::vector<VectorX<Scalar>>& inputs,
                                 const LinearAction<Scalar>& apply_A,
                                 Scalar eps_lin_dep = default_lin_dep_tolerance<Scalar>()) {
    return run_dam(plan, std::span<const VectorX<Scalar>>(inputs), apply_A, eps_lin_dep);
}

/// H = Hbar + V^T P. Its first row equals the first row of Hbar because every
/// pile column is orthogonal to the first mode.
template <typename Scalar>
MatrixX<Scalar> assemble_h(const DamFactorization<Scalar>& fact) {
    MatrixX<Scalar> H = fact.Hbar();
    if (fact.empty()) return H;
    H.noalias() += fact.V().transpose() * fact.P();
    const Scalar tol = default_lin_dep_tolerance<Scalar>();
    for (Eigen::Index j = 0; j < H.cols(); ++j) {
        const Scalar scale = fact.P().col(j).norm();
        if (std::abs(H(0, j) - fact.Hbar()(0, j)) > tol * scale + std::numeric_limits<Scalar>::min())
            throw NumericalError("pile column not orthogonal to the first mode", j);
    }
    return H;
}

/// Mode-based transposed action  V H^T V^T y.
template <typename Scalar>
VectorX<Scalar> apply_approx_transpose(const DamFactorization<Scalar>& fact, const VectorX<Scalar>& y) {
    if (fact.empty()) return VectorX<Scalar>::Zero(y.size());
    if (y.size() != fact.rows()) throw ContractError("vector shape differs from factorization");
    const MatrixX<Scalar> H = assemble_h(fact);
    const VectorX<Scalar> coeff = fact.V().transpose() * y;
    return fact.V() * (H.transpose() * coeff);
}

/// Frozen form of apply_approx_transpose for repeated application: keeps V and
/// V H^T so each action costs two thin products.
template <typename Scalar>
class ModalTranspose {
  public:
    ModalTranspose() = default;
    explicit ModalTranspose(const DamFactorization<Scalar>& fact) : V_(fact.V()) {
        if (!fact.empty()) VHt_ = fact.V() * assemble_h(fact).transpose();
    }

    VectorX<Scalar> operator()(const VectorX<Scalar>& y) const {
        if (V_.cols() == 0) return VectorX<Scalar>::Zero(y.size());
        if (y.size() != V_.rows()) throw ContractError("vector shape differs from factorization");
        return VHt_ * (V_.transpose() * y);
    }

  private:
    MatrixX<Scalar> V_;
    MatrixX<Scalar> VHt_;
};

/// Transposed action on the first input, |q*| V h1^T with h1 the first row of
/// Hbar; requires the factorization to start from the unmasked first input.
template <typename Scalar>
VectorX<Scalar> adjoint_action_fast(const DamFactorization<Scalar>& fact, Scalar qstar_norm) {
    const auto& lines = fact.lines();
    if (lines.empty() || lines.front().source != PlanSource::Input || lines.front().index != 1 ||
        !lines.front().mask.is_identity())
        throw ContractError("fast adjoint action needs a plan starting with unmasked input 1");
    return qstar_norm * (fact.V() * fact.Hbar().row(0).transpose());
}

template <typename Scalar>
VectorX<Scalar> adjoint_action_fast(const DamFactorization<Scalar>& fact) {
    if (fact.norms().empty()) throw ContractError("empty factorization");
    return adjoint_action_fast(fact, fact.norms().front());
}

}  // namespace mba
