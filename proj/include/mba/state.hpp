#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <vector>

#include "mba/errors.hpp"

namespace mba {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Multi-field state on a grid, stored field-major: field f occupies
/// entries [f*n_grid, (f+1)*n_grid) of the flat vector.
class StateVector {
  public:
    StateVector() = default;
    StateVector(int n_fields, Eigen::Index n_grid)
        : n_fields_(n_fields), n_grid_(n_grid), values_(Vector::Zero(n_fields * n_grid)) {}
    StateVector(int n_fields, Vector flat) : n_fields_(n_fields), values_(std::move(flat)) {
        if (n_fields <= 0 || values_.size() % n_fields != 0)
            throw ContractError("flat length is not a multiple of the field count");
        n_grid_ = values_.size() / n_fields;
    }

    static StateVector from_fields(const std::vector<Vector>& fields) {
        if (fields.empty()) throw ContractError("state needs at least one field");
        StateVector s(static_cast<int>(fields.size()), fields.front().size());
        for (std::size_t f = 0; f < fields.size(); ++f) {
            if (fields[f].size() != s.n_grid_) throw ContractError("fields differ in grid length");
            s.values_.segment(static_cast<Eigen::Index>(f) * s.n_grid_, s.n_grid_) = fields[f];
        }
        return s;
    }

    int n_fields() const noexcept { return n_fields_; }
    Eigen::Index n_grid() const noexcept { return n_grid_; }
    Eigen::Index size() const noexcept { return values_.size(); }

    auto field(int f) { return values_.segment(f * n_grid_, n_grid_); }
    auto field(int f) const { return values_.segment(f * n_grid_, n_grid_); }

    const Vector& flat() const noexcept { return values_; }
    Vector& flat() noexcept { return values_; }

    std::vector<Vector> unflatten() const {
        std::vector<Vector> out;
        for (int f = 0; f < n_fields_; ++f) out.emplace_back(field(f));
        return out;
    }

  private:
    int n_fields_ = 0;
    Eigen::Index n_grid_ = 0;
    Vector values_;
};

/// Per-slot field selector: slot i takes source field slots[i] (1-based), 0 zeroes the slot.
class FieldMask {
  public:
    FieldMask() = default;
    FieldMask(std::initializer_list<int> slots) : slots_(slots) {}
    explicit FieldMask(std::vector<int> slots) : slots_(std::move(slots)) {}

    static FieldMask identity(int n_fields) {
        std::vector<int> s(n_fields);
        for (int i = 0; i < n_fields; ++i) s[i] = i + 1;
        return FieldMask(std::move(s));
    }

    int size() const noexcept { return static_cast<int>(slots_.size()); }
    int operator[](int i) const { return slots_[i]; }
    const std::vector<int>& slots() const noexcept { return slots_; }

    bool is_identity() const {
        for (int i = 0; i < size(); ++i)
            if (slots_[i] != i + 1) return false;
        return true;
    }
    bool valid() const {
        for (int s : slots_)
            if (s < 0 || s > size()) return false;
        return !slots_.empty();
    }

    friend bool operator==(const FieldMask&, const FieldMask&) = default;
    friend auto operator<=>(const FieldMask&, const FieldMask&) = default;

  private:
    std::vector<int> slots_;
};

/// Shuffle or zero the fields of a flat field-major vector according to `mask`.
template <typename Derived>
VectorX<typename Derived::Scalar> apply_mask(const Eigen::MatrixBase<Derived>& v, const FieldMask& mask) {
    const int n_fields = mask.size();
    if (n_fields == 0 || v.size() % n_fields != 0)
        throw ContractError("mask length does not match the field count of the vector");
    if (!mask.valid()) throw ContractError("mask entry out of range");
    const Eigen::Index n = v.size() / n_fields;
    VectorX<typename Derived::Scalar> out = VectorX<typename Derived::Scalar>::Zero(v.size());
    for (int i = 0; i < n_fields; ++i)
        if (mask[i] > 0) out.segment(i * n, n) = v.segment((mask[i] - 1) * n, n);
    return out;
}

inline StateVector apply_mask(const StateVector& v, const FieldMask& mask) {
    if (mask.size() != v.n_fields())
        throw ContractError("mask length does not match the field count of the state");
    return StateVector(v.n_fields(), apply_mask(v.flat(), mask));
}

}  // namespace mba
