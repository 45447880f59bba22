#include "mba/linearize.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

namespace mba {

namespace {

double step_for(const FrechetConfig& cfg, double q0_scale, double v_scale) {
    return cfg.epsilon * std::max(1.0, q0_scale) / v_scale;
}

Vector difference_quotient(const RhsFunction& rhs, const Vector& q0, const Vector& f0, const Vector& v,
                           const FrechetConfig& cfg, double q0_scale, long& calls) {
    const double v_scale = v.lpNorm<Eigen::Infinity>();
    if (v_scale == 0.0) return Vector::Zero(q0.size());
    if (!v.allFinite()) throw NumericalError("non-finite linearization direction");
    const double h = step_for(cfg, q0_scale, v_scale);
    if (cfg.central) {
        calls += 2;
        return (rhs(q0 + h * v) - rhs(q0 - h * v)) / (2.0 * h);
    }
    ++calls;
    return (rhs(q0 + h * v) - f0) / h;
}

}  // namespace

Vector frechet_apply(const RhsFunction& rhs, const Vector& q0, const Vector& v, const FrechetConfig& cfg) {
    if (v.size() != q0.size()) throw ContractError("direction shape differs from base state");
    if (!(cfg.epsilon > 0.0)) throw ConfigError("linearization step must be positive");
    if (v.lpNorm<Eigen::Infinity>() == 0.0) return Vector::Zero(q0.size());
    long calls = 0;
    const Vector f0 = cfg.central ? Vector() : rhs(q0);
    return difference_quotient(rhs, q0, f0, v, cfg, q0.lpNorm<Eigen::Infinity>(), calls);
}

Linearization::Linearization(RhsFunction rhs, Vector q0, FrechetConfig cfg)
    : rhs_(std::move(rhs)), q0_(std::move(q0)), cfg_(cfg) {
    if (!(cfg_.epsilon > 0.0)) throw ConfigError("linearization step must be positive");
    f0_ = rhs_(q0_);
    q0_scale_ = q0_.lpNorm<Eigen::Infinity>();
}

Vector Linearization::apply(const Vector& v) const {
    if (v.size() != q0_.size()) throw ContractError("direction shape differs from base state");
    return difference_quotient(rhs_, q0_, f0_, v, cfg_, q0_scale_, calls_);
}

Matrix build_full_operator(const RhsFunction& rhs, const Vector& q0, const FrechetConfig& cfg) {
    const Linearization lin(rhs, q0, cfg);
    const Eigen::Index n = q0.size();
    Matrix a(n, n);
    Vector e = Vector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        e[j] = 1.0;
        a.col(j) = lin.apply(e);
        e[j] = 0.0;
    }
    return a;
}

Vector reference_adjoint_action(const RhsFunction& rhs, const Vector& q0, const Vector& y,
                                const FrechetConfig& cfg) {
    if (y.size() != q0.size()) throw ContractError("adjoint vector shape differs from base state");
    if (y.lpNorm<Eigen::Infinity>() == 0.0) return Vector::Zero(y.size());
    return build_full_operator(rhs, q0, cfg).transpose() * y;
}

const Matrix& ReferenceAdjoint::operator_at(const Vector& q0) {
    if (builds_ == 0 || cached_q0_.size() != q0.size() || cached_q0_ != q0) {
        cached_ = build_full_operator(rhs_, q0, cfg_);
        cached_q0_ = q0;
        ++builds_;
    }
    return cached_;
}

void write_matrix_csv(const Matrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
        out << '\n';
    }
}

}  // namespace mba
