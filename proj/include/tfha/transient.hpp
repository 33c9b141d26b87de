#pragma once

#include "tfha/mna.hpp"
#include "tfha/types.hpp"

#include <Eigen/SparseLU>
#include <vector>

namespace tfha {

class NewtonDivergence : public Error {
public:
    NewtonDivergence(const std::string& what, Real residual) : Error(what), residual_(residual) {}
    [[nodiscard]] Real last_residual() const { return residual_; }

private:
    Real residual_;
};

class SingularIterationMatrix : public Error {
public:
    using Error::Error;
};

class NoSteadyState : public Error {
public:
    NoSteadyState(const std::string& what, std::vector<Real> history)
        : Error(what), history_(std::move(history)) {}
    [[nodiscard]] const std::vector<Real>& mismatch_history() const { return history_; }

private:
    std::vector<Real> history_;
};

struct TransientConfig {
    Index samples_per_period = 256; // power of two, >= 8
    int max_periods = 200;
    Real steady_tol = 1e-6;
    Real newton_tol = 1e-9;
    int newton_max_iter = 50;
};

/// One period of the converged trajectory, sampled uniformly at offsets
/// i*T/N from the period start (source phase zero).
struct TransientSolution {
    Vector t_grid;
    RealMatrix x_samples; // dim x N
    Real period = 0.0;
    int periods_run = 0;
    Real period_mismatch = 0.0;
};

/// Trapezoidal-rule integrator for the MNA DAE with per-step Newton
/// linearization. Algebraic rows are enforced pointwise at t_next; the
/// derivative history h tracks a_c * dx/dt and stays zero in algebraic rows.
class TrapezoidalStepper {
public:
    TrapezoidalStepper(const MnaStructure& mna, TransientConfig cfg);

    /// Advance one step; updates the carried derivative history. The first
    /// step of an integration should set backward_euler to damp inconsistent
    /// initial conditions.
    Vector step(const Vector& x_prev, Vector& h_inout, Real t_next, Real dt, bool backward_euler = false);

private:
    const MnaStructure& mna_;
    TransientConfig cfg_;
    Eigen::SparseLU<SparseMatrix> lu_;
    bool pattern_ready_ = false;
};

/// Single trapezoidal Newton step from a consistent previous state.
[[nodiscard]] Vector newton_step(const MnaStructure& mna, const Vector& x_prev, const Vector& h_prev,
                                 Real t_next, Real dt, const TransientConfig& cfg);

/// Relative Frobenius distance between two sampled periods.
[[nodiscard]] Real detect_periodicity(const RealMatrix& prev, const RealMatrix& curr);

/// Integrate from x(0)=0 period by period until two consecutive periods
/// agree to steady_tol; returns the final period.
[[nodiscard]] TransientSolution run_to_steady_state(const MnaStructure& mna, const Circuit& c,
                                                    const TransientConfig& cfg);

} // namespace tfha
