#include "tfha/transient.hpp"

#include <cmath>
#include <sstream>

namespace tfha {

namespace {

bool power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

void check_config(const TransientConfig& cfg) {
    if (cfg.samples_per_period < 8 || !power_of_two(cfg.samples_per_period))
        throw Error("samples_per_period must be a power of two >= 8");
    if (cfg.steady_tol <= 0.0 || cfg.newton_tol <= 0.0)
        throw Error("tolerances must be positive");
}

} // namespace

TrapezoidalStepper::TrapezoidalStepper(const MnaStructure& mna, TransientConfig cfg)
    : mna_(mna), cfg_(cfg) {}

Vector TrapezoidalStepper::step(const Vector& x_prev, Vector& h_inout, Real t_next, Real dt,
                                bool backward_euler) {
    if (dt <= 0.0) throw Error("dt must be positive");
    const Real c_dt = (backward_euler ? 1.0 : 2.0) / dt;
    const SparseMatrix a_g_t = mna_.is_time_varying() ? mna_.conductance_at(t_next) : mna_.a_g;
    const Vector i_s = eval_sources(mna_, t_next);
    const Vector history = backward_euler ? Vector(Vector::Zero(mna_.dim)) : Vector(h_inout);

    Vector x = x_prev;
    Real res_norm = 0.0;
    for (int iter = 0; iter <= cfg_.newton_max_iter; ++iter) {
        NonlinearEval nl = eval_nonlinear(mna_, x);
        Vector residual = c_dt * (mna_.a_c * (x - x_prev)) - history + a_g_t * x - nl.i_nl - i_s;
        res_norm = residual.norm();
        if (res_norm <= cfg_.newton_tol) {
            h_inout = c_dt * (mna_.a_c * (x - x_prev)) - history;
            return x;
        }
        if (iter == cfg_.newton_max_iter) break;

        SparseMatrix m = c_dt * mna_.a_c + a_g_t - nl.g_nl;
        if (!pattern_ready_) {
            lu_.analyzePattern(m);
            pattern_ready_ = true;
        }
        lu_.factorize(m);
        if (lu_.info() != Eigen::Success)
            throw SingularIterationMatrix("iteration matrix factorization failed at t=" + std::to_string(t_next));
        x += lu_.solve(-residual);
    }

    std::ostringstream os;
    os << "Newton did not converge at t=" << t_next << " after " << cfg_.newton_max_iter
       << " iterations (residual " << res_norm << ")";
    throw NewtonDivergence(os.str(), res_norm);
}

Vector newton_step(const MnaStructure& mna, const Vector& x_prev, const Vector& h_prev, Real t_next,
                   Real dt, const TransientConfig& cfg) {
    TrapezoidalStepper stepper(mna, cfg);
    Vector h = h_prev;
    return stepper.step(x_prev, h, t_next, dt);
}

Real detect_periodicity(const RealMatrix& prev, const RealMatrix& curr) {
    if (prev.rows() != curr.rows() || prev.cols() != curr.cols())
        throw ShapeMismatch("period sample matrices differ in shape");
    constexpr Real eps = 1e-30;
    return (curr - prev).norm() / std::max(curr.norm(), eps);
}

TransientSolution run_to_steady_state(const MnaStructure& mna, const Circuit& c,
                                      const TransientConfig& cfg) {
    check_config(cfg);
    const Index n = cfg.samples_per_period;
    const Real period = c.fundamental_period;
    const Real dt = period / static_cast<Real>(n);

    TrapezoidalStepper stepper(mna, cfg);
    Vector x = Vector::Zero(mna.dim);
    Vector h = Vector::Zero(mna.dim);

    RealMatrix prev(mna.dim, n);
    RealMatrix curr(mna.dim, n);
    std::vector<Real> history;

    for (int m = 0; m < cfg.max_periods; ++m) {
        curr.col(0) = x;
        for (Index i = 1; i <= n; ++i) {
            const Real t_next = (static_cast<Real>(m) * n + i) * dt;
            const bool first = m == 0 && i == 1;
            x = stepper.step(x, h, t_next, dt, first);
            if (i < n) curr.col(i) = x;
        }
        if (m >= 1) {
            Real mismatch = detect_periodicity(prev, curr);
            history.push_back(mismatch);
            if (mismatch <= cfg.steady_tol) {
                TransientSolution sol;
                sol.t_grid = dt * Vector::LinSpaced(n, 0.0, static_cast<Real>(n - 1));
                sol.x_samples = curr;
                sol.period = period;
                sol.periods_run = m + 1;
                sol.period_mismatch = mismatch;
                return sol;
            }
        }
        prev.swap(curr);
    }

    std::ostringstream os;
    os << "no steady state within " << cfg.max_periods << " periods (last mismatch "
       << (history.empty() ? 0.0 : history.back()) << ")";
    throw NoSteadyState(os.str(), history);
}

} // namespace tfha
