#include "tfha/sensitivity.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace tfha {

namespace {

bool power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

Index thread_budget(std::size_t jobs) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("TFHA_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
    }
    return static_cast<Index>(std::min<std::size_t>(hw, jobs));
}

template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const Index workers = thread_budget(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace

QoiSelector QoiSelector::parse(const std::string& target, const MnaStructure& mna) {
    auto fail = [&](const std::string& why) -> QoiSelector {
        throw UnknownTarget("bad QoI target '" + target + "': " + why);
    };

    std::string t = target;
    t.erase(std::remove_if(t.begin(), t.end(), [](unsigned char c) { return std::isspace(c); }), t.end());
    if (t.size() < 4 || t[1] != '(' || t.back() != ')') return fail("expected v(node), v(a,b) or i(device)");
    char kind = static_cast<char>(std::tolower(static_cast<unsigned char>(t[0])));
    std::string inner = t.substr(2, t.size() - 3);

    QoiSelector sel;
    sel.target = t;
    sel.weights = Vector::Zero(mna.dim);

    if (kind == 'v') {
        std::string a = inner;
        std::string b;
        auto comma = inner.find(',');
        if (comma != std::string::npos) {
            a = inner.substr(0, comma);
            b = inner.substr(comma + 1);
        }
        if (a != "0") {
            auto it = mna.node_index.find(a);
            if (it == mna.node_index.end()) return fail("unknown node '" + a + "'");
            sel.weights[it->second] += 1.0;
        }
        if (!b.empty() && b != "0") {
            auto it = mna.node_index.find(b);
            if (it == mna.node_index.end()) return fail("unknown node '" + b + "'");
            sel.weights[it->second] -= 1.0;
        }
    } else if (kind == 'i') {
        auto it = mna.branch_index.find(inner);
        if (it == mna.branch_index.end()) {
            // branch currents exist for voltage sources and inductors only
            for (const auto& [name, idx] : mna.branch_index) {
                std::string lhs = name, rhs = inner;
                std::transform(lhs.begin(), lhs.end(), lhs.begin(), ::tolower);
                std::transform(rhs.begin(), rhs.end(), rhs.begin(), ::tolower);
                if (lhs == rhs) {
                    sel.weights[idx] = 1.0;
                    return sel;
                }
            }
            return fail("no branch current for device '" + inner + "'");
        }
        sel.weights[it->second] = 1.0;
    } else {
        return fail("target must start with v or i");
    }

    if (sel.weights.cwiseAbs().sum() == 0.0) return fail("selects only ground");
    return sel;
}

ComplexVector qoi_rhs(const QoiSelector& sel, const HarmonicLadder& ladder, Index dim) {
    if (sel.weights.size() != dim) throw ShapeMismatch("QoI weights sized for a different circuit");
    ComplexVector out(dim * (ladder.k_max + 1));
    for (Index k = 0; k <= ladder.k_max; ++k)
        out.segment(k * dim, dim) = sel.weights.cast<Complex>();
    return out;
}

ComplexVector param_rhs_two_sided(const ParamStamps& stamps, const SpectralSolution& spec,
                                  Index n_samples) {
    const Index dim = spec.phasors.rows();
    const Index k_max = spec.ladder.k_max;
    const Real omega0 = spec.ladder.omega0;
    const ComplexVector x2 = two_sided_from_onesided(spec.phasors);
    ComplexVector out = ComplexVector::Zero(dim * (2 * k_max + 1));

    const SparseComplex d_a_g = stamps.d_a_g.cast<Complex>();
    const SparseComplex d_a_c = stamps.d_a_c.cast<Complex>();
    for (Index k = -k_max; k <= k_max; ++k) {
        const Index off = (k + k_max) * dim;
        ComplexVector xk = x2.segment(off, dim);
        ComplexVector rk = d_a_g * xk;
        if (k != 0) rk += Complex(0.0, omega0 * static_cast<Real>(k)) * (d_a_c * xk);
        out.segment(off, dim) = rk;
    }

    if (stamps.time_varying) {
        if (!power_of_two(n_samples) || n_samples < 8)
            throw Error("param_rhs_two_sided needs a power-of-two sample grid");
        const Real period = 2.0 * kPi / omega0;
        const Real dt = period / static_cast<Real>(n_samples);
        Vector w(n_samples);
        for (Index i = 0; i < n_samples; ++i) w[i] = stamps.mod_scale(dt * static_cast<Real>(i));
        const ScalarConversion conv(w, k_max);
        auto coeff = [&](Index m) -> Complex { return conv.coefficient(m); };

        const SparseComplex pattern = stamps.mod_pattern.cast<Complex>();
        std::vector<ComplexVector> px(static_cast<std::size_t>(2 * k_max + 1));
        for (Index l = -k_max; l <= k_max; ++l)
            px[static_cast<std::size_t>(l + k_max)] = pattern * x2.segment((l + k_max) * dim, dim);
        for (Index k = -k_max; k <= k_max; ++k) {
            ComplexVector acc = ComplexVector::Zero(dim);
            for (Index l = -k_max; l <= k_max; ++l) {
                Complex cm = coeff(k - l);
                if (cm != Complex(0.0, 0.0)) acc += cm * px[static_cast<std::size_t>(l + k_max)];
            }
            out.segment((k + k_max) * dim, dim) += acc;
        }
    }
    return out;
}

ComplexVector hb_direct_sensitivity(const HbSystem& sys, const SpectralSolution& spec,
                                    const ParamStamps& stamps) {
    if (spec.ladder.k_max != sys.ladder.k_max) throw ShapeMismatch("spectrum and system ladders differ");
    const ComplexVector rhs2 = param_rhs_two_sided(stamps, spec, sys.n_samples);
    HbFactorization fact(sys);
    const ComplexVector d2 = fact.solve(-rhs2);
    return stack_onesided(onesided_from_two_sided(d2, sys.dim, sys.ladder.k_max));
}

AdjointSolution hb_adjoint_solve(const HbSystem& sys, const ComplexVector& qoi_stacked) {
    const Index dim = sys.dim;
    const Index k_max = sys.ladder.k_max;
    if (qoi_stacked.size() != dim * (k_max + 1))
        throw ShapeMismatch("QoI vector must be stacked over k = 0..k_max");

    AdjointSolution adj;
    adj.ladder = sys.ladder;
    adj.dim = dim;
    adj.n_samples = sys.n_samples;
    adj.columns = ComplexMatrix(sys.two_sided_dim(), k_max + 1);

    HbFactorization fact(sys);
    for (Index k = 0; k <= k_max; ++k) {
        ComplexVector e = ComplexVector::Zero(sys.two_sided_dim());
        e.segment((k + k_max) * dim, dim) = qoi_stacked.segment(k * dim, dim);
        adj.columns.col(k) = fact.solve_adjoint(e);
    }
    return adj;
}

ComplexVector hb_adjoint_sensitivity(const AdjointSolution& adj, const SpectralSolution& spec,
                                     const ParamStamps& stamps) {
    if (spec.ladder.k_max != adj.ladder.k_max) throw ShapeMismatch("spectrum and adjoint ladders differ");
    const ComplexVector rhs2 = param_rhs_two_sided(stamps, spec, adj.n_samples);
    ComplexVector out(adj.ladder.k_max + 1);
    for (Index k = 0; k <= adj.ladder.k_max; ++k) out[k] = -adj.columns.col(k).dot(rhs2);
    return out;
}

Real relative_error(const ComplexVector& coarse, const ComplexVector& fine) {
    if (coarse.size() >= fine.size())
        throw ShapeMismatch("fine spectrum must carry more harmonics than the coarse one");
    const Real fine_norm = fine.norm();
    if (fine_norm == 0.0) throw ZeroFineNorm("fine spectrum is identically zero");
    ComplexVector padded = ComplexVector::Zero(fine.size());
    padded.head(coarse.size()) = coarse;
    return (fine - padded).norm() / fine_norm;
}

std::vector<SensitivityResult> tfha_run(const Circuit& c, const QoiSelector& sel,
                                        const std::vector<ParameterRef>& params, const TfhaConfig& cfg) {
    if (params.empty()) throw Error("tfha_run needs at least one parameter");
    if (cfg.k_start < 1 || cfg.k_growth_factor < 2) throw Error("bad refinement schedule");

    const MnaStructure mna = assemble_static(c);
    const TransientSolution steady = run_to_steady_state(mna, c, cfg.transient);
    const Index n = steady.x_samples.cols();
    const Index k_cap = n / 2 - 1;

    std::vector<ParamStamps> stamps;
    stamps.reserve(params.size());
    for (const auto& p : params) stamps.push_back(param_stamps(mna, c, p));

    std::vector<ComplexVector> prev_spectra;
    std::vector<ComplexVector> curr_spectra(params.size());
    std::vector<Real> errors(params.size(), 1.0);

    Index k = std::min(cfg.k_start, k_cap);
    Index k_used = k;
    SpectralSolution spec_final;

    while (true) {
        const HarmonicLadder ladder = HarmonicLadder::for_period(steady.period, k);
        const SpectralSolution spec = fft_period(steady, k);
        const HbSystem sys = assemble_hb_jacobian(mna, steady, ladder);
        const AdjointSolution adj = hb_adjoint_solve(sys, qoi_rhs(sel, ladder, mna.dim));

        parallel_for(params.size(), [&](std::size_t i) {
            curr_spectra[i] = hb_adjoint_sensitivity(adj, spec, stamps[i]);
        });

        k_used = k;
        spec_final = spec;

        bool converged = false;
        if (!prev_spectra.empty()) {
            Real max_err = 0.0;
            for (std::size_t i = 0; i < params.size(); ++i) {
                Real e;
                try {
                    e = relative_error(prev_spectra[i], curr_spectra[i]);
                } catch (const ZeroFineNorm&) {
                    e = 0.0; // vanishing sensitivity counts as converged
                }
                errors[i] = e;
                max_err = std::max(max_err, e);
            }
            converged = max_err <= cfg.err_tol;
        }
        if (converged || k >= k_cap) break;

        prev_spectra = curr_spectra;
        k = std::min(k * cfg.k_growth_factor, k_cap);
    }

    std::vector<SensitivityResult> results(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        SensitivityResult r;
        r.parameter = params[i];
        r.spectrum = curr_spectra[i];
        r.k_used = k_used;
        r.est_rel_error = prev_spectra.empty() ? 0.0 : errors[i];
        r.t_grid = steady.t_grid;
        r.time_series = Vector::Zero(steady.t_grid.size());
        for (Index j = 0; j < steady.t_grid.size(); ++j) {
            Real v = r.spectrum[0].real();
            for (Index h = 1; h <= k_used; ++h) {
                Complex rot = std::polar(1.0, spec_final.ladder.omega0 * static_cast<Real>(h) * r.t_grid[j]);
                v += 2.0 * (r.spectrum[h] * rot).real();
            }
            r.time_series[j] = v;
        }
        results[i] = std::move(r);
    }
    return results;
}

RealMatrix transient_dsa(const MnaStructure& mna, const Circuit& c, const ParameterRef& p,
                         const TransientSolution& steady, const TransientConfig& cfg) {
    const Index n = steady.x_samples.cols();
    const Real dt = steady.period / static_cast<Real>(n);
    const ParamStamps stamps = param_stamps(mna, c, p);

    // xdot by spectral differentiation of the stored period
    const SpectralSolution spec = fft_period(steady, n / 2 - 1);
    SpectralSolution dspec = spec;
    for (Index k = 0; k <= spec.ladder.k_max; ++k)
        dspec.phasors.col(k) *= Complex(0.0, spec.ladder.omega0 * static_cast<Real>(k));
    const RealMatrix xdot = reconstruct_time(dspec, steady.t_grid);

    // forcing and linearized operator along the period
    RealMatrix forcing(mna.dim, n);
    std::vector<SparseMatrix> jg(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const Real t = steady.t_grid[i];
        forcing.col(i) = stamps.d_a_c * xdot.col(i) + stamps.d_a_g_at(t) * steady.x_samples.col(i);
        NonlinearEval nl = eval_nonlinear(mna, steady.x_samples.col(i));
        SparseMatrix m = mna.is_time_varying() ? mna.conductance_at(t) : mna.a_g;
        m -= nl.g_nl;
        jg[static_cast<std::size_t>(i)] = std::move(m);
    }

    Eigen::SparseLU<SparseMatrix> lu;
    bool pattern_ready = false;

    Vector y = Vector::Zero(mna.dim);
    Vector h = Vector::Zero(mna.dim);
    RealMatrix prev(mna.dim, n), curr(mna.dim, n);
    std::vector<Real> history;

    for (int m = 0; m < cfg.max_periods; ++m) {
        curr.col(0) = y;
        for (Index i = 1; i <= n; ++i) {
            const Index idx = i % n; // periodic coefficients
            const bool first = m == 0 && i == 1;
            const Real c_dt = (first ? 1.0 : 2.0) / dt;
            SparseMatrix mat = c_dt * mna.a_c + jg[static_cast<std::size_t>(idx)];
            if (!pattern_ready) {
                lu.analyzePattern(mat);
                pattern_ready = true;
            }
            lu.factorize(mat);
            if (lu.info() != Eigen::Success)
                throw SingularIterationMatrix("sensitivity iteration matrix is singular");
            Vector rhs = c_dt * (mna.a_c * y) + (first ? Vector(Vector::Zero(mna.dim)) : h) -
                         forcing.col(idx);
            Vector y_next = lu.solve(rhs);
            h = c_dt * (mna.a_c * (y_next - y)) - (first ? Vector(Vector::Zero(mna.dim)) : h);
            y = y_next;
            if (i < n) curr.col(i) = y;
        }
        if (m >= 1) {
            Real mismatch = detect_periodicity(prev, curr);
            history.push_back(mismatch);
            if (mismatch <= cfg.steady_tol) return curr;
        }
        prev.swap(curr);
    }
    throw NoSteadyState("sensitivity trajectory did not become periodic", history);
}

Vector fd_oracle(const Circuit& c, const QoiSelector& sel, const ParameterRef& p, Real h_rel,
                 const TransientConfig& cfg) {
    if (h_rel < 1e-8 || h_rel > 1e-2) throw Error("h_rel must lie in [1e-8, 1e-2]");

    auto perturbed = [&](Real factor) {
        Circuit cc = c;
        bool found = false;
        for (auto& d : cc.devices) {
            if (d.name == p.device_name) {
                auto it = d.params.find(p.param_name);
                if (it == d.params.end()) break;
                it->second *= factor;
                found = true;
            }
        }
        if (!found) throw UnknownParameter("parameter " + p.label() + " not found");
        return cc;
    };

    const Circuit c_plus = perturbed(1.0 + h_rel);
    const Circuit c_minus = perturbed(1.0 - h_rel);
    const MnaStructure mna_plus = assemble_static(c_plus);
    const MnaStructure mna_minus = assemble_static(c_minus);
    const TransientSolution sol_plus = run_to_steady_state(mna_plus, c_plus, cfg);
    const TransientSolution sol_minus = run_to_steady_state(mna_minus, c_minus, cfg);

    const Vector u_plus = sol_plus.x_samples.transpose() * sel.weights;
    const Vector u_minus = sol_minus.x_samples.transpose() * sel.weights;
    return (u_plus - u_minus) / (2.0 * h_rel * p.nominal_value);
}

} // namespace tfha
