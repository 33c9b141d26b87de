// Acceptance suite: one self-contained check per release criterion, each
// printing a PASS/FAIL line. Exit code is the number of failed criteria.

#include "tfha/mna.hpp"
#include "tfha/netlist.hpp"
#include "tfha/sensitivity.hpp"
#include "tfha/spectral.hpp"
#include "tfha/transient.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

using namespace tfha;
using Clock = std::chrono::steady_clock;

namespace {

double secs(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

std::string fixture_path(const char* name) {
    return std::string(TFHA_CIRCUITS_DIR) + "/" + name;
}

struct Fixture {
    std::string name;
    Circuit circuit;
    MnaStructure mna;
    TransientSolution steady;
    std::string qoi;
};

Fixture load_fixture(const char* file, const char* qoi, Index samples, Real steady_tol, int max_periods) {
    Fixture f;
    f.name = file;
    f.circuit = parse_netlist_file(fixture_path(file));
    f.mna = assemble_static(f.circuit);
    TransientConfig cfg;
    cfg.samples_per_period = samples;
    cfg.steady_tol = steady_tol;
    cfg.max_periods = max_periods;
    f.steady = run_to_steady_state(f.mna, f.circuit, cfg);
    f.qoi = qoi;
    return f;
}

ComplexVector project(const ComplexVector& stacked, const Vector& weights, Index dim) {
    const Index k_count = stacked.size() / dim;
    ComplexVector out(k_count);
    for (Index k = 0; k < k_count; ++k)
        out[k] = weights.cast<Complex>().dot(stacked.segment(k * dim, dim));
    return out;
}

bool report(int number, const char* title, bool pass, const std::string& detail) {
    std::printf("%s criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", number, title, detail.c_str());
    return pass;
}

// ---------------------------------------------------------------------------
// 1. adjoint-direct identity on five fixtures, all parameters, 1e-10, < 10 s
bool criterion1(std::vector<Fixture>& fixtures) {
    auto t0 = Clock::now();
    Real worst = 0.0;
    std::string worst_at = "-";
    for (auto& f : fixtures) {
        const Index k_max = 16;
        HarmonicLadder ladder = HarmonicLadder::for_period(f.steady.period, k_max);
        HbSystem sys = assemble_hb_jacobian(f.mna, f.steady, ladder);
        SpectralSolution spec = fft_period(f.steady, k_max);
        QoiSelector sel = QoiSelector::parse(f.qoi, f.mna);
        AdjointSolution adj = hb_adjoint_solve(sys, qoi_rhs(sel, ladder, f.mna.dim));
        for (const auto& p : list_parameters(f.circuit)) {
            ParamStamps st = param_stamps(f.mna, f.circuit, p);
            ComplexVector direct = project(hb_direct_sensitivity(sys, spec, st), sel.weights, f.mna.dim);
            ComplexVector adjoint = hb_adjoint_sensitivity(adj, spec, st);
            Real rel = (adjoint - direct).norm() / direct.norm();
            if (rel > worst) {
                worst = rel;
                worst_at = f.name + "/" + p.label();
            }
        }
    }
    double dt = secs(t0, Clock::now());
    char buf[160];
    std::snprintf(buf, sizeof(buf), "worst relative difference %.2e at %s, %.2f s", worst, worst_at.c_str(), dt);
    return report(1, "adjoint equals projected direct to 1e-10 on all fixtures", worst <= 1e-10 && dt < 10.0, buf);
}

// ---------------------------------------------------------------------------
// 2. analytic linear checks at 1e-8
bool criterion2(Fixture& divider) {
    // DC divider through the full pipeline
    QoiSelector sel = QoiSelector::parse("v(2)", divider.mna);
    auto params = list_parameters(divider.circuit);
    TfhaConfig cfg;
    cfg.transient.samples_per_period = 64;
    auto results = tfha_run(divider.circuit, sel, {params[0]}, cfg);
    const Real expected_dc = -1.0 * 1000.0 / (2000.0 * 2000.0);
    Real rel_dc = std::abs(results[0].spectrum[0].real() - expected_dc) / std::abs(expected_dc);

    // SIN-driven RC against the symbolic transfer-function derivative at w0
    Circuit rc = parse_netlist_file(fixture_path("rc_lowpass.cir"));
    MnaStructure mna = assemble_static(rc);
    HarmonicLadder ladder = HarmonicLadder::for_period(rc.fundamental_period, 4);
    SpectralSolution spec = hb_forward_solve(mna, rc, ladder, 1e-12, 5);
    HbSystem sys = assemble_hb_jacobian(mna, RealMatrix::Zero(mna.dim, 256), rc.fundamental_period, ladder);
    QoiSelector sel_rc = QoiSelector::parse("v(2)", mna);
    ParamStamps st = param_stamps(mna, rc, list_parameters(rc)[0]);
    AdjointSolution adj = hb_adjoint_solve(sys, qoi_rhs(sel_rc, ladder, mna.dim));
    ComplexVector s = hb_adjoint_sensitivity(adj, spec, st);
    const Real w0 = ladder.omega0;
    const Complex vin(0.0, -0.5);
    const Complex denom(1.0, w0 * 1e3 * 1e-6);
    const Complex expected_rc = vin * Complex(0.0, -w0 * 1e-6) / (denom * denom);
    Real rel_rc = std::abs(s[1] - expected_rc) / std::abs(expected_rc);

    char buf[120];
    std::snprintf(buf, sizeof(buf), "divider rel %.2e, RC transfer-function rel %.2e", rel_dc, rel_rc);
    return report(2, "closed-form divider and RC derivatives to 1e-8", rel_dc <= 1e-8 && rel_rc <= 1e-8, buf);
}

// ---------------------------------------------------------------------------
// 3. oracle triangle on the rectifier, pairwise 1e-2, K <= 32, < 60 s
bool criterion3() {
    auto t0 = Clock::now();
    Circuit c = parse_netlist_file(fixture_path("rectifier.cir"));
    MnaStructure mna = assemble_static(c);
    QoiSelector sel = QoiSelector::parse("v(2)", mna);
    ParameterRef p_r = list_parameters(c)[0];

    TfhaConfig cfg;
    cfg.err_tol = 1e-3;
    cfg.k_start = 8;
    cfg.transient.samples_per_period = 512;
    cfg.transient.steady_tol = 1e-8;
    auto results = tfha_run(c, sel, {p_r}, cfg);
    const Vector& tfha_series = results[0].time_series;

    TransientSolution steady = run_to_steady_state(mna, c, cfg.transient);
    Vector dsa_series = transient_dsa(mna, c, p_r, steady, cfg.transient).transpose() * sel.weights;
    Vector fd_series = fd_oracle(c, sel, p_r, 1e-4, cfg.transient);

    Real d1 = (tfha_series - dsa_series).norm() / dsa_series.norm();
    Real d2 = (tfha_series - fd_series).norm() / fd_series.norm();
    Real d3 = (dsa_series - fd_series).norm() / fd_series.norm();
    double dt = secs(t0, Clock::now());

    char buf[160];
    std::snprintf(buf, sizeof(buf), "tfha/dsa %.2e, tfha/fd %.2e, dsa/fd %.2e, k_used %ld, est %.2e, %.2f s",
                  d1, d2, d3, static_cast<long>(results[0].k_used), results[0].est_rel_error, dt);
    bool pass = d1 <= 1e-2 && d2 <= 1e-2 && d3 <= 1e-2 && results[0].k_used <= 32 &&
                results[0].est_rel_error <= 1e-3 && dt < 60.0;
    return report(3, "rectifier oracle triangle within 1e-2 and err_tol 1e-3 by K=32", pass, buf);
}

// ---------------------------------------------------------------------------
// 4. error estimator decreases across doublings; identical spectra give 0
bool criterion4(Fixture& rectifier, Fixture& boost) {
    auto estimates = [](Fixture& f) {
        QoiSelector sel = QoiSelector::parse(f.qoi, f.mna);
        ParameterRef p;
        for (const auto& q : list_parameters(f.circuit))
            if (q.device_name == "R1") p = q;
        ParamStamps st = param_stamps(f.mna, f.circuit, p);
        std::vector<Real> est;
        ComplexVector prev;
        for (Index k : {Index(8), Index(16), Index(32), Index(64)}) {
            HarmonicLadder ladder = HarmonicLadder::for_period(f.steady.period, k);
            HbSystem sys = assemble_hb_jacobian(f.mna, f.steady, ladder);
            SpectralSolution spec = fft_period(f.steady, k);
            AdjointSolution adj = hb_adjoint_solve(sys, qoi_rhs(sel, ladder, f.mna.dim));
            ComplexVector s = hb_adjoint_sensitivity(adj, spec, st);
            if (prev.size() > 0) est.push_back(relative_error(prev, s));
            prev = s;
        }
        return est;
    };

    std::vector<Real> er = estimates(rectifier);
    std::vector<Real> eb = estimates(boost);
    bool mono_r = er.size() == 3 && er[0] > er[1] && er[1] > er[2];
    bool mono_b = eb.size() == 3 && eb[0] > eb[1] && eb[1] > eb[2];

    ComplexVector s(3);
    s << Complex(0.4, 0.1), Complex(-0.2, 0.05), Complex(0.01, -0.03);
    ComplexVector padded = ComplexVector::Zero(5);
    padded.head(3) = s;
    bool exact_zero = relative_error(s, padded) == 0.0;

    char buf[200];
    std::snprintf(buf, sizeof(buf), "rectifier %.2e > %.2e > %.2e; boost %.2e > %.2e > %.2e; identical -> %s",
                  er[0], er[1], er[2], eb[0], eb[1], eb[2], exact_zero ? "0" : "nonzero");
    return report(4, "estimator decreases over three K doublings, exact zero on identical spectra",
                  mono_r && mono_b && exact_zero, buf);
}

// ---------------------------------------------------------------------------
// 5. boost sensitivity spectrum shows a side lobe above the initial rolloff
bool criterion5(Fixture& boost) {
    const Index k_max = 64;
    QoiSelector sel = QoiSelector::parse(boost.qoi, boost.mna);
    ParameterRef p;
    for (const auto& q : list_parameters(boost.circuit))
        if (q.device_name == "R1") p = q;
    HarmonicLadder ladder = HarmonicLadder::for_period(boost.steady.period, k_max);
    HbSystem sys = assemble_hb_jacobian(boost.mna, boost.steady, ladder);
    SpectralSolution spec = fft_period(boost.steady, k_max);
    AdjointSolution adj = hb_adjoint_solve(sys, qoi_rhs(sel, ladder, boost.mna.dim));
    ComplexVector s = hb_adjoint_sensitivity(adj, spec, param_stamps(boost.mna, boost.circuit, p));

    // a dip after the initial rolloff followed by a nearby revival of >= 1.4x
    bool found = false;
    Index at_min = 0, at_peak = 0;
    Real ratio = 0.0;
    Real running_max = std::abs(s[1]);
    for (Index k_min = 3; k_min < k_max && !found; ++k_min) {
        running_max = std::max(running_max, std::abs(s[k_min - 1]));
        const Real dip = std::abs(s[k_min]);
        if (dip >= 0.5 * running_max) continue; // still on the initial rolloff
        for (Index k = k_min + 1; k <= std::min<Index>(k_max, k_min + 8); ++k) {
            if (std::abs(s[k]) >= 1.4 * dip) {
                found = true;
                at_min = k_min;
                at_peak = k;
                ratio = std::abs(s[k]) / dip;
                break;
            }
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "dip at k=%ld, local maximum at k=%ld, revival ratio %.2f",
                  static_cast<long>(at_min), static_cast<long>(at_peak), ratio);
    return report(5, "boost dVdrain/dR1 spectrum has a side lobe above the rolloff", found, buf);
}

// ---------------------------------------------------------------------------
// 6. adjoint path with one factorization beats P direct solves at K=64
bool criterion6(Fixture& boost) {
    const Index k_max = 64;
    const QoiSelector sel = QoiSelector::parse(boost.qoi, boost.mna);
    HarmonicLadder ladder = HarmonicLadder::for_period(boost.steady.period, k_max);
    HbSystem sys = assemble_hb_jacobian(boost.mna, boost.steady, ladder);
    SpectralSolution spec = fft_period(boost.steady, k_max);
    auto params = list_parameters(boost.circuit);
    std::vector<ParamStamps> stamps;
    for (const auto& p : params) stamps.push_back(param_stamps(boost.mna, boost.circuit, p));

    auto t0 = Clock::now();
    AdjointSolution adj = hb_adjoint_solve(sys, qoi_rhs(sel, ladder, boost.mna.dim));
    for (const auto& st : stamps) (void)hb_adjoint_sensitivity(adj, spec, st);
    auto t1 = Clock::now();
    for (const auto& st : stamps) (void)hb_direct_sensitivity(sys, spec, st);
    auto t2 = Clock::now();

    double t_adj = secs(t0, t1);
    double t_dir = secs(t1, t2);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "P=%zu: adjoint %.3f s vs direct %.3f s, ratio %.3f", params.size(),
                  t_adj, t_dir, t_adj / t_dir);
    return report(6, "adjoint path costs at most half of P direct solves at K=64", t_adj <= 0.5 * t_dir, buf);
}

// ---------------------------------------------------------------------------
// 7. numerical hygiene: conversion oracle, trapezoidal order, stamp FDs
bool criterion7(Fixture& boost) {
    // conversion-matrix product oracle at full K
    const Index n = 256;
    std::mt19937 rng(97);
    std::uniform_real_distribution<Real> dist(-1.0, 1.0);
    auto band_limited = [&](Index band, ComplexVector& coeffs) {
        coeffs = ComplexVector::Zero(band + 1);
        coeffs[0] = Complex(dist(rng), 0.0);
        for (Index k = 1; k <= band; ++k) coeffs[k] = Complex(dist(rng), dist(rng));
        Vector samples(n);
        for (Index i = 0; i < n; ++i) {
            Real t = 2.0 * kPi * static_cast<Real>(i) / static_cast<Real>(n);
            Real v = coeffs[0].real();
            for (Index k = 1; k <= band; ++k)
                v += 2.0 * (coeffs[k] * std::polar(1.0, static_cast<Real>(k) * t)).real();
            samples[i] = v;
        }
        return samples;
    };
    ComplexVector g_coeffs, dx_coeffs;
    Vector g = band_limited(n / 8, g_coeffs);
    Vector dx = band_limited(n / 8, dx_coeffs);
    const Index k_full = n / 2 - 1;
    ScalarConversion conv(g, k_full);
    ComplexVector dx_padded = ComplexVector::Zero(k_full + 1);
    dx_padded.head(dx_coeffs.size()) = dx_coeffs;
    ComplexVector w = conv.apply(dx_padded);
    ComplexVector oracle = spectrum_onesided(g.cwiseProduct(dx), k_full);
    Real conv_err = (w - oracle).norm() / oracle.norm();

    // trapezoidal second order on the RC step fixture
    Circuit rc = parse_netlist("rc step\nV1 1 0 DC 5\nR1 1 2 1k\nC1 2 0 1u\n.period 1m\n.end\n");
    MnaStructure mna = assemble_static(rc);
    auto integrate = [&](Index steps) {
        TransientConfig cfg;
        cfg.newton_tol = 1e-13;
        TrapezoidalStepper stepper(mna, cfg);
        const Real t_end = 2e-3;
        const Real dt = t_end / static_cast<Real>(steps);
        Vector x = Vector::Zero(mna.dim);
        Vector h = Vector::Zero(mna.dim);
        for (Index i = 1; i <= steps; ++i) x = stepper.step(x, h, dt * i, dt, i == 1);
        return x[1];
    };
    const Real exact = 5.0 * (1.0 - std::exp(-2e-3 / 1e-3));
    Real e1 = std::abs(integrate(128) - exact);
    Real e2 = std::abs(integrate(256) - exact);
    Real order_ratio = e1 / e2;

    // analytic stamps against finite differences of assembly
    Real worst_stamp = 0.0;
    for (const auto& p : list_parameters(boost.circuit)) {
        ParamStamps st = param_stamps(boost.mna, boost.circuit, p);
        const Real h = 1e-6 * p.nominal_value;
        auto modified = [&](Real delta) {
            Circuit cc = boost.circuit;
            for (auto& d : cc.devices)
                if (d.name == p.device_name) d.params[p.param_name] += delta;
            return assemble_static(cc);
        };
        MnaStructure plus = modified(h);
        MnaStructure minus = modified(-h);
        RealMatrix fd_c = (RealMatrix(plus.a_c) - RealMatrix(minus.a_c)) / (2.0 * h);
        worst_stamp = std::max(worst_stamp,
                               (fd_c - RealMatrix(st.d_a_c)).norm() / std::max(1.0, fd_c.norm()));
        for (Real t : {0.05e-6, 1.7e-6, 3.45e-6, 7e-6}) {
            RealMatrix fd_g =
                (RealMatrix(plus.conductance_at(t)) - RealMatrix(minus.conductance_at(t))) / (2.0 * h);
            RealMatrix an = RealMatrix(st.d_a_g_at(t));
            worst_stamp = std::max(worst_stamp, (fd_g - an).norm() / std::max(1.0, fd_g.norm()));
        }
    }

    char buf[160];
    std::snprintf(buf, sizeof(buf), "conversion %.2e, dt-halving ratio %.2f, worst stamp FD %.2e", conv_err,
                  order_ratio, worst_stamp);
    bool pass = conv_err <= 1e-10 && order_ratio >= 3.5 && order_ratio <= 4.5 && worst_stamp <= 1e-6;
    return report(7, "conversion oracle 1e-10, trapezoidal order 2, stamps match FD", pass, buf);
}

} // namespace

int main() {
    int failures = 0;
    try {
        std::vector<Fixture> fixtures;
        fixtures.push_back(load_fixture("divider.cir", "v(2)", 64, 1e-6, 50));
        fixtures.push_back(load_fixture("rc_lowpass.cir", "v(2)", 256, 1e-9, 100));
        fixtures.push_back(load_fixture("rlc_series.cir", "v(3)", 256, 1e-8, 200));
        fixtures.push_back(load_fixture("rectifier.cir", "v(2)", 512, 1e-8, 200));
        fixtures.push_back(load_fixture("boost.cir", "v(6)", 1024, 1e-6, 800));

        failures += !criterion1(fixtures);
        failures += !criterion2(fixtures[0]);
        failures += !criterion3();
        failures += !criterion4(fixtures[3], fixtures[4]);
        failures += !criterion5(fixtures[4]);
        failures += !criterion6(fixtures[4]);
        failures += !criterion7(fixtures[4]);
    } catch (const std::exception& e) {
        std::printf("FAIL acceptance suite aborted: %s\n", e.what());
        return 99;
    }
    std::printf("%s\n", failures == 0 ? "all acceptance criteria passed" : "acceptance failures present");
    return failures;
}
