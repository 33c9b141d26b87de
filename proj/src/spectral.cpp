#include "tfha/spectral.hpp"

#include <cmath>
#include <sstream>

namespace tfha {

namespace {

bool power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

// iterative radix-2 with table twiddles (no recurrence error accumulation)
void fft_inplace(std::vector<Complex>& a) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    std::vector<Complex> tw(n / 2);
    for (std::size_t j = 0; j < n / 2; ++j)
        tw[j] = std::polar(1.0, -2.0 * kPi * static_cast<Real>(j) / static_cast<Real>(n));
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < len / 2; ++j) {
                Complex u = a[i + j];
                Complex v = a[i + j + len / 2] * tw[j * stride];
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
            }
        }
    }
}

ComplexVector dft_bins(const Vector& samples, Index bins) {
    const Index n = samples.size();
    std::vector<Complex> buf(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = Complex(samples[i], 0.0);
    fft_inplace(buf);
    ComplexVector out(bins);
    for (Index m = 0; m < bins; ++m) out[m] = buf[static_cast<std::size_t>(m)] / static_cast<Real>(n);
    return out;
}

void check_grid(Index n, Index k_max) {
    if (!power_of_two(n)) throw Error("sample count must be a power of two");
    if (k_max < 1) throw HarmonicOverflow("k_max must be >= 1");
    if (k_max > n / 2 - 1) {
        std::ostringstream os;
        os << "k_max " << k_max << " needs more than " << n << " samples per period";
        throw HarmonicOverflow(os.str());
    }
}

/// Conductance waveforms of the coupling devices along one period.
struct DeviceWaveforms {
    std::vector<SparseMatrix> patterns;
    std::vector<Vector> samples;
};

void unit_conductance(std::vector<Triplet>& t, Index a, Index b) {
    if (a >= 0) {
        t.emplace_back(a, a, 1.0);
        if (b >= 0) t.emplace_back(a, b, -1.0);
    }
    if (b >= 0) {
        t.emplace_back(b, b, 1.0);
        if (a >= 0) t.emplace_back(b, a, -1.0);
    }
}

DeviceWaveforms sample_device_conductances(const MnaStructure& mna, const RealMatrix& x_samples,
                                           Real period) {
    const Index n = x_samples.cols();
    const Real dt = period / static_cast<Real>(n);
    DeviceWaveforms out;

    for (const auto& d : mna.diodes) {
        std::vector<Triplet> t;
        unit_conductance(t, d.anode, d.cathode);
        SparseMatrix p(mna.dim, mna.dim);
        p.setFromTriplets(t.begin(), t.end());
        Vector g(n);
        for (Index i = 0; i < n; ++i) {
            Real va = d.anode >= 0 ? x_samples(d.anode, i) : 0.0;
            Real vb = d.cathode >= 0 ? x_samples(d.cathode, i) : 0.0;
            Real cur = 0.0, cond = 0.0;
            d.current_and_conductance(va - vb, cur, cond);
            g[i] = cond;
        }
        out.patterns.push_back(std::move(p));
        out.samples.push_back(std::move(g));
    }
    for (const auto& sw : mna.switches) {
        Vector g(n);
        for (Index i = 0; i < n; ++i) g[i] = sw.conductance(dt * static_cast<Real>(i));
        out.patterns.push_back(sw.pattern);
        out.samples.push_back(std::move(g));
    }
    return out;
}

} // namespace

HarmonicLadder HarmonicLadder::for_period(Real period, Index k_max) {
    if (period <= 0.0) throw Error("period must be positive");
    if (k_max < 1) throw HarmonicOverflow("k_max must be >= 1");
    HarmonicLadder ladder;
    ladder.omega0 = 2.0 * kPi / period;
    ladder.k_max = k_max;
    ladder.frequencies = ladder.omega0 * Vector::LinSpaced(k_max + 1, 0.0, static_cast<Real>(k_max));
    return ladder;
}

ComplexVector spectrum_onesided(const Vector& samples, Index k_max) {
    check_grid(samples.size(), k_max);
    ComplexVector out = dft_bins(samples, k_max + 1);
    out[0] = Complex(out[0].real(), 0.0);
    return out;
}

SpectralSolution fft_period(const TransientSolution& sol, Index k_max) {
    const Index n = sol.x_samples.cols();
    check_grid(n, k_max);

    SpectralSolution spec;
    spec.ladder = HarmonicLadder::for_period(sol.period, k_max);
    spec.n_samples = n;
    spec.phasors = ComplexMatrix(sol.x_samples.rows(), k_max + 1);
    for (Index r = 0; r < sol.x_samples.rows(); ++r)
        spec.phasors.row(r) = spectrum_onesided(sol.x_samples.row(r).transpose(), k_max).transpose();
    return spec;
}

RealMatrix reconstruct_time(const SpectralSolution& spec, const Vector& t_grid) {
    const Index dim = spec.phasors.rows();
    const Index k_max = spec.ladder.k_max;
    RealMatrix out(dim, t_grid.size());
    for (Index j = 0; j < t_grid.size(); ++j) {
        Vector col = spec.phasors.col(0).real();
        for (Index k = 1; k <= k_max; ++k) {
            Complex rot = std::polar(1.0, spec.ladder.omega0 * static_cast<Real>(k) * t_grid[j]);
            col += 2.0 * (spec.phasors.col(k) * rot).real();
        }
        out.col(j) = col;
    }
    return out;
}

ScalarConversion::ScalarConversion(const Vector& g_samples, Index k_max) : k_max_(k_max) {
    const Index n = g_samples.size();
    check_grid(n, k_max);
    const Index m_max = std::min<Index>(2 * k_max, n / 2 - 1);
    g_hat_ = dft_bins(g_samples, m_max + 1);
}

Complex ScalarConversion::coefficient(Index m) const {
    Index a = m < 0 ? -m : m;
    if (a >= g_hat_.size()) return Complex(0.0, 0.0);
    return m < 0 ? std::conj(g_hat_[a]) : g_hat_[a];
}

ComplexVector ScalarConversion::apply(const ComplexVector& onesided) const {
    if (onesided.size() != k_max_ + 1) throw ShapeMismatch("phasor vector length must be k_max+1");
    ComplexVector out = ComplexVector::Zero(k_max_ + 1);
    for (Index k = 0; k <= k_max_; ++k) {
        Complex acc(0.0, 0.0);
        for (Index l = 0; l <= k_max_; ++l) acc += coefficient(k - l) * onesided[l];
        for (Index l = 1; l <= k_max_; ++l) acc += coefficient(k + l) * std::conj(onesided[l]);
        out[k] = acc;
    }
    return out;
}

std::vector<SparseComplex> assemble_hb_matrix(const MnaStructure& mna, const HarmonicLadder& ladder) {
    std::vector<SparseComplex> blocks;
    blocks.reserve(static_cast<std::size_t>(ladder.k_max) + 1);
    SparseComplex a_g = mna.a_g.cast<Complex>();
    for (const auto& sw : mna.switches) a_g += Complex(sw.duty_average(), 0.0) * sw.pattern.cast<Complex>();
    SparseComplex a_c = mna.a_c.cast<Complex>();
    for (Index k = 0; k <= ladder.k_max; ++k) {
        SparseComplex block = a_g;
        if (k > 0) block += Complex(0.0, ladder.omega0 * static_cast<Real>(k)) * a_c;
        block.makeCompressed();
        blocks.push_back(std::move(block));
    }
    return blocks;
}

SparseComplex HbSystem::coupling_block(Index k, Index l) const {
    SparseComplex out(dim, dim);
    for (std::size_t d = 0; d < patterns.size(); ++d) {
        Index m = k - l;
        Index a = m < 0 ? -m : m;
        Complex coeff(0.0, 0.0);
        if (a < g_hat[d].size()) coeff = m < 0 ? std::conj(g_hat[d][a]) : g_hat[d][a];
        out += -coeff * patterns[d].cast<Complex>();
    }
    out.makeCompressed();
    return out;
}

HbFactorization::HbFactorization(const HbSystem& sys) : matrix_(sys.two_sided) {
    lu_.compute(matrix_);
    if (lu_.info() != Eigen::Success)
        throw SingularJacobian("HB Jacobian factorization failed (matrix singular or structurally deficient)");
}

ComplexVector HbFactorization::solve(const ComplexVector& rhs) const {
    ComplexVector x = lu_.solve(rhs);
    ComplexVector r = rhs - matrix_ * x;
    x += lu_.solve(r);
    return x;
}

ComplexVector HbFactorization::solve_adjoint(const ComplexVector& rhs) const {
    ComplexVector x = lu_.adjoint().solve(rhs);
    ComplexVector r = rhs - matrix_.adjoint() * x;
    x += lu_.adjoint().solve(r);
    return x;
}

HbSystem assemble_hb_jacobian(const MnaStructure& mna, const RealMatrix& x_samples, Real period,
                              const HarmonicLadder& ladder) {
    const Index n = x_samples.cols();
    const Index k_max = ladder.k_max;
    check_grid(n, k_max);
    if (x_samples.rows() != mna.dim) throw ShapeMismatch("sample matrix row count must equal dim");

    HbSystem sys;
    sys.ladder = ladder;
    sys.dim = mna.dim;
    sys.n_samples = n;
    sys.block_a = assemble_hb_matrix(mna, ladder);

    DeviceWaveforms waves = sample_device_conductances(mna, x_samples, period);
    const Index m_max = std::min<Index>(2 * k_max, n / 2 - 1);
    for (std::size_t d = 0; d < waves.patterns.size(); ++d) {
        sys.patterns.push_back(waves.patterns[d]);
        sys.g_hat.push_back(dft_bins(waves.samples[d], m_max + 1));
    }

    // two-sided matrix: delta_{kl} (jk w0 A_C + A_G) + sum_dev G_dev[k-l] P_dev
    const Index nblocks = 2 * k_max + 1;
    std::vector<TripletC> trip;
    std::size_t coupling_nnz = 0;
    for (const auto& p : sys.patterns) coupling_nnz += static_cast<std::size_t>(p.nonZeros());
    trip.reserve(static_cast<std::size_t>(nblocks) * static_cast<std::size_t>(mna.a_g.nonZeros() + mna.a_c.nonZeros()) +
                 static_cast<std::size_t>(nblocks) * static_cast<std::size_t>(nblocks) * coupling_nnz);

    for (Index kb = 0; kb < nblocks; ++kb) {
        const Index k = kb - k_max;
        const Index off = kb * mna.dim;
        const Complex jw(0.0, ladder.omega0 * static_cast<Real>(k));
        for (Index c = 0; c < mna.a_g.outerSize(); ++c)
            for (SparseMatrix::InnerIterator it(mna.a_g, c); it; ++it)
                trip.emplace_back(off + it.row(), off + it.col(), Complex(it.value(), 0.0));
        if (k != 0)
            for (Index c = 0; c < mna.a_c.outerSize(); ++c)
                for (SparseMatrix::InnerIterator it(mna.a_c, c); it; ++it)
                    trip.emplace_back(off + it.row(), off + it.col(), jw * it.value());
    }

    for (std::size_t d = 0; d < sys.patterns.size(); ++d) {
        const auto& p = sys.patterns[d];
        const auto& g = sys.g_hat[d];
        for (Index kb = 0; kb < nblocks; ++kb) {
            for (Index lb = 0; lb < nblocks; ++lb) {
                const Index m = kb - lb;
                const Index a = m < 0 ? -m : m;
                if (a >= g.size()) continue;
                const Complex coeff = m < 0 ? std::conj(g[a]) : g[a];
                if (coeff == Complex(0.0, 0.0)) continue;
                const Index ro = kb * mna.dim;
                const Index co = lb * mna.dim;
                for (Index c = 0; c < p.outerSize(); ++c)
                    for (SparseMatrix::InnerIterator it(p, c); it; ++it)
                        trip.emplace_back(ro + it.row(), co + it.col(), Complex(coeff * it.value()));
            }
        }
    }

    sys.two_sided = SparseComplex(sys.two_sided_dim(), sys.two_sided_dim());
    sys.two_sided.setFromTriplets(trip.begin(), trip.end());
    sys.two_sided.makeCompressed();
    return sys;
}

HbSystem assemble_hb_jacobian(const MnaStructure& mna, const TransientSolution& steady,
                              const HarmonicLadder& ladder) {
    return assemble_hb_jacobian(mna, steady.x_samples, steady.period, ladder);
}

ComplexVector stack_onesided(const ComplexMatrix& phasors) {
    const Index dim = phasors.rows();
    const Index cols = phasors.cols();
    ComplexVector out(dim * cols);
    for (Index k = 0; k < cols; ++k) out.segment(k * dim, dim) = phasors.col(k);
    return out;
}

ComplexMatrix unstack_onesided(const ComplexVector& stacked, Index dim) {
    if (stacked.size() % dim != 0) throw ShapeMismatch("stacked vector not a multiple of dim");
    const Index cols = stacked.size() / dim;
    ComplexMatrix out(dim, cols);
    for (Index k = 0; k < cols; ++k) out.col(k) = stacked.segment(k * dim, dim);
    return out;
}

ComplexVector two_sided_from_onesided(const ComplexMatrix& phasors) {
    const Index dim = phasors.rows();
    const Index k_max = phasors.cols() - 1;
    ComplexVector out(dim * (2 * k_max + 1));
    for (Index k = -k_max; k <= k_max; ++k) {
        ComplexVector block = k >= 0 ? ComplexVector(phasors.col(k)) : ComplexVector(phasors.col(-k).conjugate());
        out.segment((k + k_max) * dim, dim) = block;
    }
    return out;
}

ComplexMatrix onesided_from_two_sided(const ComplexVector& stacked2, Index dim, Index k_max) {
    if (stacked2.size() != dim * (2 * k_max + 1)) throw ShapeMismatch("two-sided vector has wrong length");
    ComplexMatrix out(dim, k_max + 1);
    for (Index k = 0; k <= k_max; ++k) out.col(k) = stacked2.segment((k + k_max) * dim, dim);
    return out;
}

SpectralSolution hb_forward_solve(const MnaStructure& mna, const Circuit& c,
                                  const HarmonicLadder& ladder, Real tol, int max_iter) {
    const Index k_max = ladder.k_max;
    const Real period = 2.0 * kPi / ladder.omega0;
    Index n = 256;
    while (n < 4 * (k_max + 1)) n *= 2;
    const Real dt = period / static_cast<Real>(n);

    SpectralSolution spec;
    spec.ladder = ladder;
    spec.n_samples = n;
    spec.phasors = ComplexMatrix::Zero(mna.dim, k_max + 1);

    // source spectrum (two-sided), fixed across iterations
    RealMatrix src(mna.dim, n);
    for (Index i = 0; i < n; ++i) src.col(i) = eval_sources(mna, dt * static_cast<Real>(i));
    ComplexMatrix src_hat(mna.dim, k_max + 1);
    for (Index r = 0; r < mna.dim; ++r)
        src_hat.row(r) = spectrum_onesided(src.row(r).transpose(), k_max).transpose();
    const ComplexVector is2 = two_sided_from_onesided(src_hat);

    Vector t_grid = dt * Vector::LinSpaced(n, 0.0, static_cast<Real>(n - 1));
    const SparseComplex a_g_c = mna.a_g.cast<Complex>();
    const SparseComplex a_c_c = mna.a_c.cast<Complex>();
    std::vector<Real> history;

    for (int iter = 0; iter <= max_iter; ++iter) {
        RealMatrix x_t = reconstruct_time(spec, t_grid);

        // leaving currents of diodes and switches along the period
        RealMatrix w = RealMatrix::Zero(mna.dim, n);
        for (const auto& d : mna.diodes) {
            for (Index i = 0; i < n; ++i) {
                Real va = d.anode >= 0 ? x_t(d.anode, i) : 0.0;
                Real vb = d.cathode >= 0 ? x_t(d.cathode, i) : 0.0;
                Real cur = 0.0, cond = 0.0;
                d.current_and_conductance(va - vb, cur, cond);
                if (d.anode >= 0) w(d.anode, i) += cur;
                if (d.cathode >= 0) w(d.cathode, i) -= cur;
            }
        }
        for (const auto& sw : mna.switches) {
            for (Index i = 0; i < n; ++i)
                w.col(i) += sw.conductance(t_grid[i]) * (sw.pattern * x_t.col(i));
        }

        ComplexMatrix w_hat(mna.dim, k_max + 1);
        for (Index r = 0; r < mna.dim; ++r)
            w_hat.row(r) = spectrum_onesided(w.row(r).transpose(), k_max).transpose();

        // residual per two-sided block: A_k X_k + W_k - Is_k
        ComplexVector x2 = two_sided_from_onesided(spec.phasors);
        ComplexVector w2 = two_sided_from_onesided(w_hat);
        ComplexVector res(mna.dim * (2 * k_max + 1));
        for (Index k = -k_max; k <= k_max; ++k) {
            const Index off = (k + k_max) * mna.dim;
            ComplexVector xk = x2.segment(off, mna.dim);
            ComplexVector rk = a_g_c * xk;
            if (k != 0) rk += Complex(0.0, ladder.omega0 * static_cast<Real>(k)) * (a_c_c * xk);
            rk += w2.segment(off, mna.dim) - is2.segment(off, mna.dim);
            res.segment(off, mna.dim) = rk;
        }

        const Real res_norm = res.norm();
        history.push_back(res_norm);
        if (res_norm <= tol) return spec;
        if (iter == max_iter) break;

        HbSystem sys = assemble_hb_jacobian(mna, x_t, period, ladder);
        HbFactorization fact(sys);
        ComplexVector delta2 = fact.solve(-res);
        ComplexMatrix delta1 = onesided_from_two_sided(delta2, mna.dim, k_max);
        spec.phasors += delta1;
        for (Index r = 0; r < mna.dim; ++r)
            spec.phasors(r, 0) = Complex(spec.phasors(r, 0).real(), 0.0);
    }

    std::ostringstream os;
    os << "HB Newton did not converge after " << max_iter << " iterations (residual " << history.back()
       << ")";
    throw HbDivergence(os.str(), history);
}

} // namespace tfha
