#pragma once

#include "tfha/mna.hpp"
#include "tfha/transient.hpp"
#include "tfha/types.hpp"

#include <Eigen/SparseLU>
#include <memory>
#include <vector>

namespace tfha {

class HarmonicOverflow : public Error {
public:
    using Error::Error;
};

class HbDivergence : public Error {
public:
    HbDivergence(const std::string& what, std::vector<Real> history)
        : Error(what), history_(std::move(history)) {}
    [[nodiscard]] const std::vector<Real>& residual_history() const { return history_; }

private:
    std::vector<Real> history_;
};

class SingularJacobian : public Error {
public:
    using Error::Error;
};

struct HarmonicLadder {
    Real omega0 = 0.0; // rad/s
    Index k_max = 0;
    Vector frequencies; // k * omega0 for k = 0..k_max

    static HarmonicLadder for_period(Real period, Index k_max);
};

/// One-sided harmonic spectrum: x(t) = X_0 + sum_{k>=1} 2 Re(X_k e^{jk w0 t}),
/// column k of phasors holding X_k. Column 0 is real.
struct SpectralSolution {
    HarmonicLadder ladder;
    ComplexMatrix phasors; // dim x (k_max+1)
    Index n_samples = 0;   // time grid the spectrum came from
};

/// Forward DFT of real uniform samples (power-of-two length), returning the
/// one-sided coefficients 0..k_max in the convention above.
[[nodiscard]] ComplexVector spectrum_onesided(const Vector& samples, Index k_max);

[[nodiscard]] SpectralSolution fft_period(const TransientSolution& sol, Index k_max);

/// Evaluate the one-sided series at arbitrary instants.
[[nodiscard]] RealMatrix reconstruct_time(const SpectralSolution& spec, const Vector& t_grid);

/// Spectrum of the product g(t)*dx(t) expressed as a linear-plus-conjugate
/// map on one-sided phasors: W_k = sum_l G_{k-l} D_l + sum_{l>=1} G_{k+l}
/// conj(D_l). This is the scalar building block of the HB Jacobian coupling.
class ScalarConversion {
public:
    ScalarConversion(const Vector& g_samples, Index k_max);

    [[nodiscard]] ComplexVector apply(const ComplexVector& onesided) const;
    [[nodiscard]] Complex coefficient(Index m) const; // G_m, conjugated for m < 0
    [[nodiscard]] Index k_max() const { return k_max_; }

private:
    ComplexVector g_hat_; // m = 0..min(2*k_max, N/2-1)
    Index k_max_;
};

/// Frequency-domain system matrix and harmonic-balance Jacobian built around
/// a periodic operating point. The one-sided Jacobian couples conjugated
/// phasors, so solves run on the equivalent two-sided system of size
/// dim*(2K+1) with block k at rows (k + K)*dim.
struct HbSystem {
    HarmonicLadder ladder;
    Index dim = 0;
    Index n_samples = 0;

    /// Diagonal blocks jk*w0*A_C + A_G with the switch time-average folded in.
    std::vector<SparseComplex> block_a;

    /// Per nonlinear/time-varying device: unit conductance pattern and the
    /// spectrum of its conductance waveform along the period.
    std::vector<SparseMatrix> patterns;
    std::vector<ComplexVector> g_hat; // m = 0..m_max per device

    SparseComplex two_sided;

    [[nodiscard]] Index two_sided_dim() const { return dim * (2 * ladder.k_max + 1); }
    [[nodiscard]] Index block_row(Index k) const { return (k + ladder.k_max) * dim; }

    /// Coupling block subtracted from block_a at (k,l): -G_{k-l} * pattern,
    /// summed over devices (the conjugate partner uses G_{k+l}).
    [[nodiscard]] SparseComplex coupling_block(Index k, Index l) const;
};

/// LU factorization of the two-sided HB Jacobian; one factorization serves
/// forward and adjoint solves, with one refinement pass for tight
/// adjoint/direct agreement.
class HbFactorization {
public:
    explicit HbFactorization(const HbSystem& sys);

    [[nodiscard]] ComplexVector solve(const ComplexVector& rhs) const;
    [[nodiscard]] ComplexVector solve_adjoint(const ComplexVector& rhs) const;

private:
    SparseComplex matrix_;
    // Eigen's adjoint-solve view needs non-const access; solves are sequential
    mutable Eigen::SparseLU<SparseComplex> lu_;
};

[[nodiscard]] std::vector<SparseComplex> assemble_hb_matrix(const MnaStructure& mna,
                                                            const HarmonicLadder& ladder);

[[nodiscard]] HbSystem assemble_hb_jacobian(const MnaStructure& mna, const RealMatrix& x_samples,
                                            Real period, const HarmonicLadder& ladder);
[[nodiscard]] HbSystem assemble_hb_jacobian(const MnaStructure& mna, const TransientSolution& steady,
                                            const HarmonicLadder& ladder);

/// Newton iteration on the frequency-domain residual, nonlinear currents
/// evaluated by inverse FFT / device eval / FFT per iteration.
[[nodiscard]] SpectralSolution hb_forward_solve(const MnaStructure& mna, const Circuit& c,
                                                const HarmonicLadder& ladder, Real tol, int max_iter);

// stacked-layout helpers (one-sided index = k*dim + i)
[[nodiscard]] ComplexVector stack_onesided(const ComplexMatrix& phasors);
[[nodiscard]] ComplexMatrix unstack_onesided(const ComplexVector& stacked, Index dim);
[[nodiscard]] ComplexVector two_sided_from_onesided(const ComplexMatrix& phasors);
[[nodiscard]] ComplexMatrix onesided_from_two_sided(const ComplexVector& stacked2, Index dim, Index k_max);

} // namespace tfha
