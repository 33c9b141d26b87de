#pragma once

#include "tfha/mna.hpp"
#include "tfha/netlist.hpp"
#include "tfha/spectral.hpp"
#include "tfha/transient.hpp"
#include "tfha/types.hpp"

#include <string>
#include <vector>

namespace tfha {

class UnknownTarget : public Error {
public:
    using Error::Error;
};

class ZeroFineNorm : public Error {
public:
    using Error::Error;
};

/// Linear functional of the state: one node voltage (optionally differential)
/// or one branch current.
struct QoiSelector {
    std::string target;
    Vector weights; // length dim, +-1 pattern

    static QoiSelector parse(const std::string& target, const MnaStructure& mna);
};

/// Adjoint solutions for the per-harmonic QoI spectrum. Column k solves
/// J^H lambda = (QoI weights placed in harmonic block k); all columns share
/// one factorization of the Jacobian. Rows follow the internal two-sided
/// block layout.
struct AdjointSolution {
    HarmonicLadder ladder;
    Index dim = 0;
    Index n_samples = 0;
    ComplexMatrix columns; // (dim*(2K+1)) x (K+1)
};

struct SensitivityResult {
    ParameterRef parameter;
    ComplexVector spectrum; // dU/dp per harmonic, k = 0..k_used
    Vector time_series;     // reconstruction over t_grid
    Vector t_grid;
    Index k_used = 0;
    Real est_rel_error = 0.0;
};

struct TfhaConfig {
    Index k_start = 8;
    Index k_growth_factor = 2;
    Real err_tol = 1e-3;
    TransientConfig transient;
};

/// QoI weights repeated in every harmonic block (stacked one-sided layout,
/// index k*dim + i).
[[nodiscard]] ComplexVector qoi_rhs(const QoiSelector& sel, const HarmonicLadder& ladder, Index dim);

/// (dA/dp) * x_hat in the two-sided block layout; switch-resistance
/// parameters contribute through the spectrum of their conductance-derivative
/// waveform.
[[nodiscard]] ComplexVector param_rhs_two_sided(const ParamStamps& stamps, const SpectralSolution& spec,
                                                Index n_samples);

/// Direct sensitivity dx_hat/dp = -J^{-1} (dA/dp) x_hat, returned in the
/// stacked one-sided layout. Factorizes the Jacobian on every call.
[[nodiscard]] ComplexVector hb_direct_sensitivity(const HbSystem& sys, const SpectralSolution& spec,
                                                  const ParamStamps& stamps);

/// One factorization, K+1 adjoint back-substitutions.
[[nodiscard]] AdjointSolution hb_adjoint_solve(const HbSystem& sys, const ComplexVector& qoi_stacked);

/// dU/dp per harmonic: -lambda_k^H (dA/dp) x_hat. Cost per parameter is one
/// sparse right-hand-side build and K+1 inner products; no factorization.
[[nodiscard]] ComplexVector hb_adjoint_sensitivity(const AdjointSolution& adj, const SpectralSolution& spec,
                                                   const ParamStamps& stamps);

/// || fine - pad(coarse) ||_2 / || fine ||_2 over the fine harmonics.
[[nodiscard]] Real relative_error(const ComplexVector& coarse, const ComplexVector& fine);

/// Full pipeline: one transient steady state, then harmonic refinement with
/// one adjoint solve per level and one cheap evaluation per parameter.
[[nodiscard]] std::vector<SensitivityResult> tfha_run(const Circuit& c, const QoiSelector& sel,
                                                      const std::vector<ParameterRef>& params,
                                                      const TfhaConfig& cfg);

/// Trapezoidal integration of the direct-sensitivity DAE along the stored
/// steady state until the sensitivity itself is periodic; returns dx/dp over
/// the final period.
[[nodiscard]] RealMatrix transient_dsa(const MnaStructure& mna, const Circuit& c, const ParameterRef& p,
                                       const TransientSolution& steady, const TransientConfig& cfg);

/// Central finite difference of full steady-state re-simulations, projected
/// through the QoI weights; both runs share the source phase.
[[nodiscard]] Vector fd_oracle(const Circuit& c, const QoiSelector& sel, const ParameterRef& p,
                               Real h_rel, const TransientConfig& cfg);

} // namespace tfha
