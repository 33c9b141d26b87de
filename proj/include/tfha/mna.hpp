#pragma once

#include "tfha/netlist.hpp"
#include "tfha/types.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace tfha {

class UnknownParameter : public Error {
public:
    using Error::Error;
};

/// Shockley diode with junction-voltage limiting: beyond v_crit the
/// exponential continues linearly, keeping current and conductance C1.
struct DiodeStamp {
    Index anode = -1;   // -1 means ground
    Index cathode = -1;
    Real is = 0.0;
    Real n_vt = 0.0;    // N * Vt
    Real v_crit = 0.0;
    Real g_crit = 0.0;
    Real i_crit = 0.0;

    void current_and_conductance(Real v, Real& i, Real& g) const;
};

/// Time-varying conductance interpolating Roff^-1 <-> Ron^-1 along the
/// control-pulse ramps.
struct SwitchStamp {
    std::string device_name;
    Real g_on = 0.0;
    Real g_off = 0.0;
    Waveform control;
    SparseMatrix pattern; // unit conductance incidence at the switch terminals

    [[nodiscard]] Real conductance(Real t) const;
    [[nodiscard]] Real duty_average() const; // exact mean of conductance over one control period
};

struct SourceStamp {
    Index node_pos = -1;
    Index node_neg = -1;
    Index branch = -1; // voltage sources only
    Waveform waveform;
    bool is_voltage = false;
};

/// MNA matrices of the circuit: F = a_c*dx/dt + A_G(t)*x - i_nl(x) - i_s(t)
/// with A_G(t) = a_g plus the switch conductance patterns at time t.
struct MnaStructure {
    Index n_nodes = 0;
    Index n_branches = 0;
    Index dim = 0;
    SparseMatrix a_g;
    SparseMatrix a_c;
    std::vector<std::string> unknown_names; // "v(node)" then "i(device)"
    std::unordered_map<std::string, Index> node_index;
    std::unordered_map<std::string, Index> branch_index;

    std::vector<DiodeStamp> diodes;
    std::vector<SwitchStamp> switches;
    std::vector<SourceStamp> sources;

    [[nodiscard]] SparseMatrix conductance_at(Real t) const;
    [[nodiscard]] bool has_nonlinear() const { return !diodes.empty(); }
    [[nodiscard]] bool is_time_varying() const { return !switches.empty(); }
    [[nodiscard]] Index node_of(const std::string& name) const; // -1 for ground
};

/// Voltage-dependent current injections and their state derivative, in the
/// source-like sign convention: the residual subtracts i_nl, and the Newton
/// matrix is A_G - g_nl.
struct NonlinearEval {
    Vector i_nl;
    SparseMatrix g_nl;
};

/// Derivative of the system matrices w.r.t. one design parameter. For a
/// switch on-resistance the conductance derivative is time dependent:
/// dA_G(t)/dp = d_a_g + mod_scale(t) * mod_pattern.
struct ParamStamps {
    SparseMatrix d_a_c;
    SparseMatrix d_a_g;
    SparseMatrix mod_pattern;
    bool time_varying = false;
    Waveform control;
    Real ron = 0.0;

    [[nodiscard]] Real mod_scale(Real t) const;
    [[nodiscard]] SparseMatrix d_a_g_at(Real t) const;
};

[[nodiscard]] MnaStructure assemble_static(const Circuit& c);
[[nodiscard]] Vector eval_sources(const MnaStructure& mna, Real t);
[[nodiscard]] NonlinearEval eval_nonlinear(const MnaStructure& mna, const Vector& x);
[[nodiscard]] ParamStamps param_stamps(const MnaStructure& mna, const Circuit& c, const ParameterRef& p);

} // namespace tfha
