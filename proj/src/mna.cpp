#include "tfha/mna.hpp"

#include <cmath>

namespace tfha {

void DiodeStamp::current_and_conductance(Real v, Real& i, Real& g) const {
    if (v <= v_crit) {
        Real e = std::exp(v / n_vt);
        i = is * (e - 1.0);
        g = is / n_vt * e;
    } else {
        i = i_crit + g_crit * (v - v_crit);
        g = g_crit;
    }
}

Real SwitchStamp::conductance(Real t) const {
    Real ctl = control.eval(t);
    Real span = control.v2 - control.v1;
    Real s = span != 0.0 ? (ctl - control.v1) / span : 0.0;
    return g_off + (g_on - g_off) * s;
}

Real SwitchStamp::duty_average() const {
    // trapezoid mean: full-on width plus half of each ramp
    Real on_fraction = (control.width + 0.5 * (control.rise + control.fall)) / control.period;
    return g_off + (g_on - g_off) * on_fraction;
}

SparseMatrix MnaStructure::conductance_at(Real t) const {
    SparseMatrix g = a_g;
    for (const auto& sw : switches) g += sw.conductance(t) * sw.pattern;
    return g;
}

Index MnaStructure::node_of(const std::string& name) const {
    if (name == "0") return -1;
    auto it = node_index.find(name);
    if (it == node_index.end()) throw Error("unknown node '" + name + "'");
    return it->second;
}

namespace {

void stamp_conductance(std::vector<Triplet>& t, Index a, Index b, Real g) {
    if (a >= 0) {
        t.emplace_back(a, a, g);
        if (b >= 0) t.emplace_back(a, b, -g);
    }
    if (b >= 0) {
        t.emplace_back(b, b, g);
        if (a >= 0) t.emplace_back(b, a, -g);
    }
}

void stamp_branch_incidence(std::vector<Triplet>& t, Index a, Index b, Index branch) {
    if (a >= 0) {
        t.emplace_back(a, branch, 1.0);
        t.emplace_back(branch, a, 1.0);
    }
    if (b >= 0) {
        t.emplace_back(b, branch, -1.0);
        t.emplace_back(branch, b, -1.0);
    }
}

SparseMatrix from_triplets(Index dim, const std::vector<Triplet>& t) {
    SparseMatrix m(dim, dim);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

} // namespace

MnaStructure assemble_static(const Circuit& c) {
    MnaStructure mna;
    mna.n_nodes = static_cast<Index>(c.nodes.size());
    for (Index i = 0; i < mna.n_nodes; ++i) {
        mna.node_index[c.nodes[i]] = i;
        mna.unknown_names.push_back("v(" + c.nodes[i] + ")");
    }

    // group-2 devices in file order
    for (const auto& d : c.devices) {
        if (d.kind == DeviceKind::VoltageSource || d.kind == DeviceKind::Inductor) {
            mna.branch_index[d.name] = mna.n_nodes + mna.n_branches;
            mna.unknown_names.push_back("i(" + d.name + ")");
            ++mna.n_branches;
        }
    }
    mna.dim = mna.n_nodes + mna.n_branches;

    std::vector<Triplet> tg;
    std::vector<Triplet> tc;

    for (const auto& d : c.devices) {
        Index a = mna.node_of(d.terminals[0]);
        Index b = mna.node_of(d.terminals[1]);
        switch (d.kind) {
            case DeviceKind::Resistor:
                stamp_conductance(tg, a, b, 1.0 / d.param("value"));
                break;
            case DeviceKind::Capacitor:
                stamp_conductance(tc, a, b, d.param("value"));
                break;
            case DeviceKind::Inductor: {
                Index j = mna.branch_index.at(d.name);
                stamp_branch_incidence(tg, a, b, j);
                tc.emplace_back(j, j, -d.param("value"));
                break;
            }
            case DeviceKind::VoltageSource: {
                Index j = mna.branch_index.at(d.name);
                stamp_branch_incidence(tg, a, b, j);
                SourceStamp s;
                s.node_pos = a;
                s.node_neg = b;
                s.branch = j;
                s.waveform = *d.waveform;
                s.is_voltage = true;
                mna.sources.push_back(std::move(s));
                break;
            }
            case DeviceKind::CurrentSource: {
                SourceStamp s;
                s.node_pos = a;
                s.node_neg = b;
                s.waveform = *d.waveform;
                mna.sources.push_back(std::move(s));
                break;
            }
            case DeviceKind::Diode: {
                DiodeStamp ds;
                ds.anode = a;
                ds.cathode = b;
                ds.is = d.param("is");
                ds.n_vt = d.param("n") * d.param("vt");
                ds.v_crit = ds.n_vt * std::log(ds.n_vt / (ds.is * std::sqrt(2.0)));
                Real e_crit = std::exp(ds.v_crit / ds.n_vt);
                ds.g_crit = ds.is / ds.n_vt * e_crit;
                ds.i_crit = ds.is * (e_crit - 1.0);
                mna.diodes.push_back(ds);
                break;
            }
            case DeviceKind::Switch: {
                SwitchStamp sw;
                sw.device_name = d.name;
                sw.g_on = 1.0 / d.param("ron");
                sw.g_off = 1.0 / d.param("roff");
                sw.control = *d.waveform;
                std::vector<Triplet> tp;
                stamp_conductance(tp, a, b, 1.0);
                sw.pattern = from_triplets(mna.dim, tp);
                mna.switches.push_back(std::move(sw));
                break;
            }
        }
    }

    mna.a_g = from_triplets(mna.dim, tg);
    mna.a_c = from_triplets(mna.dim, tc);
    return mna;
}

Vector eval_sources(const MnaStructure& mna, Real t) {
    Vector values = Vector::Zero(mna.dim);
    for (const auto& s : mna.sources) {
        Real v = s.waveform.eval(t);
        if (s.is_voltage) {
            values[s.branch] = v;
        } else {
            // current flows from node_pos through the source to node_neg
            if (s.node_pos >= 0) values[s.node_pos] -= v;
            if (s.node_neg >= 0) values[s.node_neg] += v;
        }
    }
    return values;
}

NonlinearEval eval_nonlinear(const MnaStructure& mna, const Vector& x) {
    if (x.size() != mna.dim) throw ShapeMismatch("state vector has wrong length");
    if (!x.allFinite()) throw NonFiniteState("state vector contains non-finite entries");

    NonlinearEval out;
    out.i_nl = Vector::Zero(mna.dim);
    std::vector<Triplet> tg;

    for (const auto& d : mna.diodes) {
        Real va = d.anode >= 0 ? x[d.anode] : 0.0;
        Real vb = d.cathode >= 0 ? x[d.cathode] : 0.0;
        Real i = 0.0, g = 0.0;
        d.current_and_conductance(va - vb, i, g);
        if (d.anode >= 0) out.i_nl[d.anode] -= i;
        if (d.cathode >= 0) out.i_nl[d.cathode] += i;
        stamp_conductance(tg, d.anode, d.cathode, -g);
    }

    out.g_nl = from_triplets(mna.dim, tg);
    return out;
}

Real ParamStamps::mod_scale(Real t) const {
    Real ctl = control.eval(t);
    Real span = control.v2 - control.v1;
    Real s = span != 0.0 ? (ctl - control.v1) / span : 0.0;
    return -s / (ron * ron);
}

SparseMatrix ParamStamps::d_a_g_at(Real t) const {
    if (!time_varying) return d_a_g;
    SparseMatrix m = d_a_g;
    m += mod_scale(t) * mod_pattern;
    return m;
}

ParamStamps param_stamps(const MnaStructure& mna, const Circuit& c, const ParameterRef& p) {
    const Device* dev = c.find_device(p.device_name);
    if (!dev) throw UnknownParameter("no device named '" + p.device_name + "'");

    ParamStamps out;
    out.d_a_c = SparseMatrix(mna.dim, mna.dim);
    out.d_a_g = SparseMatrix(mna.dim, mna.dim);
    out.mod_pattern = SparseMatrix(mna.dim, mna.dim);

    Index a = mna.node_of(dev->terminals[0]);
    Index b = mna.node_of(dev->terminals[1]);
    std::vector<Triplet> t;

    switch (dev->kind) {
        case DeviceKind::Resistor: {
            if (p.param_name != "value") throw UnknownParameter("resistor parameter must be 'value'");
            Real r = dev->param("value");
            stamp_conductance(t, a, b, -1.0 / (r * r));
            out.d_a_g = from_triplets(mna.dim, t);
            break;
        }
        case DeviceKind::Capacitor: {
            if (p.param_name != "value") throw UnknownParameter("capacitor parameter must be 'value'");
            stamp_conductance(t, a, b, 1.0);
            out.d_a_c = from_triplets(mna.dim, t);
            break;
        }
        case DeviceKind::Inductor: {
            if (p.param_name != "value") throw UnknownParameter("inductor parameter must be 'value'");
            Index j = mna.branch_index.at(dev->name);
            t.emplace_back(j, j, -1.0);
            out.d_a_c = from_triplets(mna.dim, t);
            break;
        }
        case DeviceKind::Switch: {
            if (p.param_name != "ron") throw UnknownParameter("switch parameter must be 'ron'");
            stamp_conductance(t, a, b, 1.0);
            out.mod_pattern = from_triplets(mna.dim, t);
            out.time_varying = true;
            out.control = *dev->waveform;
            out.ron = dev->param("ron");
            break;
        }
        default:
            throw UnknownParameter("device '" + p.device_name + "' has no design parameters");
    }
    return out;
}

} // namespace tfha
