#include "tfha/io.hpp"
#include "tfha/mna.hpp"
#include "tfha/netlist.hpp"
#include "tfha/sensitivity.hpp"
#include "tfha/spectral.hpp"
#include "tfha/transient.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace tfha;

constexpr int kExitOk = 0;
constexpr int kExitUserError = 1;
constexpr int kExitNoConvergence = 2;

struct CommonOptions {
    std::string netlist_path;
    std::string out_dir = ".";
    std::vector<std::string> formats{"csv", "json"};
    Index samples_per_period = 256;
    int max_periods = 400;
    Real steady_tol = 1e-6;
    Real newton_tol = 1e-9;
};

// Flat key=value config support: entries become "--key=value" flags unless
// the flag is already on the command line, so explicit flags always win.
std::vector<std::string> inject_config(int argc, char** argv) {
    std::vector<std::string> args;
    std::string config_path;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--config") {
            if (i + 1 >= argc) throw Error("--config needs a file argument");
            config_path = argv[++i];
        } else if (a.rfind("--config=", 0) == 0) {
            config_path = a.substr(9);
        } else {
            args.push_back(std::move(a));
        }
    }
    if (config_path.empty()) return args;

    std::ifstream in(config_path);
    if (!in) throw Error("cannot open config file: " + config_path);
    auto given = [&](const std::string& flag) {
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        return false;
    };
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = line;
        t.erase(0, t.find_first_not_of(" \t"));
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Error(config_path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = t.substr(0, eq);
        std::string value = t.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        value.erase(0, value.find_first_not_of(" \t"));
        if (!given("--" + key)) args.push_back("--" + key + "=" + value);
    }
    return args;
}

void add_common(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("netlist", opt.netlist_path, "netlist file")->required();
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--format", opt.formats, "output formats (csv, json)")->delimiter(',');
    cmd->add_option("--samples-per-period", opt.samples_per_period, "transient samples per period (power of two)");
    cmd->add_option("--max-periods", opt.max_periods, "transient period budget");
    cmd->add_option("--steady-tol", opt.steady_tol, "periodic steady-state tolerance");
    cmd->add_option("--newton-tol", opt.newton_tol, "Newton residual tolerance");
}

TransientConfig transient_config(const CommonOptions& opt) {
    TransientConfig cfg;
    cfg.samples_per_period = opt.samples_per_period;
    cfg.max_periods = opt.max_periods;
    cfg.steady_tol = opt.steady_tol;
    cfg.newton_tol = opt.newton_tol;
    return cfg;
}

bool wants(const CommonOptions& opt, const std::string& fmt) {
    for (const auto& f : opt.formats)
        if (f == fmt) return true;
    return false;
}

Circuit load_checked(const std::string& path) {
    Circuit c = parse_netlist_file(path);
    auto diags = validate_circuit(c);
    if (!diags.empty()) {
        std::ostringstream os;
        os << diags.size() << " diagnostics:";
        for (const auto& d : diags) os << "\n  [" << d.rule << "] " << (d.device.empty() ? "circuit" : d.device) << ": " << d.message;
        throw Error(os.str());
    }
    return c;
}

std::filesystem::path out_path(const CommonOptions& opt, const std::string& stem, const std::string& ext) {
    std::filesystem::create_directories(opt.out_dir);
    return std::filesystem::path(opt.out_dir) / (stem + "." + ext);
}

int run_validate(const CommonOptions& opt) {
    Circuit c = parse_netlist_file(opt.netlist_path);
    auto diags = validate_circuit(c);
    std::cout << diags.size() << " diagnostics\n";
    for (const auto& d : diags)
        std::cout << "  [" << d.rule << "] " << (d.device.empty() ? "circuit" : d.device) << ": " << d.message
                  << "\n";
    return diags.empty() ? kExitOk : kExitUserError;
}

int run_transient(const CommonOptions& opt) {
    Circuit c = load_checked(opt.netlist_path);
    MnaStructure mna = assemble_static(c);
    TransientSolution sol = run_to_steady_state(mna, c, transient_config(opt));
    std::cout << "steady state after " << sol.periods_run << " periods (mismatch " << sol.period_mismatch
              << ")\n";
    if (wants(opt, "csv")) {
        std::ostringstream os;
        write_waveform_csv(os, mna, sol);
        write_text_file(out_path(opt, output_stem("transient", "", ""), "csv").string(), os.str());
    }
    if (wants(opt, "json"))
        write_text_file(out_path(opt, output_stem("transient", "", ""), "json").string(),
                        waveform_json(mna, sol).dump(2) + "\n");
    return kExitOk;
}

int run_hb(const CommonOptions& opt, Index k_max, Real tol, int max_iter) {
    Circuit c = load_checked(opt.netlist_path);
    MnaStructure mna = assemble_static(c);
    HarmonicLadder ladder = HarmonicLadder::for_period(c.fundamental_period, k_max);
    SpectralSolution spec = hb_forward_solve(mna, c, ladder, tol, max_iter);
    std::cout << "harmonic balance solved with " << k_max << " harmonics\n";
    if (wants(opt, "csv")) {
        std::ostringstream os;
        write_spectrum_csv(os, mna, spec);
        write_text_file(out_path(opt, output_stem("hb", "", ""), "csv").string(), os.str());
    }
    if (wants(opt, "json"))
        write_text_file(out_path(opt, output_stem("hb", "", ""), "json").string(),
                        spectrum_json(mna, spec).dump(2) + "\n");
    return kExitOk;
}

int run_tfha(const CommonOptions& opt, const std::string& qoi, std::vector<std::string> param_names,
             Real err_tol, Index k_start) {
    Circuit c = load_checked(opt.netlist_path);
    MnaStructure mna = assemble_static(c);
    QoiSelector sel = QoiSelector::parse(qoi, mna);

    std::vector<ParameterRef> all = list_parameters(c);
    std::vector<ParameterRef> params;
    if (param_names.size() == 1 && param_names[0] == "all") {
        params = all;
    } else {
        for (const auto& want : param_names) {
            bool found = false;
            for (const auto& p : all) {
                if (p.label() == want || p.device_name == want) {
                    params.push_back(p);
                    found = true;
                }
            }
            if (!found) throw Error("unknown parameter '" + want + "' (use device or device.param)");
        }
    }
    if (params.empty()) {
        std::cerr << "warning: no design parameters selected, nothing to do\n";
        return kExitOk;
    }

    TfhaConfig cfg;
    cfg.err_tol = err_tol;
    cfg.k_start = k_start;
    cfg.transient = transient_config(opt);
    std::vector<SensitivityResult> results = tfha_run(c, sel, params, cfg);

    bool converged = true;
    for (const auto& r : results) {
        std::cout << r.parameter.label() << ": k_used=" << r.k_used << " est_rel_error=" << r.est_rel_error
                  << "\n";
        const std::string stem = output_stem("tfha", sel.target, r.parameter.label());
        if (wants(opt, "json"))
            write_text_file(out_path(opt, stem, "json").string(), sensitivity_json(r).dump(2) + "\n");
        if (wants(opt, "csv")) {
            std::ostringstream ts;
            write_sensitivity_csv(ts, r);
            write_text_file(out_path(opt, stem, "csv").string(), ts.str());
            std::ostringstream sp;
            write_sensitivity_spectrum_csv(sp, r);
            write_text_file(out_path(opt, stem + "_spectrum", "csv").string(), sp.str());
        }
        if (r.est_rel_error > err_tol) converged = false;
    }
    return converged ? kExitOk : kExitNoConvergence;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"TFHA nonlinear circuit sensitivity engine"};
    app.require_subcommand(1);

    CommonOptions opt;

    CLI::App* validate = app.add_subcommand("validate", "parse and validate a netlist");
    add_common(validate, opt);

    CLI::App* transient = app.add_subcommand("transient", "run to periodic steady state, dump waveform");
    add_common(transient, opt);

    CLI::App* hb = app.add_subcommand("hb", "harmonic-balance forward solve, dump spectrum");
    add_common(hb, opt);
    Index hb_k = 16;
    Real hb_tol = 1e-9;
    int hb_max_iter = 50;
    hb->add_option("--k", hb_k, "number of harmonics");
    hb->add_option("--tol", hb_tol, "Newton residual tolerance");
    hb->add_option("--max-iter", hb_max_iter, "Newton iteration budget");

    CLI::App* tfha_cmd = app.add_subcommand("tfha", "transient forward harmonic adjoint sensitivities");
    add_common(tfha_cmd, opt);
    std::string qoi;
    std::vector<std::string> params;
    Real err_tol = 1e-3;
    Index k_start = 8;
    tfha_cmd->add_option("--qoi", qoi, "quantity of interest: v(node), v(a,b) or i(device)")->required();
    tfha_cmd->add_option("--params", params, "design parameters ('all' or device[.param] list)")
        ->required()
        ->delimiter(',');
    tfha_cmd->add_option("--err-tol", err_tol, "spectral refinement tolerance");
    tfha_cmd->add_option("--k-start", k_start, "harmonics at the first refinement level");

    try {
        std::vector<std::string> args = inject_config(argc, argv);
        std::vector<const char*> argv2;
        argv2.push_back(argc > 0 ? argv[0] : "tfha");
        for (const auto& a : args) argv2.push_back(a.c_str());
        app.parse(static_cast<int>(argv2.size()), argv2.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    }

    try {
        if (validate->parsed()) return run_validate(opt);
        if (transient->parsed()) return run_transient(opt);
        if (hb->parsed()) return run_hb(opt, hb_k, hb_tol, hb_max_iter);
        if (tfha_cmd->parsed()) return run_tfha(opt, qoi, params, err_tol, k_start);
    } catch (const NewtonDivergence& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const NoSteadyState& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const HbDivergence& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const SingularIterationMatrix& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const SingularJacobian& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    }
    return kExitUserError;
}
