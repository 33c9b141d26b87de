#include "tfha/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>

namespace tfha {

std::string format_real(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_waveform_csv(std::ostream& os, const MnaStructure& mna, const TransientSolution& sol) {
    os << "t";
    for (const auto& name : mna.unknown_names) os << "," << name;
    os << "\n";
    for (Index j = 0; j < sol.t_grid.size(); ++j) {
        os << format_real(sol.t_grid[j]);
        for (Index r = 0; r < mna.dim; ++r) os << "," << format_real(sol.x_samples(r, j));
        os << "\n";
    }
}

void write_spectrum_csv(std::ostream& os, const MnaStructure& mna, const SpectralSolution& spec) {
    os << "k,freq_hz";
    for (const auto& name : mna.unknown_names) os << "," << name << "_re," << name << "_im";
    os << "\n";
    for (Index k = 0; k <= spec.ladder.k_max; ++k) {
        os << k << "," << format_real(spec.ladder.frequencies[k] / (2.0 * kPi));
        for (Index r = 0; r < mna.dim; ++r)
            os << "," << format_real(spec.phasors(r, k).real()) << ","
               << format_real(spec.phasors(r, k).imag());
        os << "\n";
    }
}

void write_sensitivity_csv(std::ostream& os, const SensitivityResult& result) {
    os << "t,dudp\n";
    for (Index j = 0; j < result.t_grid.size(); ++j)
        os << format_real(result.t_grid[j]) << "," << format_real(result.time_series[j]) << "\n";
}

void write_sensitivity_spectrum_csv(std::ostream& os, const SensitivityResult& result) {
    const Real f0 = result.t_grid.size() > 1
                        ? 1.0 / (result.t_grid[1] - result.t_grid[0]) / static_cast<Real>(result.t_grid.size())
                        : 0.0;
    os << "k,freq_hz,dudp_re,dudp_im\n";
    for (Index k = 0; k < result.spectrum.size(); ++k)
        os << k << "," << format_real(f0 * static_cast<Real>(k)) << ","
           << format_real(result.spectrum[k].real()) << "," << format_real(result.spectrum[k].imag())
           << "\n";
}

nlohmann::ordered_json waveform_json(const MnaStructure& mna, const TransientSolution& sol) {
    nlohmann::ordered_json j;
    j["schema"] = "tfha/1";
    j["kind"] = "waveform";
    j["period"] = sol.period;
    j["periods_run"] = sol.periods_run;
    j["period_mismatch"] = sol.period_mismatch;
    j["t"] = std::vector<Real>(sol.t_grid.begin(), sol.t_grid.end());
    nlohmann::ordered_json unknowns;
    for (Index r = 0; r < mna.dim; ++r) {
        std::vector<Real> row(static_cast<std::size_t>(sol.x_samples.cols()));
        for (Index c = 0; c < sol.x_samples.cols(); ++c) row[static_cast<std::size_t>(c)] = sol.x_samples(r, c);
        unknowns[mna.unknown_names[static_cast<std::size_t>(r)]] = row;
    }
    j["unknowns"] = std::move(unknowns);
    return j;
}

nlohmann::ordered_json spectrum_json(const MnaStructure& mna, const SpectralSolution& spec) {
    nlohmann::ordered_json j;
    j["schema"] = "tfha/1";
    j["kind"] = "spectrum";
    j["omega0"] = spec.ladder.omega0;
    j["k_max"] = spec.ladder.k_max;
    nlohmann::ordered_json unknowns;
    for (Index r = 0; r < mna.dim; ++r) {
        std::vector<std::array<Real, 2>> bins(static_cast<std::size_t>(spec.phasors.cols()));
        for (Index k = 0; k < spec.phasors.cols(); ++k)
            bins[static_cast<std::size_t>(k)] = {spec.phasors(r, k).real(), spec.phasors(r, k).imag()};
        unknowns[mna.unknown_names[static_cast<std::size_t>(r)]] = bins;
    }
    j["unknowns"] = std::move(unknowns);
    return j;
}

nlohmann::ordered_json sensitivity_json(const SensitivityResult& result) {
    nlohmann::ordered_json j;
    j["schema"] = "tfha/1";
    j["kind"] = "sensitivity";
    j["device"] = result.parameter.device_name;
    j["param"] = result.parameter.param_name;
    j["nominal_value"] = result.parameter.nominal_value;
    j["k_used"] = result.k_used;
    j["est_rel_error"] = result.est_rel_error;
    std::vector<std::array<Real, 2>> spectrum(static_cast<std::size_t>(result.spectrum.size()));
    for (Index k = 0; k < result.spectrum.size(); ++k)
        spectrum[static_cast<std::size_t>(k)] = {result.spectrum[k].real(), result.spectrum[k].imag()};
    j["spectrum"] = std::move(spectrum);
    j["t"] = std::vector<Real>(result.t_grid.begin(), result.t_grid.end());
    j["time_series"] = std::vector<Real>(result.time_series.begin(), result.time_series.end());
    return j;
}

std::string output_stem(const std::string& analysis, const std::string& qoi, const std::string& param) {
    std::string stem = analysis;
    if (!qoi.empty()) stem += "_" + qoi;
    if (!param.empty()) stem += "_" + param;
    return stem;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

} // namespace tfha
