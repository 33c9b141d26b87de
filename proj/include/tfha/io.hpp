#pragma once

#include "tfha/mna.hpp"
#include "tfha/sensitivity.hpp"
#include "tfha/spectral.hpp"
#include "tfha/transient.hpp"

#include <nlohmann/json_fwd.hpp>
#include <ostream>
#include <string>

namespace tfha {

class IoError : public Error {
public:
    using Error::Error;
};

/// round-trip-exact float formatting shared by all CSV writers
[[nodiscard]] std::string format_real(Real v);

void write_waveform_csv(std::ostream& os, const MnaStructure& mna, const TransientSolution& sol);
void write_spectrum_csv(std::ostream& os, const MnaStructure& mna, const SpectralSolution& spec);
void write_sensitivity_csv(std::ostream& os, const SensitivityResult& result);
void write_sensitivity_spectrum_csv(std::ostream& os, const SensitivityResult& result);

[[nodiscard]] nlohmann::ordered_json waveform_json(const MnaStructure& mna, const TransientSolution& sol);
[[nodiscard]] nlohmann::ordered_json spectrum_json(const MnaStructure& mna, const SpectralSolution& spec);
[[nodiscard]] nlohmann::ordered_json sensitivity_json(const SensitivityResult& result);

/// "<analysis>_<qoi>_<param>" with empty segments dropped
[[nodiscard]] std::string output_stem(const std::string& analysis, const std::string& qoi,
                                      const std::string& param);

void write_text_file(const std::string& path, const std::string& content);

} // namespace tfha
