#pragma once

#include "tfha/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tfha {

class SyntaxError : public Error {
public:
    SyntaxError(int line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] int line() const { return line_; }

private:
    int line_;
};

class UnknownDeviceKind : public SyntaxError {
public:
    using SyntaxError::SyntaxError;
};

class DuplicateName : public SyntaxError {
public:
    using SyntaxError::SyntaxError;
};

/// Exact decimal literal as parsed from the netlist (mantissa * 10^exponent).
/// Keeps source-period ratios checkable without floating-point slop.
struct Decimal {
    std::int64_t mantissa = 0;
    int exponent = 0;

    [[nodiscard]] Real value() const;
    [[nodiscard]] bool is_zero() const { return mantissa == 0; }

    /// True iff a/b is a positive integer, computed in exact integer arithmetic.
    static bool divides(const Decimal& a, const Decimal& b);

    /// True iff a*b is a positive integer (used for period * frequency).
    static bool times_is_integer(const Decimal& a, const Decimal& b);
};

enum class WaveformKind { Dc, Sin, Pulse };

/// Independent-source and switch-control waveform descriptor.
/// SIN is offset + amplitude*sin(2*pi*freq*t + phase_deg); PULSE is the
/// SPICE trapezoid (v1, v2, delay, rise, fall, width, period).
struct Waveform {
    WaveformKind kind = WaveformKind::Dc;
    Real dc = 0.0;

    Real offset = 0.0;
    Real amplitude = 0.0;
    Real frequency = 0.0;
    Real phase_deg = 0.0;

    Real v1 = 0.0;
    Real v2 = 0.0;
    Real delay = 0.0;
    Real rise = 0.0;
    Real fall = 0.0;
    Real width = 0.0;
    Real period = 0.0;

    /// Exact values as written in the source text, for the commensurability
    /// check (PULSE keeps its period, SIN its frequency; unset for DC).
    std::optional<Decimal> period_decimal;
    std::optional<Decimal> freq_decimal;

    [[nodiscard]] Real eval(Real t) const;
    [[nodiscard]] bool is_periodic() const { return kind != WaveformKind::Dc; }
};

enum class DeviceKind { Resistor, Capacitor, Inductor, VoltageSource, CurrentSource, Diode, Switch };

struct Device {
    std::string name;
    DeviceKind kind = DeviceKind::Resistor;
    std::vector<std::string> terminals;
    std::map<std::string, Real> params;
    std::optional<Waveform> waveform; // sources and switch control

    [[nodiscard]] Real param(const std::string& key) const;
};

/// Named handle to one scalar element value usable as a design parameter.
struct ParameterRef {
    std::string device_name;
    std::string param_name;
    Real nominal_value = 0.0;

    [[nodiscard]] std::string label() const { return device_name + "." + param_name; }
};

struct Diagnostic {
    std::string device; // empty for circuit-level findings
    std::string rule;
    std::string message;
};

/// Immutable parsed circuit. Node "0" is ground and never part of the
/// unknown vector.
struct Circuit {
    std::string title;
    std::vector<std::string> nodes; // excludes ground, in first-appearance order
    std::vector<Device> devices;
    Real fundamental_period = 0.0;
    std::optional<Decimal> period_decimal;

    [[nodiscard]] bool has_node(const std::string& name) const;
    [[nodiscard]] const Device* find_device(const std::string& name) const;
};

[[nodiscard]] Circuit parse_netlist(const std::string& text);
[[nodiscard]] Circuit parse_netlist_file(const std::string& path);

/// Empty result means every invariant holds and all nodes reach ground.
[[nodiscard]] std::vector<Diagnostic> validate_circuit(const Circuit& c);

/// Design parameters in file order, then parameter-name order: R/C/L value
/// and switch on-resistance.
[[nodiscard]] std::vector<ParameterRef> list_parameters(const Circuit& c);

/// Netlist text that parses back to a field-identical circuit.
[[nodiscard]] std::string serialize_netlist(const Circuit& c);

} // namespace tfha
