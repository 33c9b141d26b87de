#include <doctest.h>

#include "tfha/netlist.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace tfha;

namespace {

std::string fixture_path(const char* name) {
    return std::string(TFHA_CIRCUITS_DIR) + "/" + name;
}

bool same_decimal(const std::optional<Decimal>& a, const std::optional<Decimal>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return a->mantissa == b->mantissa && a->exponent == b->exponent;
}

bool same_waveform(const std::optional<Waveform>& a, const std::optional<Waveform>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return a->kind == b->kind && a->dc == b->dc && a->offset == b->offset && a->amplitude == b->amplitude &&
           a->frequency == b->frequency && a->phase_deg == b->phase_deg && a->v1 == b->v1 && a->v2 == b->v2 &&
           a->delay == b->delay && a->rise == b->rise && a->fall == b->fall && a->width == b->width &&
           a->period == b->period && same_decimal(a->period_decimal, b->period_decimal) &&
           same_decimal(a->freq_decimal, b->freq_decimal);
}

bool same_circuit(const Circuit& a, const Circuit& b) {
    if (a.title != b.title || a.nodes != b.nodes || a.fundamental_period != b.fundamental_period)
        return false;
    if (!same_decimal(a.period_decimal, b.period_decimal)) return false;
    if (a.devices.size() != b.devices.size()) return false;
    for (std::size_t i = 0; i < a.devices.size(); ++i) {
        const Device& da = a.devices[i];
        const Device& db = b.devices[i];
        if (da.name != db.name || da.kind != db.kind || da.terminals != db.terminals ||
            da.params != db.params || !same_waveform(da.waveform, db.waveform))
            return false;
    }
    return true;
}

} // namespace

TEST_CASE("basic cards parse to the expected devices") {
    Circuit c = parse_netlist("t\nR1 1 0 100\nC1 2 0 1u\nL1 2 1 10m\n.period 1m\n.end\n");
    REQUIRE(c.devices.size() == 3);
    CHECK(c.devices[0].kind == DeviceKind::Resistor);
    CHECK(c.devices[0].param("value") == 100.0);
    CHECK(c.devices[1].kind == DeviceKind::Capacitor);
    CHECK(c.devices[1].param("value") == doctest::Approx(1e-6).epsilon(1e-15));
    CHECK(c.devices[2].param("value") == doctest::Approx(1e-2).epsilon(1e-15));
    CHECK(c.nodes == std::vector<std::string>{"1", "2"});
}

TEST_CASE("numeric suffixes expand") {
    Circuit c = parse_netlist(
        "suffixes\nR1 1 0 1k\nR2 1 0 2meg\nR3 1 0 3m\nR4 1 0 4u\nR5 1 0 5n\nR6 1 0 6p\n.period 1\n.end\n");
    CHECK(c.devices[0].param("value") == 1e3);
    CHECK(c.devices[1].param("value") == 2e6);
    CHECK(c.devices[2].param("value") == 3e-3);
    CHECK(c.devices[3].param("value") == doctest::Approx(4e-6).epsilon(1e-15));
    CHECK(c.devices[4].param("value") == doctest::Approx(5e-9).epsilon(1e-15));
    CHECK(c.devices[5].param("value") == doctest::Approx(6e-12).epsilon(1e-15));
}

TEST_CASE("duplicate device names are rejected") {
    CHECK_THROWS_AS((void)parse_netlist("t\nR1 1 0 100\nR1 1 0 100\n.end\n"), DuplicateName);
    CHECK_THROWS_AS((void)parse_netlist("t\nR1 1 0 100\nr1 1 0 100\n.end\n"), DuplicateName);
}

TEST_CASE("unsupported cards and directives are hard errors") {
    CHECK_THROWS_AS((void)parse_netlist("t\nQ1 1 0 2 model\n.end\n"), UnknownDeviceKind);
    CHECK_THROWS_AS((void)parse_netlist("t\nR1 1 0 100\n.tran 1u 1m\n.end\n"), SyntaxError);
    CHECK_THROWS_AS((void)parse_netlist("t\nR1 1 0\n.end\n"), SyntaxError);
    CHECK_THROWS_AS((void)parse_netlist("t\nR1 1 0 abc\n.end\n"), SyntaxError);
    CHECK_THROWS_AS((void)parse_netlist("t\nR1 1 0 100\n"), SyntaxError); // missing .end
}

TEST_CASE("syntax errors carry the line number") {
    try {
        (void)parse_netlist("title\n* comment\nR1 1 0 bad\n.end\n");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("waveform evaluation follows the descriptors") {
    Circuit c = parse_netlist(
        "t\nV1 1 0 SIN(0 1 50 0)\nV2 2 0 PULSE(0 5 0 1u 1u 10u 20u)\nR1 1 0 1\nR2 2 0 1\n.period 20m\n.end\n");
    const Waveform& sin = *c.devices[0].waveform;
    CHECK(sin.eval(0.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sin.eval(5e-3) == doctest::Approx(1.0).epsilon(1e-12));
    const Waveform& pulse = *c.devices[1].waveform;
    CHECK(pulse.eval(5e-6) == 5.0);
    CHECK(pulse.eval(0.5e-6) == doctest::Approx(2.5));
    CHECK(pulse.eval(15e-6) == 0.0);
    CHECK(pulse.eval(25e-6) == 5.0); // second cycle plateau
}

TEST_CASE("fundamental period defaults to the source LCM") {
    Circuit c = parse_netlist("t\nV1 1 0 SIN(0 1 50)\nV2 2 0 SIN(0 1 75)\nR1 1 2 1\nR2 2 0 1\n.end\n");
    // 1/50 and 1/75 -> LCM 1/25
    CHECK(c.fundamental_period == doctest::Approx(0.04).epsilon(1e-15));
    CHECK(validate_circuit(c).empty());
}

TEST_CASE("validation catches the documented violations") {
    SUBCASE("valid rectifier has no diagnostics") {
        Circuit c = parse_netlist_file(fixture_path("rectifier.cir"));
        CHECK(validate_circuit(c).empty());
    }
    SUBCASE("floating node") {
        Circuit c = parse_netlist("t\nV1 1 0 DC 1\nR1 1 2 1k\nR2 5 6 1k\n.period 1\n.end\n");
        auto diags = validate_circuit(c);
        bool found = false;
        for (const auto& d : diags) found |= d.rule == "FloatingNode";
        CHECK(found);
    }
    SUBCASE("non-positive diode saturation current") {
        Circuit c = parse_netlist("t\nV1 1 0 DC 1\nD1 1 0 IS=0\n.period 1\n.end\n");
        auto diags = validate_circuit(c);
        bool found = false;
        for (const auto& d : diags) found |= d.rule == "NonPositiveParameter" && d.device == "D1";
        CHECK(found);
    }
    SUBCASE("incommensurate source is rejected") {
        Circuit c = parse_netlist("t\nV1 1 0 SIN(0 1 60)\nR1 1 0 1k\n.period 20m\n.end\n");
        auto diags = validate_circuit(c);
        bool found = false;
        for (const auto& d : diags) found |= d.rule == "IncommensurateSource";
        CHECK(found);
    }
    SUBCASE("commensurate harmonics pass the exact check") {
        Circuit c = parse_netlist("t\nV1 1 0 SIN(0 1 150)\nR1 1 0 1k\n.period 20m\n.end\n");
        CHECK(validate_circuit(c).empty());
    }
}

TEST_CASE("list_parameters covers R, C, L and switch Ron in file order") {
    SUBCASE("rectifier exposes R and C") {
        Circuit c = parse_netlist_file(fixture_path("rectifier.cir"));
        auto params = list_parameters(c);
        REQUIRE(params.size() == 2);
        CHECK(params[0].label() == "R1.value");
        CHECK(params[1].label() == "C1.value");
    }
    SUBCASE("source-only circuit has none") {
        Circuit c = parse_netlist("t\nV1 1 0 DC 1\nD1 1 0\n.period 1\n.end\n");
        CHECK(list_parameters(c).empty());
    }
    SUBCASE("boost exposes all element values and the switch Ron") {
        Circuit c = parse_netlist_file(fixture_path("boost.cir"));
        auto params = list_parameters(c);
        REQUIRE(params.size() == 10);
        CHECK(params[0].label() == "R2.value");
        CHECK(params[5].label() == "S1.ron");
        CHECK(params[9].label() == "R1.value");
    }
}

TEST_CASE("serialize / parse round trip is field-identical") {
    const char* names[] = {"divider.cir", "rc_lowpass.cir", "rlc_series.cir", "rectifier.cir", "boost.cir"};
    for (const char* name : names) {
        CAPTURE(std::string(name));
        Circuit c1 = parse_netlist_file(fixture_path(name));
        Circuit c2 = parse_netlist(serialize_netlist(c1));
        CHECK(same_circuit(c1, c2));
    }
}

TEST_CASE("every grammar production has a parsing fixture") {
    const char* text =
        "grammar coverage\n"
        "* a comment line\n"
        "R1 1 0 1k\n"
        "C1 1 2 1u\n"
        "L1 2 3 10m\n"
        "V1 3 0 DC 5\n"
        "V2 4 0 SIN(0 1 50 90)\n"
        "V3 5 0 PULSE(0 1 0 1u 1u 10u 20m)\n"
        "I1 1 0 2m\n"
        "D1 4 5 IS=1e-12 N=1 VT=0.02585\n"
        "S1 5 0 0.1 1e6 PULSE(0 1 0 1u 1u 8u 20m)\n"
        ".period 20m\n"
        ".end\n";
    Circuit c = parse_netlist(text);
    CHECK(c.devices.size() == 9);
    CHECK(validate_circuit(c).empty());
}

TEST_CASE("nodes can be named, not just numbered") {
    Circuit c = parse_netlist("t\nV1 in 0 SIN(0 1 50)\nD1 in out N=2\nR1 out 0 1k\nC1 out 0 4.7u\n.end\n");
    CHECK(c.nodes == std::vector<std::string>{"in", "out"});
    CHECK(validate_circuit(c).empty());
}

TEST_CASE("exact rational commensurability helpers") {
    Decimal t20m{2, -2};  // 0.02
    Decimal p10u{10, -6}; // 1e-5
    CHECK(Decimal::divides(t20m, p10u));
    CHECK_FALSE(Decimal::divides(p10u, t20m));
    Decimal f50{5, 1};
    CHECK(Decimal::times_is_integer(t20m, f50));
    Decimal f60{6, 1};
    CHECK_FALSE(Decimal::times_is_integer(t20m, f60));
}
