#include "tfha/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace tfha {

namespace {

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string to_upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

struct ParsedNumber {
    Real value = 0.0;
    Decimal decimal;
};

// Accepts [sign] digits [. digits] [e[sign]digits] [suffix], suffix one of
// k m u n p meg (case-insensitive). Returns nullopt on anything else.
std::optional<ParsedNumber> parse_number(const std::string& token) {
    if (token.empty()) return std::nullopt;
    std::size_t pos = 0;
    bool negative = false;
    if (token[pos] == '+' || token[pos] == '-') {
        negative = token[pos] == '-';
        ++pos;
    }

    std::int64_t mantissa = 0;
    int frac_digits = 0;
    int digits = 0;
    bool overflow = false;
    bool seen_dot = false;
    for (; pos < token.size(); ++pos) {
        char c = token[pos];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            ++digits;
            if (mantissa > (INT64_MAX - 9) / 10) {
                overflow = true; // more precision than int64 holds
            } else {
                mantissa = mantissa * 10 + (c - '0');
                if (seen_dot) ++frac_digits;
            }
        } else if (c == '.' && !seen_dot) {
            seen_dot = true;
        } else {
            break;
        }
    }
    if (digits == 0) return std::nullopt;

    int exponent = -frac_digits;
    if (pos < token.size() && (token[pos] == 'e' || token[pos] == 'E')) {
        // Disambiguate exponent from a unit suffix by requiring digits after it.
        std::size_t epos = pos + 1;
        bool eneg = false;
        if (epos < token.size() && (token[epos] == '+' || token[epos] == '-')) {
            eneg = token[epos] == '-';
            ++epos;
        }
        if (epos < token.size() && std::isdigit(static_cast<unsigned char>(token[epos]))) {
            int e = 0;
            for (; epos < token.size() && std::isdigit(static_cast<unsigned char>(token[epos])); ++epos) {
                e = e * 10 + (token[epos] - '0');
                if (e > 400) return std::nullopt;
            }
            exponent += eneg ? -e : e;
            pos = epos;
        }
    }

    if (pos < token.size()) {
        std::string suffix = to_lower(token.substr(pos));
        if (suffix == "k") exponent += 3;
        else if (suffix == "meg") exponent += 6;
        else if (suffix == "m") exponent -= 3;
        else if (suffix == "u") exponent -= 6;
        else if (suffix == "n") exponent -= 9;
        else if (suffix == "p") exponent -= 12;
        else return std::nullopt;
    }

    if (negative) mantissa = -mantissa;

    ParsedNumber out;
    out.decimal.mantissa = overflow ? 0 : mantissa;
    out.decimal.exponent = exponent;
    // strtod on the normalized form gives the correctly rounded double and an
    // exact round trip through serialize_netlist.
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%lld.e%d", static_cast<long long>(mantissa), exponent);
    out.value = std::strtod(buf, nullptr);
    if (overflow) {
        out.decimal.mantissa = 0; // marks "not exactly representable"
        out.decimal.exponent = 0;
    }
    return out;
}

// Splits a card into tokens; parens become their own tokens and commas count
// as whitespace so SIN(0,1,50) and SIN ( 0 1 50 ) read the same.
std::vector<std::string> tokenize(const std::string& line) {
    std::string padded;
    padded.reserve(line.size() + 8);
    for (char c : line) {
        if (c == '(' || c == ')') {
            padded.push_back(' ');
            padded.push_back(c);
            padded.push_back(' ');
        } else if (c == ',') {
            padded.push_back(' ');
        } else {
            padded.push_back(c);
        }
    }
    std::vector<std::string> tokens;
    std::istringstream iss(padded);
    std::string tok;
    while (iss >> tok) tokens.push_back(tok);
    return tokens;
}

class CardReader {
public:
    CardReader(std::vector<std::string> tokens, int line) : tokens_(std::move(tokens)), line_(line) {}

    [[nodiscard]] bool done() const { return pos_ >= tokens_.size(); }
    [[nodiscard]] std::size_t remaining() const { return tokens_.size() - pos_; }

    const std::string& next(const char* what) {
        if (done()) throw SyntaxError(line_, std::string("missing ") + what);
        return tokens_[pos_++];
    }

    [[nodiscard]] const std::string& peek() const {
        static const std::string empty;
        return done() ? empty : tokens_[pos_];
    }

    ParsedNumber number(const char* what) {
        const std::string& tok = next(what);
        auto n = parse_number(tok);
        if (!n) throw SyntaxError(line_, std::string("expected number for ") + what + ", got '" + tok + "'");
        return *n;
    }

    void expect(const std::string& tok) {
        const std::string& got = next(tok.c_str());
        if (got != tok) throw SyntaxError(line_, "expected '" + tok + "', got '" + got + "'");
    }

    [[nodiscard]] int line() const { return line_; }

private:
    std::vector<std::string> tokens_;
    std::size_t pos_ = 0;
    int line_;
};

Waveform parse_waveform(CardReader& rd) {
    Waveform w;
    std::string head = rd.next("waveform");
    std::string upper = to_upper(head);

    if (upper == "DC") {
        w.kind = WaveformKind::Dc;
        w.dc = rd.number("DC value").value;
        return w;
    }
    if (upper == "SIN") {
        w.kind = WaveformKind::Sin;
        rd.expect("(");
        w.offset = rd.number("SIN offset").value;
        w.amplitude = rd.number("SIN amplitude").value;
        ParsedNumber freq = rd.number("SIN frequency");
        w.frequency = freq.value;
        if (freq.decimal.mantissa != 0) w.freq_decimal = freq.decimal;
        if (rd.peek() != ")") w.phase_deg = rd.number("SIN phase").value;
        rd.expect(")");
        return w;
    }
    if (upper == "PULSE") {
        w.kind = WaveformKind::Pulse;
        rd.expect("(");
        w.v1 = rd.number("PULSE v1").value;
        w.v2 = rd.number("PULSE v2").value;
        w.delay = rd.number("PULSE delay").value;
        w.rise = rd.number("PULSE rise").value;
        w.fall = rd.number("PULSE fall").value;
        w.width = rd.number("PULSE width").value;
        ParsedNumber period = rd.number("PULSE period");
        w.period = period.value;
        if (period.decimal.mantissa != 0) w.period_decimal = period.decimal;
        rd.expect(")");
        return w;
    }

    auto n = parse_number(head);
    if (!n) throw SyntaxError(rd.line(), "unrecognized waveform '" + head + "'");
    w.kind = WaveformKind::Dc;
    w.dc = n->value;
    return w;
}

// KEY=value pairs for diode cards.
std::map<std::string, Real> parse_kv_params(CardReader& rd, int line) {
    std::map<std::string, Real> out;
    while (!rd.done()) {
        std::string tok = rd.next("parameter");
        auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 >= tok.size())
            throw SyntaxError(line, "expected KEY=value, got '" + tok + "'");
        std::string key = to_lower(tok.substr(0, eq));
        auto val = parse_number(tok.substr(eq + 1));
        if (!val) throw SyntaxError(line, "bad number in '" + tok + "'");
        out[key] = val->value;
    }
    return out;
}

struct PeriodFraction {
    // period = num/den seconds, reduced
    std::int64_t num = 0;
    std::int64_t den = 1;
};

std::optional<PeriodFraction> waveform_period_fraction(const Waveform& w) {
    auto from_decimal = [](const Decimal& d) -> std::optional<PeriodFraction> {
        if (d.mantissa <= 0) return std::nullopt;
        PeriodFraction f;
        __int128 num = d.mantissa;
        __int128 den = 1;
        int e = d.exponent;
        while (e > 0 && num < (__int128_t(1) << 100)) { num *= 10; --e; }
        while (e < 0 && den < (__int128_t(1) << 100)) { den *= 10; ++e; }
        if (e != 0) return std::nullopt;
        if (num > INT64_MAX || den > INT64_MAX) return std::nullopt;
        f.num = static_cast<std::int64_t>(num);
        f.den = static_cast<std::int64_t>(den);
        std::int64_t gg = std::gcd(f.num, f.den);
        f.num /= gg;
        f.den /= gg;
        return f;
    };
    if (w.kind == WaveformKind::Pulse && w.period_decimal) return from_decimal(*w.period_decimal);
    if (w.kind == WaveformKind::Sin && w.freq_decimal) {
        auto f = from_decimal(*w.freq_decimal);
        if (!f) return std::nullopt;
        return PeriodFraction{f->den, f->num}; // period = 1/frequency
    }
    return std::nullopt;
}

} // namespace

Real Decimal::value() const {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%lld.e%d", static_cast<long long>(mantissa), exponent);
    return std::strtod(buf, nullptr);
}

bool Decimal::divides(const Decimal& a, const Decimal& b) {
    if (a.mantissa <= 0 || b.mantissa <= 0) return false;
    __int128 ma = a.mantissa;
    __int128 mb = b.mantissa;
    int d = a.exponent - b.exponent;
    while (d > 0) {
        ma *= 10;
        --d;
        if (ma > (__int128_t(1) << 120)) return false;
    }
    while (d < 0) {
        mb *= 10;
        ++d;
        if (mb > (__int128_t(1) << 120)) return false;
    }
    return ma % mb == 0;
}

bool Decimal::times_is_integer(const Decimal& a, const Decimal& b) {
    if (a.mantissa <= 0 || b.mantissa <= 0) return false;
    __int128 m = static_cast<__int128>(a.mantissa) * b.mantissa;
    int e = a.exponent + b.exponent;
    while (e > 0) { m *= 10; --e; if (m > (__int128_t(1) << 120)) return false; }
    __int128 den = 1;
    while (e < 0) { den *= 10; ++e; if (den > (__int128_t(1) << 120)) return false; }
    return m % den == 0;
}

Real Waveform::eval(Real t) const {
    switch (kind) {
        case WaveformKind::Dc:
            return dc;
        case WaveformKind::Sin:
            return offset + amplitude * std::sin(2.0 * kPi * frequency * t + phase_deg * kPi / 180.0);
        case WaveformKind::Pulse: {
            if (t < delay) return v1;
            Real tc = std::fmod(t - delay, period);
            if (tc < rise && rise > 0.0) return v1 + (v2 - v1) * (tc / rise);
            if (tc < rise + width) return v2;
            if (tc < rise + width + fall && fall > 0.0)
                return v2 + (v1 - v2) * ((tc - rise - width) / fall);
            return v1;
        }
    }
    return 0.0;
}

Real Device::param(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) throw Error("device " + name + " has no parameter '" + key + "'");
    return it->second;
}

bool Circuit::has_node(const std::string& name) const {
    if (name == "0") return true;
    return std::find(nodes.begin(), nodes.end(), name) != nodes.end();
}

const Device* Circuit::find_device(const std::string& name) const {
    std::string lower = to_lower(name);
    for (const auto& d : devices) {
        if (to_lower(d.name) == lower) return &d;
    }
    return nullptr;
}

Circuit parse_netlist(const std::string& text) {
    Circuit circuit;
    std::istringstream stream(text);
    std::string line;
    int lineno = 0;
    bool have_title = false;
    bool ended = false;
    std::unordered_set<std::string> names;
    std::unordered_set<std::string> known_nodes{"0"};

    auto add_node = [&](const std::string& n) {
        if (known_nodes.insert(n).second) circuit.nodes.push_back(n);
    };

    while (std::getline(stream, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_title) {
            circuit.title = line;
            have_title = true;
            continue;
        }
        if (ended) continue;

        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty() || trimmed[0] == '*') continue;

        auto tokens = tokenize(trimmed);
        if (tokens.empty()) continue;

        if (tokens[0][0] == '.') {
            std::string directive = to_lower(tokens[0]);
            if (directive == ".end") {
                ended = true;
                continue;
            }
            if (directive == ".period") {
                CardReader rd(tokens, lineno);
                rd.next("directive");
                ParsedNumber n = rd.number("period");
                if (n.value <= 0.0) throw SyntaxError(lineno, ".period must be positive");
                circuit.fundamental_period = n.value;
                if (n.decimal.mantissa != 0) circuit.period_decimal = n.decimal;
                continue;
            }
            throw SyntaxError(lineno, "unsupported directive '" + tokens[0] + "'");
        }

        CardReader rd(tokens, lineno);
        Device dev;
        dev.name = rd.next("device name");
        char kind_letter = static_cast<char>(std::toupper(static_cast<unsigned char>(dev.name[0])));

        std::string lower_name = to_lower(dev.name);
        if (!names.insert(lower_name).second)
            throw DuplicateName(lineno, "duplicate device name '" + dev.name + "'");

        switch (kind_letter) {
            case 'R':
            case 'C':
            case 'L': {
                dev.kind = kind_letter == 'R'   ? DeviceKind::Resistor
                           : kind_letter == 'C' ? DeviceKind::Capacitor
                                                : DeviceKind::Inductor;
                dev.terminals.push_back(rd.next("node"));
                dev.terminals.push_back(rd.next("node"));
                dev.params["value"] = rd.number("value").value;
                break;
            }
            case 'V':
            case 'I': {
                dev.kind = kind_letter == 'V' ? DeviceKind::VoltageSource : DeviceKind::CurrentSource;
                dev.terminals.push_back(rd.next("node"));
                dev.terminals.push_back(rd.next("node"));
                dev.waveform = parse_waveform(rd);
                break;
            }
            case 'D': {
                dev.kind = DeviceKind::Diode;
                dev.terminals.push_back(rd.next("anode"));
                dev.terminals.push_back(rd.next("cathode"));
                auto kv = parse_kv_params(rd, lineno);
                dev.params["is"] = 1e-12;
                dev.params["n"] = 1.0;
                dev.params["vt"] = 0.02585;
                for (const auto& [k, v] : kv) {
                    if (k != "is" && k != "n" && k != "vt")
                        throw SyntaxError(lineno, "unknown diode parameter '" + k + "'");
                    dev.params[k] = v;
                }
                break;
            }
            case 'S': {
                dev.kind = DeviceKind::Switch;
                dev.terminals.push_back(rd.next("node"));
                dev.terminals.push_back(rd.next("node"));
                dev.params["ron"] = rd.number("Ron").value;
                dev.params["roff"] = rd.number("Roff").value;
                dev.waveform = parse_waveform(rd);
                break;
            }
            default:
                throw UnknownDeviceKind(lineno, "unsupported device kind '" + std::string(1, dev.name[0]) + "' in '" + dev.name + "'");
        }
        if (!rd.done())
            throw SyntaxError(lineno, "trailing tokens after device '" + dev.name + "'");

        for (const auto& t : dev.terminals) add_node(t);
        circuit.devices.push_back(std::move(dev));
    }

    if (!have_title) throw SyntaxError(1, "empty netlist (missing title line)");
    if (!ended) throw SyntaxError(lineno, "missing .end");

    if (circuit.fundamental_period <= 0.0) {
        // No .period directive: take the least common multiple of the source
        // periods so every excitation fits a whole number of times.
        PeriodFraction lcm{0, 1};
        bool exact = true;
        Real max_period = 0.0;
        for (const auto& d : circuit.devices) {
            if (!d.waveform || !d.waveform->is_periodic()) continue;
            Real p = d.waveform->kind == WaveformKind::Sin ? 1.0 / d.waveform->frequency : d.waveform->period;
            max_period = std::max(max_period, p);
            auto f = waveform_period_fraction(*d.waveform);
            if (!f) {
                exact = false;
                continue;
            }
            if (lcm.num == 0) {
                lcm = *f;
            } else {
                std::int64_t n = std::lcm(lcm.num, f->num);
                std::int64_t d2 = std::gcd(lcm.den, f->den);
                lcm = PeriodFraction{n, d2};
            }
        }
        if (exact && lcm.num > 0) {
            circuit.fundamental_period = static_cast<Real>(lcm.num) / static_cast<Real>(lcm.den);
            // keep an exact handle only when the fraction is a plain decimal
            __int128 m = lcm.num;
            std::int64_t den = lcm.den;
            int e = 0;
            while (den % 10 == 0) { den /= 10; --e; }
            while (den % 2 == 0 && m < (__int128_t(1) << 100)) { den /= 2; m *= 5; --e; }
            while (den % 5 == 0 && m < (__int128_t(1) << 100)) { den /= 5; m *= 2; --e; }
            if (den == 1 && m <= INT64_MAX) {
                Decimal dec;
                dec.mantissa = static_cast<std::int64_t>(m);
                dec.exponent = e;
                circuit.period_decimal = dec;
                circuit.fundamental_period = dec.value();
            }
        } else if (max_period > 0.0) {
            circuit.fundamental_period = max_period;
        } else {
            circuit.fundamental_period = 1.0; // DC-only circuit, nominal period
        }
    }

    return circuit;
}

Circuit parse_netlist_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open netlist file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_netlist(ss.str());
}

std::vector<Diagnostic> validate_circuit(const Circuit& c) {
    std::vector<Diagnostic> out;

    if (c.fundamental_period <= 0.0)
        out.push_back({"", "NonPositivePeriod", "fundamental period must be positive"});

    bool touches_ground = false;
    for (const auto& d : c.devices) {
        for (const auto& t : d.terminals) {
            if (t == "0") touches_ground = true;
        }
    }
    if (!c.devices.empty() && !touches_ground)
        out.push_back({"", "NoGroundReference", "no device terminal connects to node 0"});

    for (const auto& d : c.devices) {
        auto positive = [&](const char* key, const char* what) {
            auto it = d.params.find(key);
            if (it != d.params.end() && it->second <= 0.0)
                out.push_back({d.name, "NonPositiveParameter", std::string(what) + " must be > 0"});
        };
        switch (d.kind) {
            case DeviceKind::Resistor:
                positive("value", "resistance");
                break;
            case DeviceKind::Capacitor:
                positive("value", "capacitance");
                break;
            case DeviceKind::Inductor:
                positive("value", "inductance");
                break;
            case DeviceKind::Switch:
                positive("ron", "Ron");
                positive("roff", "Roff");
                if (!d.waveform || d.waveform->kind != WaveformKind::Pulse)
                    out.push_back({d.name, "MissingSwitchControl", "switch needs a PULSE control waveform"});
                break;
            case DeviceKind::Diode: {
                positive("is", "Is");
                positive("vt", "Vt");
                auto it = d.params.find("n");
                if (it != d.params.end() && it->second < 1.0)
                    out.push_back({d.name, "NonPositiveParameter", "emission coefficient N must be >= 1"});
                break;
            }
            default:
                break;
        }

        if (d.waveform && d.waveform->is_periodic()) {
            bool ok = false;
            if (c.period_decimal) {
                if (d.waveform->kind == WaveformKind::Pulse && d.waveform->period_decimal)
                    ok = Decimal::divides(*c.period_decimal, *d.waveform->period_decimal);
                else if (d.waveform->kind == WaveformKind::Sin && d.waveform->freq_decimal)
                    ok = Decimal::times_is_integer(*c.period_decimal, *d.waveform->freq_decimal);
            }
            if (!ok) {
                // fall back to a float check only when exact info is unavailable
                Real p = d.waveform->kind == WaveformKind::Sin ? 1.0 / d.waveform->frequency : d.waveform->period;
                Real ratio = c.fundamental_period / p;
                bool near_int = std::abs(ratio - std::round(ratio)) < 1e-12 * std::max(1.0, std::abs(ratio));
                bool have_exact = c.period_decimal &&
                                  ((d.waveform->kind == WaveformKind::Pulse && d.waveform->period_decimal) ||
                                   (d.waveform->kind == WaveformKind::Sin && d.waveform->freq_decimal));
                if (have_exact || !near_int || ratio < 0.5)
                    out.push_back({d.name, "IncommensurateSource",
                                   "source period does not divide the fundamental period"});
            }
        }
    }

    // Every node must reach ground through device terminals.
    std::unordered_map<std::string, std::vector<const Device*>> adjacency;
    for (const auto& d : c.devices) {
        for (const auto& t : d.terminals) adjacency[t].push_back(&d);
    }
    std::unordered_set<std::string> reached;
    std::vector<std::string> frontier{"0"};
    reached.insert("0");
    while (!frontier.empty()) {
        std::string n = frontier.back();
        frontier.pop_back();
        for (const Device* d : adjacency[n]) {
            for (const auto& t : d->terminals) {
                if (reached.insert(t).second) frontier.push_back(t);
            }
        }
    }
    for (const auto& n : c.nodes) {
        if (!reached.count(n))
            out.push_back({"", "FloatingNode", "node " + n + " has no path to ground"});
    }

    return out;
}

std::vector<ParameterRef> list_parameters(const Circuit& c) {
    std::vector<ParameterRef> out;
    for (const auto& d : c.devices) {
        switch (d.kind) {
            case DeviceKind::Resistor:
            case DeviceKind::Capacitor:
            case DeviceKind::Inductor:
                out.push_back({d.name, "value", d.param("value")});
                break;
            case DeviceKind::Switch:
                out.push_back({d.name, "ron", d.param("ron")});
                break;
            default:
                break;
        }
    }
    return out;
}

namespace {

std::string format_real(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_decimal(const Decimal& d) {
    return std::to_string(d.mantissa) + "e" + std::to_string(d.exponent);
}

std::string format_waveform(const Waveform& w) {
    std::ostringstream os;
    switch (w.kind) {
        case WaveformKind::Dc:
            os << "DC " << format_real(w.dc);
            break;
        case WaveformKind::Sin:
            os << "SIN(" << format_real(w.offset) << " " << format_real(w.amplitude) << " "
               << (w.freq_decimal ? format_decimal(*w.freq_decimal) : format_real(w.frequency)) << " "
               << format_real(w.phase_deg) << ")";
            break;
        case WaveformKind::Pulse:
            os << "PULSE(" << format_real(w.v1) << " " << format_real(w.v2) << " " << format_real(w.delay)
               << " " << format_real(w.rise) << " " << format_real(w.fall) << " " << format_real(w.width)
               << " " << (w.period_decimal ? format_decimal(*w.period_decimal) : format_real(w.period))
               << ")";
            break;
    }
    return os.str();
}

} // namespace

std::string serialize_netlist(const Circuit& c) {
    std::ostringstream os;
    os << c.title << "\n";
    for (const auto& d : c.devices) {
        os << d.name;
        for (const auto& t : d.terminals) os << " " << t;
        switch (d.kind) {
            case DeviceKind::Resistor:
            case DeviceKind::Capacitor:
            case DeviceKind::Inductor:
                os << " " << format_real(d.param("value"));
                break;
            case DeviceKind::VoltageSource:
            case DeviceKind::CurrentSource:
                os << " " << format_waveform(*d.waveform);
                break;
            case DeviceKind::Diode:
                os << " IS=" << format_real(d.param("is")) << " N=" << format_real(d.param("n"))
                   << " VT=" << format_real(d.param("vt"));
                break;
            case DeviceKind::Switch:
                os << " " << format_real(d.param("ron")) << " " << format_real(d.param("roff")) << " "
                   << format_waveform(*d.waveform);
                break;
        }
        os << "\n";
    }
    // Without an exact decimal the period was derived from the sources and
    // re-parsing re-derives it; emitting a rounded .period would break the
    // round trip.
    if (c.period_decimal) os << ".period " << format_decimal(*c.period_decimal) << "\n";
    os << ".end\n";
    return os.str();
}

} // namespace tfha
