#include "kslab/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "kslab/errors.hpp"

namespace kslab::config {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) out.push_back(trim(item));
    return out;
}

double parse_real(const std::string& key, const std::string& s) {
    if (s.empty()) throw ParameterError(key + ": value required");
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
        throw ParameterError(key + ": not a finite real: '" + s + "'");
    return v;
}

long long parse_integer(const std::string& key, const std::string& s) {
    if (s.empty()) throw ParameterError(key + ": value required");
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || errno == ERANGE) throw ParameterError(key + ": not an integer: '" + s + "'");
    return v;
}

std::vector<ParamSpec> make_specs(Command c) {
    using T = ParamType;
    std::vector<ParamSpec> s;
    switch (c) {
        case Command::spectrum:
            s = {{"nu", T::real_list, "0.01,0.001,0.0001", {}, "scales of the weighted operator"},
                 {"beta", T::real, "0.5", {}, "rate parameter"},
                 {"n", T::integer, "4", {}, "highest eigenvalue index"},
                 {"ppd", T::integer, "64", {}, "grid points per decade"},
                 {"refined", T::boolean, "false", {}, "include the refined prediction for n = 0, 1"},
                 {"max_residual_scaled", T::real, "5", {}, "invariant bound on the scaled residual"}};
            break;
        case Command::modulate:
            s = {{"mode", T::tag, "stable", {"stable", "unstable"}, "stable or unstable sector"},
                 {"ell", T::integer, "2", {}, "unstable sector index"},
                 {"beta0", T::real, "0.5", {}, "initial rate"},
                 {"tau0", T::real, "10", {}, "initial parabolic time"},
                 {"tau_end", T::real, "100000", {}, "final parabolic time"},
                 {"modes", T::integer, "3", {}, "number of tracked amplitudes a_1..a_N"},
                 {"amplitude", T::real, "0.1", {}, "free amplitudes start at amplitude nu0^2"},
                 {"initial", T::tag, "centered", {"centered", "plain"}, "initial scale rule"},
                 {"tolerance", T::real, "1e-10", {}, "local error tolerance"},
                 {"output_points", T::integer, "400", {}, "log-spaced samples"},
                 {"fit_tau_lo", T::real, "50", {}, "lower end of the power-law fit window"},
                 {"fit_tau_hi", T::real, "2000", {}, "upper end of the power-law fit window"}};
            break;
        case Command::simulate:
            s = {{"preset", T::tag, "scaled_Q", {"scaled_Q", "Q_plus_bump"}, "initial data"},
                 {"lambda0", T::real, "1", {}, "initial width"},
                 {"mass_factor", T::real, "1.1", {}, "mass relative to the critical one"},
                 {"amp", T::real, "0.2", {}, "bump amplitude"},
                 {"width", T::real, "5", {}, "bump width"},
                 {"r_floor", T::real, "1e-08", {}, "innermost radius"},
                 {"r_max", T::real, "10000", {}, "outer radius"},
                 {"ppd", T::integer, "32", {}, "grid points per decade"},
                 {"u0_cap", T::real, "10000000000", {}, "blow-up threshold on u(0)"},
                 {"t_max", T::real, "1000", {}, "time horizon"},
                 {"cfl", T::real, "0.5", {}, "Courant number of the explicit flux"},
                 {"dt_u0", T::real, "0.1", {}, "dt <= dt_u0 / u0"},
                 {"record_growth", T::real, "1.02", {}, "record when u0 changes by this factor"},
                 {"record_dt", T::real, "0.05", {}, "or when t advances this much"},
                 {"snapshot_factor", T::real, "10", {}, "snapshot every time u0 grows by this factor"},
                 {"decay_stop", T::real, "0.01", {}, "subcritical once u0 < decay_stop u0(0)"},
                 {"projection_modes", T::integer, "2", {}, "modes in the remainder projection"},
                 {"projection_beta", T::real, "0.5", {}, "rate used by the projection"}};
            break;
        case Command::verify:
            s = {{"criteria", T::integer_list, "1,2,3,4,5,6,7,8,9,10", {}, "acceptance items to run"},
                 {"spectral_ppd", T::integer, "64", {}, "grid density of the spectral items"},
                 {"pde_ppd", T::integer, "32", {}, "grid density of the blow-up runs"},
                 {"q_ppd", T::integer, "128", {}, "grid density of the stationary test"}};
            break;
        case Command::tables:
            s = {{"nu", T::real_list, "0.01,0.001,0.0001", {}, "scales for the eigenvalue table"},
                 {"beta", T::real, "0.5", {}, "rate parameter"},
                 {"n", T::integer, "3", {}, "highest eigenvalue index"},
                 {"ppd", T::integer, "64", {}, "grid points per decade"},
                 {"betas", T::real_list, "0.25,0.5,1", {}, "rates for the law-constant table"},
                 {"tau_end", T::real, "100000", {}, "final parabolic time of the stable runs"},
                 {"ells", T::integer_list, "2,3,4", {}, "unstable sectors to fit"}};
            break;
    }
    s.push_back({"seed", T::integer, "0", {}, "seed of the random trial vectors"});
    return s;
}

// shortest %g form that reads back to the same double
std::string shortest(double v) {
    char buf[40];
    for (int digits = 1; digits <= 17; ++digits) {
        std::snprintf(buf, sizeof buf, "%.*g", digits, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace

const char* to_string(Command c) {
    switch (c) {
        case Command::spectrum: return "spectrum";
        case Command::modulate: return "modulate";
        case Command::simulate: return "simulate";
        case Command::verify: return "verify";
        case Command::tables: return "tables";
    }
    return "?";
}

Command command_from_string(const std::string& s) {
    for (auto c : {Command::spectrum, Command::modulate, Command::simulate, Command::verify, Command::tables})
        if (s == to_string(c)) return c;
    throw ParameterError("unknown command '" + s + "'");
}

const std::vector<ParamSpec>& parameter_specs(Command c) {
    static const std::vector<ParamSpec> tables[] = {make_specs(Command::spectrum), make_specs(Command::modulate),
                                                    make_specs(Command::simulate), make_specs(Command::verify),
                                                    make_specs(Command::tables)};
    return tables[static_cast<int>(c)];
}

ParamValue parse_value(const ParamSpec& spec, const std::string& raw) {
    std::string text = trim(raw);
    const std::string& k = spec.key;
    switch (spec.type) {
        case ParamType::real: return parse_real(k, text);
        case ParamType::integer: return parse_integer(k, text);
        case ParamType::boolean:
            if (text == "true" || text == "1") return true;
            if (text == "false" || text == "0") return false;
            throw ParameterError(k + ": expected true or false, got '" + text + "'");
        case ParamType::tag:
            if (std::find(spec.tags.begin(), spec.tags.end(), text) == spec.tags.end())
                throw ParameterError(k + ": unknown value '" + text + "'");
            return text;
        case ParamType::real_list: {
            if (text.empty()) throw ParameterError(k + ": value required");
            std::vector<double> v;
            for (const auto& item : split_list(text)) v.push_back(parse_real(k, item));
            return v;
        }
        case ParamType::integer_list: {
            if (text.empty()) throw ParameterError(k + ": value required");
            std::vector<long long> v;
            for (const auto& item : split_list(text)) v.push_back(parse_integer(k, item));
            return v;
        }
    }
    throw ParameterError(k + ": unsupported type");
}

std::string format_value(const ParamValue& v) {
    struct Visitor {
        std::string operator()(double x) const { return shortest(x); }
        std::string operator()(long long x) const { return std::to_string(x); }
        std::string operator()(bool x) const { return x ? "true" : "false"; }
        std::string operator()(const std::string& x) const { return x; }
        std::string operator()(const std::vector<double>& x) const {
            std::string s;
            for (std::size_t i = 0; i < x.size(); ++i) s += (i ? "," : "") + shortest(x[i]);
            return s;
        }
        std::string operator()(const std::vector<long long>& x) const {
            std::string s;
            for (std::size_t i = 0; i < x.size(); ++i) s += (i ? "," : "") + std::to_string(x[i]);
            return s;
        }
    };
    return std::visit(Visitor{}, v);
}

RunConfig::RunConfig(Command c) : command_(c) {
    for (const auto& s : parameter_specs(c)) values_[s.key] = parse_value(s, s.default_text);
}

const ParamSpec& RunConfig::spec(const std::string& key) const {
    for (const auto& s : parameter_specs(command_))
        if (s.key == key) return s;
    throw ParameterError(std::string("unknown key '") + key + "' for command " + to_string(command_));
}

void RunConfig::set(const std::string& key, const std::string& text) {
    if (key == "output_dir") {
        std::string dir = trim(text);
        if (dir.empty()) throw ParameterError("output_dir: value required");
        output_dir = dir;
        return;
    }
    values_[key] = parse_value(spec(key), text);
}

const ParamValue& RunConfig::get(const std::string& key) const {
    spec(key);
    return values_.at(key);
}

double RunConfig::real(const std::string& key) const { return std::get<double>(get(key)); }
long long RunConfig::integer(const std::string& key) const { return std::get<long long>(get(key)); }
bool RunConfig::boolean(const std::string& key) const { return std::get<bool>(get(key)); }
const std::string& RunConfig::tag(const std::string& key) const { return std::get<std::string>(get(key)); }
const std::vector<double>& RunConfig::reals(const std::string& key) const {
    return std::get<std::vector<double>>(get(key));
}
const std::vector<long long>& RunConfig::integers(const std::string& key) const {
    return std::get<std::vector<long long>>(get(key));
}

std::string RunConfig::to_text() const {
    std::string out = std::string("command = ") + to_string(command_) + "\noutput_dir = " + output_dir + "\n";
    for (const auto& s : parameter_specs(command_)) out += s.key + " = " + format_value(values_.at(s.key)) + "\n";
    return out;
}

void RunConfig::apply_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParameterError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "command") {
            if (command_from_string(value) != command_)
                throw ParameterError("config is for command '" + value + "', not " + to_string(command_));
            continue;
        }
        set(key, value);
    }
}

void RunConfig::apply_pair(const std::string& pair) {
    auto eq = pair.find('=');
    if (eq == std::string::npos) throw ParameterError("expected key=value, got '" + pair + "'");
    set(trim(pair.substr(0, eq)), pair.substr(eq + 1));
}

RunConfig RunConfig::from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        if (trim(line.substr(0, eq)) == "command") {
            RunConfig c(command_from_string(trim(line.substr(eq + 1))));
            c.apply_text(text);
            return c;
        }
    }
    throw ParameterError("config text has no command line");
}

bool RunConfig::operator==(const RunConfig& o) const {
    return command_ == o.command_ && output_dir == o.output_dir && values_ == o.values_;
}

}  // namespace kslab::config
