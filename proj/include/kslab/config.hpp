#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace kslab::config {

enum class Command { spectrum, modulate, simulate, verify, tables };
const char* to_string(Command c);
Command command_from_string(const std::string& s);

enum class ParamType { real, integer, boolean, tag, real_list, integer_list };

using ParamValue = std::variant<double, long long, bool, std::string, std::vector<double>, std::vector<long long>>;

struct ParamSpec {
    std::string key;
    ParamType type = ParamType::real;
    std::string default_text;
    std::vector<std::string> tags;  // allowed values of a tag
    std::string help;
};

// the complete parameter set of a command, in output order
const std::vector<ParamSpec>& parameter_specs(Command c);

// typed value from its text; throws ParameterError on malformed input
ParamValue parse_value(const ParamSpec& spec, const std::string& text);
// canonical text: reals in the shortest form that reads back exactly, lists
// comma separated
std::string format_value(const ParamValue& v);

class RunConfig {
public:
    explicit RunConfig(Command c = Command::spectrum);

    Command command() const { return command_; }
    std::string output_dir = ".";

    // unknown keys and malformed values throw ParameterError
    void set(const std::string& key, const std::string& text);
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const ParamValue& get(const std::string& key) const;

    double real(const std::string& key) const;
    long long integer(const std::string& key) const;
    bool boolean(const std::string& key) const;
    const std::string& tag(const std::string& key) const;
    const std::vector<double>& reals(const std::string& key) const;
    const std::vector<long long>& integers(const std::string& key) const;

    // `command = ...`, `output_dir = ...`, then every parameter as `key = value`
    std::string to_text() const;
    // inverse of to_text; a command line is required
    static RunConfig from_text(const std::string& text);

    // applies `key = value` lines ('#' starts a comment); `command` must match
    // if present
    void apply_text(const std::string& text);
    // applies a single `key=value` token
    void apply_pair(const std::string& pair);

    bool operator==(const RunConfig& o) const;

private:
    const ParamSpec& spec(const std::string& key) const;

    Command command_;
    std::map<std::string, ParamValue> values_;
};

}  // namespace kslab::config
