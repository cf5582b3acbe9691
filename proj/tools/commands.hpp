#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace becctl {

inline constexpr const char* version = "1.0.0";

// exit status 2
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;
    std::map<std::string, std::string> params;
    std::uint64_t seed = 0;
    std::string output;  // empty: standard output
    std::string format = "json";
};

struct Report {
    int exit_code = 0;
    std::string body;
};

// args excludes the program name; throws UsageError
RunConfig parse_command_line(const std::vector<std::string>& args);
// "key = value" lines; '#' starts a comment
std::map<std::string, std::string> parse_config_text(const std::string& text);

Report execute(const RunConfig& config);

// full front end: parse, execute, write; returns the exit status
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// shared CSV number format: 17 significant digits, no locale
std::string format_number(double x);

}  // namespace becctl
