#pragma once

// Run configurations and the command-line front end.
//
// Config files are YAML; every key is optional except problem.alpha/beta/lambda and the data
// expressions, and unknown keys are errors.  See README.md for the schema.

#include "visco/errors.hpp"
#include "visco/problem.hpp"
#include "visco/scheme.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace visco::cli {

/// Bad config: `key` is the dotted path of the offending entry.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& detail);
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

struct ZeroGradientConfig {
    std::string v = "x^4";
    Vec2 x_bar;
    double q = 3.0;
    double C = 1.0;
    friend bool operator==(const ZeroGradientConfig& a, const ZeroGradientConfig& b)
    {
        return a.v == b.v && a.x_bar.x == b.x_bar.x && a.x_bar.y == b.x_bar.y && a.q == b.q && a.C == b.C;
    }
};

struct VerifyConfig {
    std::vector<std::string> checks;
    std::vector<double> r{0.5};
    std::uint64_t seed = 7;
    int instances = 50;
    double suite_h = 1.0 / 16.0;
    std::optional<double> barrier_level;
    int barrier_samples = 1000;
    ZeroGradientConfig zero_gradient;
    friend bool operator==(const VerifyConfig&, const VerifyConfig&) = default;
};

struct RunConfig {
    ProblemSpec problem;
    /// Source texts of the data, kept for the echo.
    std::string b_text, f_text, phi_text;
    std::optional<std::string> exact_text;
    std::optional<Expr> exact;
    std::vector<double> h;
    SchemeParams solver;
    double eps_scale = 1.0;
    double eps_power = 1.0;
    VerifyConfig verify;
    std::string out_dir;
    std::vector<std::string> formats{"csv", "report"};
};

/// Parses YAML text (JSON is accepted too).  Throws ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical JSON text of the config; parse_config(config_echo(c)) reproduces c.
std::string config_echo(const RunConfig& c);
bool same_config(const RunConfig& a, const RunConfig& b);

/// 64-bit FNV-1a of the canonical problem block, as 16 hex digits.
std::string instance_hash(const RunConfig& c);
std::uint64_t fnv1a(const std::string& bytes);

struct Options {
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    /// "csv", "report" or empty for both.
    std::string format;
};

/// Exit codes shared by all commands.
enum ExitCode { ok = 0, config_error = 2, not_converged = 3, check_failed = 4 };

int cmd_solve(const std::string& config_path, const Options& opt, std::ostream& out, std::ostream& err);
int cmd_verify(const std::string& config_path, const Options& opt, std::ostream& out, std::ostream& err);
int cmd_sweep(const std::string& config_path, const Options& opt, std::ostream& out, std::ostream& err);
int cmd_manufacture(const std::string& u_expr, const std::string& config_path, const Options& opt, std::ostream& out,
                    std::ostream& err);

/// Parses argv and dispatches; returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace visco::cli
