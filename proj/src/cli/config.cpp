#include "visco/cli.hpp"

#include <yaml-cpp/yaml.h>

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace visco::cli {

namespace {

using json = nlohmann::ordered_json;

const std::set<std::string> kChecks{"barrier", "comparison_suite", "sandwich", "strong_max", "modulus", "uniqueness",
                                    "zero_gradient"};

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void allow_keys(const YAML::Node& n, const std::string& path, std::initializer_list<const char*> allowed)
{
    if (!n.IsMap()) throw ConfigError(path.empty() ? "<root>" : path, "expected a mapping");
    for (const auto& kv : n) {
        const auto key = kv.first.as<std::string>();
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw ConfigError(join(path, key), "unknown key");
    }
}

double number(const YAML::Node& n, const std::string& path)
{
    try {
        const double v = n.as<double>();
        if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
        return v;
    } catch (const YAML::Exception&) {
        throw ConfigError(path, "expected a number");
    }
}

long long integer(const YAML::Node& n, const std::string& path)
{
    try {
        return n.as<long long>();
    } catch (const YAML::Exception&) {
        throw ConfigError(path, "expected an integer");
    }
}

std::string text(const YAML::Node& n, const std::string& path)
{
    if (!n.IsScalar()) throw ConfigError(path, "expected a string");
    return n.as<std::string>();
}

bool boolean(const YAML::Node& n, const std::string& path)
{
    try {
        return n.as<bool>();
    } catch (const YAML::Exception&) {
        throw ConfigError(path, "expected true or false");
    }
}

Vec2 point(const YAML::Node& n, const std::string& path)
{
    if (n.IsScalar()) return {number(n, path), 0.0};
    if (!n.IsSequence() || n.size() != 2) throw ConfigError(path, "expected [x, y]");
    return {number(n[0], path + "[0]"), number(n[1], path + "[1]")};
}

/// A number or a list of numbers.
std::vector<double> numbers(const YAML::Node& n, const std::string& path)
{
    if (n.IsScalar()) return {number(n, path)};
    if (!n.IsSequence() || n.size() == 0) throw ConfigError(path, "expected a number or a non-empty list");
    std::vector<double> out;
    for (std::size_t k = 0; k < n.size(); ++k) out.push_back(number(n[k], path + "[" + std::to_string(k) + "]"));
    return out;
}

Expr expression(const std::string& src, const std::string& path)
{
    try {
        return parse_expression(src);
    } catch (const ParseError& e) {
        throw ConfigError(path, e.what());
    }
}

Domain parse_domain(const YAML::Node& n, const std::string& path)
{
    allow_keys(n, path, {"kind", "lo", "hi", "center", "radius", "collar"});
    const std::string kind = n["kind"] ? text(n["kind"], path + ".kind") : "interval";
    std::optional<double> collar;
    if (n["collar"]) collar = number(n["collar"], path + ".collar");
    auto reject = [&](std::initializer_list<const char*> keys) {
        for (const char* k : keys) {
            if (n[k]) throw ConfigError(join(path, k), "not used by a domain of kind " + kind);
        }
    };
    try {
        if (kind == "interval") {
            reject({"center", "radius"});
            const double lo = n["lo"] ? number(n["lo"], path + ".lo") : -1.0;
            const double hi = n["hi"] ? number(n["hi"], path + ".hi") : 1.0;
            return Domain::interval(lo, hi, collar);
        }
        if (kind == "rectangle") {
            reject({"center", "radius"});
            const Vec2 lo = n["lo"] ? point(n["lo"], path + ".lo") : Vec2{0.0, 0.0};
            const Vec2 hi = n["hi"] ? point(n["hi"], path + ".hi") : Vec2{1.0, 1.0};
            return Domain::rectangle(lo, hi, collar);
        }
        if (kind == "ball") {
            reject({"lo", "hi"});
            const Vec2 c = n["center"] ? point(n["center"], path + ".center") : Vec2{0.0, 0.0};
            const double r = n["radius"] ? number(n["radius"], path + ".radius") : 1.0;
            return Domain::ball(c, r, collar);
        }
    } catch (const InvalidArgument& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(path + ".kind", "expected interval, rectangle or ball, got '" + kind + "'");
}

json domain_json(const Domain& d)
{
    json j;
    switch (d.kind()) {
    case Domain::Kind::interval:
        j["kind"] = "interval";
        j["lo"] = d.as_interval().lo;
        j["hi"] = d.as_interval().hi;
        break;
    case Domain::Kind::rectangle:
        j["kind"] = "rectangle";
        j["lo"] = {d.as_rectangle().lo.x, d.as_rectangle().lo.y};
        j["hi"] = {d.as_rectangle().hi.x, d.as_rectangle().hi.y};
        break;
    case Domain::Kind::ball:
        j["kind"] = "ball";
        j["center"] = {d.as_ball().center.x, d.as_ball().center.y};
        j["radius"] = d.as_ball().radius;
        break;
    }
    j["collar"] = d.collar_width();
    return j;
}

std::string_view stencil_name(Stencil s) { return s == Stencil::wide ? "wide" : "axis_only"; }
std::string_view method_name(SolveMethod m) { return m == SolveMethod::newton ? "newton" : "fixed_point"; }
std::string_view start_name(StartFrom s)
{
    switch (s) {
    case StartFrom::minus: return "minus";
    case StartFrom::plus: return "plus";
    case StartFrom::zero: return "zero";
    }
    return "minus";
}

json problem_json(const RunConfig& c)
{
    const ProblemSpec& p = c.problem;
    json j;
    j["domain"] = domain_json(p.domain);
    j["alpha"] = p.exponents.alpha;
    j["beta"] = p.exponents.beta;
    j["lambda"] = p.exponents.lambda;
    j["a"] = p.ellipticity.lower();
    j["A"] = p.ellipticity.upper();
    j["variant"] = std::string(to_string(p.variant));
    j["b"] = c.b_text;
    if (!c.f_text.empty()) j["f"] = c.f_text;
    j["phi"] = c.phi_text;
    if (c.exact_text) j["exact"] = *c.exact_text;
    return j;
}

json config_json(const RunConfig& c)
{
    json j;
    j["problem"] = problem_json(c);
    j["grid"] = {{"h", c.h}};
    const SchemeParams& s = c.solver;
    j["solver"] = {{"tol", s.tol},
                   {"max_iters", s.max_iters},
                   {"eps_rule", {{"scale", c.eps_scale}, {"power", c.eps_power}}},
                   {"stencil", stencil_name(s.stencil)},
                   {"method", method_name(s.method)},
                   {"start", start_name(s.start)},
                   {"monotone_gradient", s.monotone_gradient},
                   {"continuation_steps", s.continuation_steps},
                   {"dt_factor", s.dt_factor}};
    const VerifyConfig& v = c.verify;
    json vj = {{"checks", v.checks}, {"r", v.r}, {"seed", v.seed}, {"instances", v.instances}, {"suite_h", v.suite_h}};
    if (v.barrier_level) vj["barrier_level"] = *v.barrier_level;
    vj["barrier_samples"] = v.barrier_samples;
    vj["zero_gradient"] = {{"v", v.zero_gradient.v},
                           {"x_bar", {v.zero_gradient.x_bar.x, v.zero_gradient.x_bar.y}},
                           {"q", v.zero_gradient.q},
                           {"C", v.zero_gradient.C}};
    j["verify"] = vj;
    json oj;
    if (!c.out_dir.empty()) oj["dir"] = c.out_dir;
    oj["formats"] = c.formats;
    j["output"] = oj;
    return j;
}

} // namespace

ConfigError::ConfigError(std::string key, const std::string& detail)
    : Error(key + ": " + detail)
    , key_(std::move(key))
{
}

RunConfig parse_config(const std::string& src)
{
    YAML::Node root;
    try {
        root = YAML::Load(src);
    } catch (const YAML::Exception& e) {
        throw ConfigError("<root>", std::string("malformed YAML: ") + e.what());
    }
    allow_keys(root, "", {"problem", "grid", "solver", "verify", "output"});
    if (!root["problem"]) throw ConfigError("problem", "missing block");

    RunConfig c;
    const YAML::Node pn = root["problem"];
    allow_keys(pn, "problem", {"domain", "alpha", "beta", "lambda", "a", "A", "variant", "b", "f", "phi", "exact"});
    ProblemSpec& p = c.problem;
    if (pn["domain"]) p.domain = parse_domain(pn["domain"], "problem.domain");
    for (const char* k : {"alpha", "beta", "lambda"}) {
        if (!pn[k]) throw ConfigError(std::string("problem.") + k, "missing");
    }
    p.exponents = {number(pn["alpha"], "problem.alpha"), number(pn["beta"], "problem.beta"),
                   number(pn["lambda"], "problem.lambda")};
    const double a = pn["a"] ? number(pn["a"], "problem.a") : 1.0;
    const double A = pn["A"] ? number(pn["A"], "problem.A") : 1.0;
    try {
        p.ellipticity = EllipticityPair(a, A);
    } catch (const InvalidArgument& e) {
        throw ConfigError("problem.a", e.what());
    }
    if (pn["variant"]) {
        try {
            p.variant = operator_variant_from_string(text(pn["variant"], "problem.variant"));
        } catch (const InvalidArgument& e) {
            throw ConfigError("problem.variant", e.what());
        }
    }
    if (pn["exact"]) {
        c.exact_text = text(pn["exact"], "problem.exact");
        c.exact = expression(*c.exact_text, "problem.exact");
    }
    c.b_text = pn["b"] ? text(pn["b"], "problem.b") : "0";
    c.f_text = pn["f"] ? text(pn["f"], "problem.f") : "";
    c.phi_text = pn["phi"] ? text(pn["phi"], "problem.phi") : (c.exact_text ? *c.exact_text : "0");
    p.b = expression(c.b_text, "problem.b");
    p.f = c.f_text.empty() ? Expr::constant(0.0) : expression(c.f_text, "problem.f");
    p.phi = expression(c.phi_text, "problem.phi");

    c.h = {1.0 / 32.0};
    if (root["grid"]) {
        allow_keys(root["grid"], "grid", {"h"});
        if (root["grid"]["h"]) c.h = numbers(root["grid"]["h"], "grid.h");
    }
    for (double h : c.h) {
        if (!(h > 0.0)) throw ConfigError("grid.h", "spacings must be positive");
    }

    if (root["solver"]) {
        const YAML::Node s = root["solver"];
        allow_keys(s, "solver", {"tol", "max_iters", "eps_rule", "stencil", "method", "start", "monotone_gradient",
                                 "continuation_steps", "dt_factor"});
        SchemeParams& sp = c.solver;
        if (s["tol"]) sp.tol = number(s["tol"], "solver.tol");
        if (s["max_iters"]) sp.max_iters = static_cast<int>(integer(s["max_iters"], "solver.max_iters"));
        if (s["eps_rule"]) {
            allow_keys(s["eps_rule"], "solver.eps_rule", {"scale", "power"});
            if (s["eps_rule"]["scale"]) c.eps_scale = number(s["eps_rule"]["scale"], "solver.eps_rule.scale");
            if (s["eps_rule"]["power"]) c.eps_power = number(s["eps_rule"]["power"], "solver.eps_rule.power");
            if (!(c.eps_scale > 0.0)) throw ConfigError("solver.eps_rule.scale", "must be positive");
        }
        if (s["stencil"]) {
            const auto v = text(s["stencil"], "solver.stencil");
            if (v != "wide" && v != "axis_only") throw ConfigError("solver.stencil", "expected wide or axis_only");
            sp.stencil = v == "wide" ? Stencil::wide : Stencil::axis_only;
        }
        if (s["method"]) {
            const auto v = text(s["method"], "solver.method");
            if (v != "newton" && v != "fixed_point") throw ConfigError("solver.method", "expected newton or fixed_point");
            sp.method = v == "newton" ? SolveMethod::newton : SolveMethod::fixed_point;
        }
        if (s["start"]) {
            const auto v = text(s["start"], "solver.start");
            if (v == "minus") sp.start = StartFrom::minus;
            else if (v == "plus") sp.start = StartFrom::plus;
            else if (v == "zero") sp.start = StartFrom::zero;
            else throw ConfigError("solver.start", "expected minus, plus or zero");
        }
        if (s["monotone_gradient"]) sp.monotone_gradient = boolean(s["monotone_gradient"], "solver.monotone_gradient");
        if (s["continuation_steps"]) {
            sp.continuation_steps = static_cast<int>(integer(s["continuation_steps"], "solver.continuation_steps"));
        }
        if (s["dt_factor"]) sp.dt_factor = number(s["dt_factor"], "solver.dt_factor");
        if (!(sp.tol > 0.0)) throw ConfigError("solver.tol", "must be positive");
        if (sp.max_iters < 1) throw ConfigError("solver.max_iters", "must be at least 1");
        if (!(sp.dt_factor > 0.0 && sp.dt_factor <= 1.0)) throw ConfigError("solver.dt_factor", "must lie in (0, 1]");
        if (sp.continuation_steps < 1) throw ConfigError("solver.continuation_steps", "must be at least 1");
    }
    c.solver.eps_rule = [scale = c.eps_scale, power = c.eps_power](double h) { return scale * std::pow(h, power); };

    if (root["verify"]) {
        const YAML::Node v = root["verify"];
        allow_keys(v, "verify", {"checks", "r", "seed", "instances", "suite_h", "barrier_level", "barrier_samples",
                                 "zero_gradient"});
        VerifyConfig& vc = c.verify;
        if (v["checks"]) {
            const YAML::Node ch = v["checks"];
            if (!ch.IsSequence()) throw ConfigError("verify.checks", "expected a list");
            for (std::size_t k = 0; k < ch.size(); ++k) {
                const std::string path = "verify.checks[" + std::to_string(k) + "]";
                const auto name = text(ch[k], path);
                if (!kChecks.count(name)) throw ConfigError(path, "unknown check '" + name + "'");
                vc.checks.push_back(name);
            }
        }
        if (v["r"]) vc.r = numbers(v["r"], "verify.r");
        for (double r : vc.r) {
            if (!(r > 0.0 && r <= 1.0)) throw ConfigError("verify.r", "radii must lie in (0, 1]");
        }
        if (v["seed"]) {
            const long long s = integer(v["seed"], "verify.seed");
            if (s < 0) throw ConfigError("verify.seed", "must be non-negative");
            vc.seed = static_cast<std::uint64_t>(s);
        }
        if (v["instances"]) vc.instances = static_cast<int>(integer(v["instances"], "verify.instances"));
        if (vc.instances < 1) throw ConfigError("verify.instances", "must be at least 1");
        if (v["suite_h"]) vc.suite_h = number(v["suite_h"], "verify.suite_h");
        if (v["barrier_level"]) vc.barrier_level = number(v["barrier_level"], "verify.barrier_level");
        if (v["barrier_samples"]) {
            vc.barrier_samples = static_cast<int>(integer(v["barrier_samples"], "verify.barrier_samples"));
        }
        if (v["zero_gradient"]) {
            const YAML::Node z = v["zero_gradient"];
            allow_keys(z, "verify.zero_gradient", {"v", "x_bar", "q", "C"});
            if (z["v"]) vc.zero_gradient.v = text(z["v"], "verify.zero_gradient.v");
            expression(vc.zero_gradient.v, "verify.zero_gradient.v");
            if (z["x_bar"]) vc.zero_gradient.x_bar = point(z["x_bar"], "verify.zero_gradient.x_bar");
            if (z["q"]) vc.zero_gradient.q = number(z["q"], "verify.zero_gradient.q");
            if (z["C"]) vc.zero_gradient.C = number(z["C"], "verify.zero_gradient.C");
        }
    }

    if (root["output"]) {
        const YAML::Node o = root["output"];
        allow_keys(o, "output", {"dir", "formats"});
        if (o["dir"]) c.out_dir = text(o["dir"], "output.dir");
        if (o["formats"]) {
            c.formats.clear();
            const YAML::Node f = o["formats"];
            if (!f.IsSequence()) throw ConfigError("output.formats", "expected a list");
            for (std::size_t k = 0; k < f.size(); ++k) {
                const auto name = text(f[k], "output.formats");
                if (name != "csv" && name != "report") throw ConfigError("output.formats", "expected csv or report");
                c.formats.push_back(name);
            }
        }
    }

    // Exponent ranges and data bounds; the manufactured f needs a checked profile first.
    double finest = c.h.front();
    for (double h : c.h) finest = std::min(finest, h);
    auto checked = [&](const ProblemSpec& raw) {
        try {
            return validate_problem(raw, finest);
        } catch (const ExponentOutOfRange& e) {
            throw ConfigError("problem." + e.which(), e.what());
        } catch (const Error& e) {
            throw ConfigError("problem", e.what());
        }
    };
    p = checked(p);
    if (c.f_text.empty() && c.exact) {
        try {
            p.f = manufacture_rhs(*c.exact, p).f;
        } catch (const Error& e) {
            throw ConfigError("problem.exact", e.what());
        }
        p = checked(p);
    }
    return c;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_echo(const RunConfig& c) { return config_json(c).dump(); }

bool same_config(const RunConfig& a, const RunConfig& b) { return config_echo(a) == config_echo(b); }

std::uint64_t fnv1a(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string instance_hash(const RunConfig& c)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(problem_json(c).dump())));
    return buf;
}

} // namespace visco::cli
