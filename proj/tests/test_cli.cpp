#include "doctest.h"

#include "visco/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace visco;
using namespace visco::cli;
namespace fs = std::filesystem;

namespace {

std::string fixture(const char* name) { return std::string(VISCO_FIXTURES) + "/" + name; }

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("visco_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Report lines without the timing record.
std::string deterministic_part(const fs::path& p)
{
    std::istringstream in(slurp(p));
    std::string line, kept;
    while (std::getline(in, line)) {
        if (line.find("\"record\":\"timing\"") == std::string::npos) kept += line + '\n';
    }
    return kept;
}

struct Run {
    int code;
    std::string out, err;
};

Run invoke(std::vector<std::string> args)
{
    args.insert(args.begin(), "visco");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

} // namespace

TEST_CASE("solve writes the solution, residual and report")
{
    const fs::path dir = scratch("solve");
    const Run r = invoke({"solve", fixture("manufactured_1d.yaml"), "--out", dir.string()});
    CHECK(r.code == ok);
    CHECK(fs::exists(dir / "solution.csv"));
    CHECK(fs::exists(dir / "residual.csv"));
    const std::string report = slurp(dir / "report.jsonl");
    CHECK(report.rfind("{\"record\":\"config\"", 0) == 0);
    CHECK(report.find("\"name\":\"error_vs_oracle\"") != std::string::npos);
}

TEST_CASE("format flag restricts the artifacts")
{
    const fs::path csv = scratch("csv_only"), rep = scratch("report_only");
    CHECK(invoke({"solve", fixture("manufactured_1d.yaml"), "--out", csv.string(), "--format", "csv"}).code == ok);
    CHECK(fs::exists(csv / "solution.csv"));
    CHECK_FALSE(fs::exists(csv / "report.jsonl"));
    CHECK(invoke({"solve", fixture("manufactured_1d.yaml"), "--out", rep.string(), "--format", "report"}).code == ok);
    CHECK_FALSE(fs::exists(rep / "solution.csv"));
    CHECK(fs::exists(rep / "report.jsonl"));
    CHECK(invoke({"solve", fixture("manufactured_1d.yaml"), "--format", "xml"}).code == config_error);
}

TEST_CASE("config errors exit 2 and name the key")
{
    Run r = invoke({"solve", fixture("bad_beta.yaml"), "--out", scratch("bad").string()});
    CHECK(r.code == config_error);
    CHECK(r.err.find("problem.beta") != std::string::npos);
    CHECK(r.err.find("beta ∈ (0, alpha+2]") != std::string::npos);

    r = invoke({"verify", fixture("unknown_key.yaml"), "--out", scratch("unknown").string()});
    CHECK(r.code == config_error);
    CHECK(r.err.find("problem.gamma") != std::string::npos);

    CHECK(invoke({"solve", fixture("missing.yaml")}).code == config_error);
    CHECK(invoke({"verify", fixture("zero_data.yaml"), "--out", scratch("nochecks").string()}).code == config_error);
    CHECK(invoke({"sweep", fixture("zero_data.yaml"), "--out", scratch("shortsweep").string()}).code == config_error);
    CHECK(invoke({}).code == config_error);
}

TEST_CASE("parse errors inside expressions are config errors")
{
    CHECK_THROWS_AS(parse_config("problem: {alpha: 0, beta: 1, lambda: 1, f: \"1 +\"}"), ConfigError);
    CHECK_THROWS_AS(parse_config("problem: {alpha: 0, beta: 1}"), ConfigError);
    CHECK_THROWS_AS(parse_config("problem: {alpha: 0, beta: 1, lambda: 1, f: \"1\"}\nsolver: {dt_factor: 1.5}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("problem: {alpha: 0, beta: 1, lambda: 1, f: \"1\"}\nverify: {checks: [bogus]}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("problem: [1, 2"), ConfigError);
}

TEST_CASE("echo round-trips and the hash ignores non-problem keys")
{
    for (const char* f : {"manufactured_1d.yaml", "positive_1d.yaml", "zero_gradient.yaml", "comparison_centered.yaml"}) {
        const RunConfig c = load_config(fixture(f));
        const RunConfig back = parse_config(config_echo(c));
        CHECK(same_config(c, back));
        CHECK(config_echo(back) == config_echo(c));
        CHECK(instance_hash(back) == instance_hash(c));
        CHECK(instance_hash(c).size() == 16);
    }
    const RunConfig a = parse_config("problem: {alpha: 0, beta: 1, lambda: 1, f: \"1\"}");
    const RunConfig b = parse_config("problem: {alpha: 0, beta: 1, lambda: 1, f: \"1\"}\nverify: {seed: 99}");
    const RunConfig c = parse_config("problem: {alpha: 0, beta: 1, lambda: 2, f: \"1\"}");
    CHECK(instance_hash(a) == instance_hash(b));
    CHECK(instance_hash(a) != instance_hash(c));
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("verify passes on the positive instance and is deterministic")
{
    const fs::path d1 = scratch("det1"), d2 = scratch("det2");
    CHECK(invoke({"verify", fixture("positive_1d.yaml"), "--out", d1.string()}).code == ok);
    CHECK(invoke({"verify", fixture("positive_1d.yaml"), "--out", d2.string()}).code == ok);
    const std::string a = deterministic_part(d1 / "certificates.jsonl");
    CHECK(a == deterministic_part(d2 / "certificates.jsonl"));
    CHECK(a.find("\"pass\":false") == std::string::npos);
    for (const char* name : {"barrier_super", "barrier_sub", "sandwich[", "strong_max[", "hopf[", "lipschitz_stability",
                             "uniqueness["})
        CHECK(a.find(std::string("\"name\":\"") + name) != std::string::npos);
}

TEST_CASE("comparison suite: upwind passes, centered drift fails with exit 4")
{
    const Run up = invoke({"verify", fixture("comparison_suite.yaml"), "--out", scratch("suite").string()});
    CHECK(up.code == ok);
    const fs::path bad = scratch("centered");
    const Run cen = invoke({"verify", fixture("comparison_centered.yaml"), "--out", bad.string()});
    CHECK(cen.code == check_failed);
    CHECK(slurp(bad / "certificates.jsonl").find("\"name\":\"comparison_suite\",\"instance\"") != std::string::npos);
}

TEST_CASE("seed override changes the suite but not the instance hash")
{
    const fs::path d1 = scratch("seed1"), d2 = scratch("seed2");
    CHECK(invoke({"verify", fixture("comparison_suite.yaml"), "--out", d1.string()}).code == ok);
    CHECK(invoke({"verify", fixture("comparison_suite.yaml"), "--out", d2.string(), "--seed", "8"}).code == ok);
    const std::string a = deterministic_part(d1 / "certificates.jsonl");
    const std::string b = deterministic_part(d2 / "certificates.jsonl");
    CHECK(a != b);
    CHECK(b.find("\"seed\":8") != std::string::npos);
    const std::string hash = instance_hash(load_config(fixture("comparison_suite.yaml")));
    CHECK(b.find(hash) != std::string::npos);
}

TEST_CASE("zero-gradient check through the config")
{
    CHECK(invoke({"verify", fixture("zero_gradient.yaml"), "--out", scratch("zg").string()}).code == ok);
}

TEST_CASE("zero data solve gives zero")
{
    const fs::path dir = scratch("zero");
    CHECK(invoke({"solve", fixture("zero_data.yaml"), "--out", dir.string()}).code == ok);
    std::istringstream in(slurp(dir / "solution.csv"));
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string x, u;
        std::getline(row, x, ',');
        std::getline(row, u, ',');
        CHECK(std::stod(u) == 0.0);
        ++rows;
    }
    CHECK(rows == 33);
}

TEST_CASE("sweep: exact linear solution at round-off, manufactured rate near one")
{
    const fs::path lin = scratch("lin");
    CHECK(invoke({"sweep", fixture("exact_linear.yaml"), "--out", lin.string()}).code == ok);
    std::istringstream in(slurp(lin / "sweep.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "h,error,rate,lipschitz,iterations");
    while (std::getline(in, line)) {
        const double e = std::stod(line.substr(line.find(',') + 1));
        CHECK(e < 1e-12);
    }

    const fs::path man = scratch("man");
    CHECK(invoke({"sweep", fixture("manufactured_1d.yaml"), "--out", man.string()}).code == ok);
    std::istringstream m(slurp(man / "sweep.csv"));
    std::getline(m, line);
    std::vector<std::string> rows;
    while (std::getline(m, line)) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    std::istringstream last(rows.back());
    std::string h, e, rate;
    std::getline(last, h, ',');
    std::getline(last, e, ',');
    std::getline(last, rate, ',');
    CHECK(std::stod(rate) > 0.9);

    CHECK(invoke({"sweep", fixture("sweep_no_oracle.yaml"), "--out", scratch("noorc").string()}).code == ok);
}

TEST_CASE("manufacture prints f and flags singular points")
{
    Run r = invoke({"manufacture", "cos(pi*x/2)", fixture("manufactured_1d.yaml")});
    CHECK(r.code == ok);
    REQUIRE(r.out.rfind("f = ", 0) == 0);
    const std::string f_text = r.out.substr(4, r.out.find('\n') - 4);
    CHECK(parse_expression(f_text).eval(0.5) == doctest::Approx(3.56257).epsilon(1e-5));

    r = invoke({"manufacture", "0", fixture("manufactured_1d.yaml")});
    CHECK(r.out == "f = 0\n");

    r = invoke({"manufacture", "1 - x^2", fixture("zero_data.yaml")});
    CHECK(r.code == ok);
    CHECK(r.out.find("singular point: (0)") != std::string::npos);

    r = invoke({"manufacture", "abs(x)", fixture("manufactured_1d.yaml")});
    CHECK(r.out.find("warning") != std::string::npos);

    const fs::path dir = scratch("manu");
    CHECK(invoke({"manufacture", "x^2", fixture("manufactured_1d.yaml"), "--out", dir.string()}).code == ok);
    CHECK(fs::exists(dir / "manufactured.json"));

    CHECK(invoke({"manufacture", "x +", fixture("manufactured_1d.yaml")}).code == config_error);
}

TEST_CASE("non-convergence exits 3")
{
    const std::string text = slurp(fixture("positive_1d.yaml")) + "solver: {max_iters: 1, continuation_steps: 1}\n";
    const fs::path cfg = fs::temp_directory_path() / "visco_cli_test_maxiter.yaml";
    std::ofstream(cfg) << text;
    const fs::path dir = scratch("maxiter");
    const Run r = invoke({"solve", cfg.string(), "--out", dir.string()});
    CHECK(r.code == not_converged);
    CHECK(slurp(dir / "report.jsonl").find("\"converged\":false") != std::string::npos);
}

TEST_CASE("output directory precedence")
{
    const fs::path from_cfg = scratch("from_cfg");
    const std::string text = slurp(fixture("exact_linear.yaml")) + "output: {dir: \"" + from_cfg.string() + "\"}\n";
    const fs::path cfg = fs::temp_directory_path() / "visco_cli_test_outdir.yaml";
    std::ofstream(cfg) << text;
    CHECK(invoke({"solve", cfg.string()}).code == ok);
    CHECK(fs::exists(from_cfg / "solution.csv"));
    const fs::path flag = scratch("from_flag");
    CHECK(invoke({"solve", cfg.string(), "--out", flag.string()}).code == ok);
    CHECK(fs::exists(flag / "solution.csv"));
}
