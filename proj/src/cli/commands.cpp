#include "visco/certify.hpp"
#include "visco/cli.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace visco::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// One JSON object per line; the "timing" record is the only non-deterministic one.
class Report {
public:
    explicit Report(std::string hash)
        : hash_(std::move(hash))
    {
    }

    void add(json rec) { lines_.push_back(std::move(rec)); }

    void check(const std::string& name, bool pass, double margin, json at = nullptr, json detail = json::object())
    {
        json r;
        r["record"] = "check";
        r["name"] = name;
        r["instance"] = hash_;
        r["pass"] = pass;
        r["margin"] = std::isfinite(margin) ? json(margin) : json(nullptr);
        r["at"] = std::move(at);
        r["detail"] = std::move(detail);
        failed_ = failed_ || !pass;
        add(std::move(r));
    }

    bool failed() const { return failed_; }
    const std::string& hash() const { return hash_; }

    void write(const fs::path& file) const
    {
        std::ofstream out(file);
        for (const auto& l : lines_) out << l.dump() << '\n';
    }

private:
    std::string hash_;
    std::vector<json> lines_;
    bool failed_ = false;
};

struct Context {
    RunConfig cfg;
    Options opt;
    fs::path dir;
    bool csv = true;
    bool report = true;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    std::vector<std::string> artifacts;
};

fs::path output_dir(const RunConfig& cfg, const Options& opt)
{
    if (!opt.out_dir.empty()) return opt.out_dir;
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    if (const char* env = std::getenv("VISCO_OUT_DIR"); env && *env) return env;
    return "visco_out";
}

Context open(const std::string& path, const Options& opt)
{
    Context ctx;
    ctx.cfg = load_config(path);
    ctx.opt = opt;
    if (opt.seed) ctx.cfg.verify.seed = *opt.seed;
    ctx.dir = output_dir(ctx.cfg, opt);
    if (opt.format.empty()) {
        auto has = [&](const char* f) {
            return std::find(ctx.cfg.formats.begin(), ctx.cfg.formats.end(), f) != ctx.cfg.formats.end();
        };
        ctx.csv = has("csv");
        ctx.report = has("report");
    } else {
        ctx.csv = opt.format == "csv";
        ctx.report = opt.format == "report";
    }
    std::error_code ec;
    fs::create_directories(ctx.dir, ec);
    if (ec) throw ConfigError("output.dir", "cannot create " + ctx.dir.string() + ": " + ec.message());
    return ctx;
}

std::shared_ptr<const Grid> grid_for(const RunConfig& cfg, double h)
{
    try {
        return std::make_shared<const Grid>(build_grid(cfg.problem.domain, h));
    } catch (const Error& e) {
        throw ConfigError("grid.h", e.what());
    }
}

json point_json(Vec2 x, int dim) { return dim == 1 ? json::array({x.x}) : json::array({x.x, x.y}); }

json config_record(const Context& ctx)
{
    json r;
    r["record"] = "config";
    r["instance"] = instance_hash(ctx.cfg);
    r["config"] = json::parse(config_echo(ctx.cfg));
    return r;
}

json solve_record(const SolveReport& rep, double h)
{
    json r;
    r["record"] = "solve";
    r["h"] = h;
    r["converged"] = rep.converged;
    r["iterations"] = rep.iterations;
    r["final_residual"] = rep.final_residual;
    r["bracket_source"] = rep.bracket_source;
    r["bracket_certified"] = rep.bracket_certified;
    r["bracket_preserved"] = rep.bracket_preserved;
    r["eps_history"] = rep.eps_history;
    return r;
}

void finish(Context& ctx, Report& rep, const char* name)
{
    if (!ctx.report) return;
    const fs::path file = ctx.dir / name;
    ctx.artifacts.push_back(file.filename().string());
    json a;
    a["record"] = "artifacts";
    a["files"] = ctx.artifacts;
    rep.add(a);
    json t;
    t["record"] = "timing";
    t["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.t0).count();
    rep.add(t);
    rep.write(file);
}

void write_text(Context& ctx, const char* name, const std::string& body)
{
    std::ofstream(ctx.dir / name) << body;
    ctx.artifacts.push_back(name);
}

std::string residual_csv(const GridFunction& r)
{
    const Grid& g = *r.grid;
    const bool two = g.kind() == GridKind::tensor;
    std::string out = two ? "x,y,residual\n" : "x,residual\n";
    char buf[96];
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec2 x = g.node(k);
        if (two) std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x.x, x.y, r[k]);
        else std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x.x, r[k]);
        out += buf;
    }
    return out;
}

/// Round-trip text; empty for NaN.
std::string num(double v)
{
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fixed(double v, const char* f)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

/// Runs a command body, mapping library errors onto exit codes.
template <class Body>
int guarded(std::ostream& err, Body&& body)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const MaxItersExceeded& e) {
        err << "solver did not converge: " << e.what() << '\n';
        return not_converged;
    } catch (const BracketViolated& e) {
        err << "solver failure: " << e.what() << '\n';
        return not_converged;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return config_error;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return config_error;
    }
}

} // namespace

int cmd_solve(const std::string& path, const Options& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        Context ctx = open(path, opt);
        const RunConfig& cfg = ctx.cfg;
        Report rep(instance_hash(cfg));
        rep.add(config_record(ctx));
        const double h = cfg.h.front();
        const auto grid = grid_for(cfg, h);
        SolveResult res;
        try {
            res = solve(cfg.problem, grid, cfg.solver);
        } catch (const MaxItersExceeded& e) {
            json r;
            r["record"] = "solve";
            r["h"] = h;
            r["converged"] = false;
            r["iterations"] = e.iterations();
            r["final_residual"] = e.residual();
            rep.add(r);
            finish(ctx, rep, "report.jsonl");
            throw;
        }
        rep.add(solve_record(res.report, h));
        const GridFunction residual = discrete_residual(res.u, cfg.problem, cfg.solver);
        if (cfg.exact) {
            const double e = max_abs_diff(res.u, GridFunction::sample(grid, *cfg.exact));
            json r;
            r["record"] = "oracle";
            r["name"] = "error_vs_oracle";
            r["h"] = h;
            r["error"] = e;
            rep.add(r);
            out << "error vs oracle: " << std::setprecision(6) << e << '\n';
        }
        if (ctx.csv) {
            write_text(ctx, "solution.csv", solution_csv(res.u, residual));
            write_text(ctx, "residual.csv", residual_csv(residual));
        }
        finish(ctx, rep, "report.jsonl");
        out << "solved " << grid->size() << " nodes in " << res.report.iterations << " iterations, residual "
            << std::setprecision(3) << res.report.final_residual << " -> " << ctx.dir.string() << '\n';
        return res.report.converged ? ok : not_converged;
    });
}

int cmd_verify(const std::string& path, const Options& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        Context ctx = open(path, opt);
        const RunConfig& cfg = ctx.cfg;
        const VerifyConfig& vc = cfg.verify;
        if (vc.checks.empty()) throw ConfigError("verify.checks", "request at least one check");
        const ProblemSpec& prob = cfg.problem;
        const int dim = prob.dim();
        Report rep(instance_hash(cfg));
        rep.add(config_record(ctx));

        // Solutions per grid level, computed on first use.
        std::vector<std::optional<SolveResult>> solved(cfg.h.size());
        auto solution = [&](std::size_t level) -> const SolveResult& {
            if (!solved[level]) {
                solved[level] = solve(prob, grid_for(cfg, cfg.h[level]), cfg.solver);
                rep.add(solve_record(solved[level]->report, cfg.h[level]));
            }
            return *solved[level];
        };

        for (const std::string& check : vc.checks) {
            if (check == "barrier") {
                const double level = vc.barrier_level.value_or(std::max(prob.bounds.f_sup, 1e-3));
                for (BarrierSide side : {BarrierSide::super, BarrierSide::sub}) {
                    const std::string name = side == BarrierSide::super ? "barrier_super" : "barrier_sub";
                    try {
                        const BarrierSpec w = barrier_for(prob, level, side);
                        const auto vr = classical_check(w, prob, vc.barrier_samples);
                        Vec2 worst;
                        double m = std::numeric_limits<double>::infinity();
                        int counts[3] = {0, 0, 0};
                        for (const auto& r : vr.records) {
                            ++counts[static_cast<int>(r.classification)];
                            if (r.margin < m) {
                                m = r.margin;
                                worst = r.point;
                            }
                        }
                        rep.check(name, vr.passed, vr.min_margin - level, point_json(worst, dim),
                                  {{"level", level},
                                   {"samples", vr.records.size()},
                                   {"classical", counts[0]},
                                   {"zero_gradient", counts[1]},
                                   {"locally_constant", counts[2]}});
                    } catch (const Error& e) {
                        rep.check(name, false, NAN, nullptr, {{"error", e.what()}});
                    }
                }
            } else if (check == "comparison_suite") {
                const auto suite = comparison_suite(vc.seed, vc.instances, cfg.solver, vc.suite_h);
                for (const auto& o : suite.outcomes) {
                    json d = {{"solved", o.solved}};
                    if (!o.error.empty()) d["error"] = o.error;
                    rep.check("comparison[" + std::to_string(o.index) + "]", o.passed, o.margin, nullptr, d);
                }
                rep.check("comparison_suite", suite.passed, static_cast<double>(-suite.violations), nullptr,
                          {{"seed", vc.seed},
                           {"instances", vc.instances},
                           {"violations", suite.violations},
                           {"unsolved", suite.unsolved},
                           {"monotone_gradient", cfg.solver.monotone_gradient}});
            } else if (check == "sandwich") {
                for (std::size_t l = 0; l < cfg.h.size(); ++l) {
                    const auto& u = solution(l).u;
                    const std::string name = "sandwich[h=" + json(cfg.h[l]).dump() + "]";
                    try {
                        const Sandwich s = sandwich_check(u, prob.domain);
                        rep.check(name, s.passed, s.c, point_json(u.grid->node(s.c_node), dim),
                                  {{"c", s.c}, {"C", s.C}});
                    } catch (const SignViolation& e) {
                        rep.check(name, false, NAN, nullptr, {{"error", e.what()}});
                    }
                }
            } else if (check == "strong_max") {
                for (std::size_t l = 0; l < cfg.h.size(); ++l) {
                    const auto& u = solution(l).u;
                    const std::string suffix = "[h=" + json(cfg.h[l]).dump() + "]";
                    const StrongMaxReport sm = strong_max_with_hopf(prob, u);
                    const bool interior_ok = sm.identically_zero || sm.interior_min > 0.0;
                    rep.check("strong_max" + suffix, interior_ok, sm.interior_min,
                              point_json(u.grid->node(sm.interior_min_node), dim),
                              {{"identically_zero", sm.identically_zero}});
                    for (const auto& q : sm.quotients) {
                        rep.check("hopf" + suffix, q.passed, q.quotient - q.threshold,
                                  point_json(u.grid->node(q.node), dim),
                                  {{"quotient", q.quotient}, {"threshold", q.threshold}});
                    }
                }
            } else if (check == "modulus") {
                for (double r : vc.r) {
                    std::vector<double> L;
                    for (std::size_t l = 0; l < cfg.h.size(); ++l) {
                        const auto& u = solution(l).u;
                        const ModulusFit fit = modulus_fit(u, r, ModulusForm::lipschitz, 1.0, vc.seed);
                        L.push_back(fit.constant);
                        rep.check("lipschitz[r=" + json(r).dump() + ",h=" + json(cfg.h[l]).dump() + "]",
                                  std::isfinite(fit.constant), fit.constant,
                                  json::array({point_json(u.grid->node(fit.pair_i), dim),
                                               point_json(u.grid->node(fit.pair_j), dim)}),
                                  {{"pairs", fit.pairs}, {"exhaustive", fit.exhaustive}});
                    }
                    if (L.size() >= 2) {
                        const double a = L[L.size() - 2], b = L.back();
                        const double rel = std::abs(a - b) / std::max(std::abs(b), 1e-300);
                        rep.check("lipschitz_stability[r=" + json(r).dump() + "]", rel < 0.1, 0.1 - rel, nullptr,
                                  {{"coarse", a}, {"fine", b}});
                    }
                }
            } else if (check == "uniqueness") {
                const double h = cfg.h.front();
                const auto grid = grid_for(cfg, h);
                SchemeParams lo = cfg.solver, hi = cfg.solver;
                lo.start = StartFrom::minus;
                hi.start = StartFrom::plus;
                const double d = max_abs_diff(solve(prob, grid, lo).u, solve(prob, grid, hi).u);
                rep.check("uniqueness[h=" + json(h).dump() + "]", d <= 1e-6, 1e-6 - d, nullptr, {{"difference", d}});
            } else if (check == "zero_gradient") {
                const auto& z = vc.zero_gradient;
                try {
                    const auto r = zero_gradient_check(parse_expression(z.v), prob, z.x_bar, z.q, z.C);
                    rep.check("zero_gradient", r.passed, r.margin, point_json(z.x_bar, dim), {{"q_min", r.q_min}});
                } catch (const QTooSmall& e) {
                    rep.check("zero_gradient", false, z.q - e.q_min(), point_json(z.x_bar, dim),
                              {{"error", e.what()}, {"q_min", e.q_min()}});
                } catch (const NotStrictMinimum& e) {
                    rep.check("zero_gradient", false, NAN, point_json(z.x_bar, dim), {{"error", e.what()}});
                }
            }
        }
        finish(ctx, rep, "certificates.jsonl");
        out << (rep.failed() ? "FAIL" : "PASS") << ": " << vc.checks.size() << " check group(s), report in "
            << ctx.dir.string() << '\n';
        return rep.failed() ? check_failed : ok;
    });
}

int cmd_sweep(const std::string& path, const Options& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        Context ctx = open(path, opt);
        const RunConfig& cfg = ctx.cfg;
        if (cfg.h.size() < 3) throw ConfigError("grid.h", "a sweep needs at least 3 spacings");
        Report rep(instance_hash(cfg));
        rep.add(config_record(ctx));
        const double r = cfg.verify.r.front();
        std::string csv = "h,error,rate,lipschitz,iterations\n";
        double prev = NAN;
        std::optional<GridFunction> coarse;
        out << (cfg.exact ? "h error rate lipschitz\n" : "h difference rate lipschitz\n");
        for (double h : cfg.h) {
            const auto grid = grid_for(cfg, h);
            const SolveResult res = solve(cfg.problem, grid, cfg.solver);
            rep.add(solve_record(res.report, h));
            // Without an oracle: largest change against the previous level on the shared nodes.
            double e = NAN;
            if (cfg.exact) {
                e = max_abs_diff(res.u, GridFunction::sample(grid, *cfg.exact));
            } else if (coarse) {
                e = 0.0;
                const Grid& cg = *coarse->grid;
                for (std::size_t k = 0; k < cg.size(); ++k) {
                    const Vec2 x = cg.node(k);
                    for (std::size_t j = 0; j < grid->size(); ++j) {
                        if (norm(grid->node(j) - x) <= 1e-9 * h) {
                            e = std::max(e, std::abs(res.u[j] - (*coarse)[k]));
                            break;
                        }
                    }
                }
            }
            // Rates only between two nonzero errors; exact reproductions leave it blank.
            const double rate = prev > 0.0 && e > 0.0 ? std::log2(prev / e) : NAN;
            const double L = modulus_fit(res.u, r, ModulusForm::lipschitz, 1.0, cfg.verify.seed).constant;
            json row;
            row["record"] = "sweep";
            row["h"] = h;
            row["error"] = std::isfinite(e) ? json(e) : json(nullptr);
            row["rate"] = std::isfinite(rate) ? json(rate) : json(nullptr);
            row["lipschitz"] = L;
            rep.add(row);
            csv += num(h) + ',' + num(e) + ',' + num(rate) + ',' + num(L) + ',' + std::to_string(res.report.iterations) + '\n';
            char buf[160];
            std::snprintf(buf, sizeof buf, "%-10.4g %-12s %-8s %.6f\n", h, std::isfinite(e) ? fixed(e, "%.4e").c_str() : "-",
                          std::isfinite(rate) ? fixed(rate, "%.3f").c_str() : "-", L);
            out << buf;
            prev = e;
            coarse = res.u;
        }
        if (ctx.csv) write_text(ctx, "sweep.csv", csv);
        finish(ctx, rep, "report.jsonl");
        return ok;
    });
}

int cmd_manufacture(const std::string& u_expr, const std::string& path, const Options& opt, std::ostream& out,
                    std::ostream& err)
{
    return guarded(err, [&] {
        const RunConfig cfg = load_config(path);
        const Expr u = parse_expression(u_expr);
        const ManufacturedRhs m = manufacture_rhs(u, cfg.problem);
        out << "f = " << m.f.str() << '\n';
        for (const Vec2& x : m.singular_points) {
            out << "singular point: (" << x.x << (cfg.problem.dim() == 2 ? ", " + std::to_string(x.y) : "") << ")\n";
        }
        if (m.kink_warning) out << "warning: u has kinks; f is exact only away from them\n";
        if (!opt.out_dir.empty()) {
            fs::create_directories(opt.out_dir);
            json j;
            j["u"] = u.str();
            j["f"] = m.f.str();
            j["singular"] = m.singular;
            json pts = json::array();
            for (const Vec2& x : m.singular_points) pts.push_back(point_json(x, cfg.problem.dim()));
            j["singular_points"] = pts;
            j["kink_warning"] = m.kink_warning;
            std::ofstream(fs::path(opt.out_dir) / "manufactured.json") << j.dump() << '\n';
        }
        return ok;
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Monotone finite-difference solver and certificates for singular/degenerate fully nonlinear equations"};
    app.require_subcommand(1);
    Options opt;
    std::optional<std::uint64_t> seed;
    std::string config, expr;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", opt.out_dir, "output directory (default: output.dir, $VISCO_OUT_DIR, ./visco_out)");
        sub->add_option("--seed", seed, "seed for randomized suites");
        sub->add_option("--format", opt.format, "write only csv artifacts or only the report")
            ->check(CLI::IsMember({"csv", "report"}));
    };
    auto* solve_cmd = app.add_subcommand("solve", "solve the configured problem");
    auto* verify_cmd = app.add_subcommand("verify", "run the configured certificate checks");
    auto* sweep_cmd = app.add_subcommand("sweep", "refinement study over grid.h");
    auto* manu_cmd = app.add_subcommand("manufacture", "right-hand side for which u is an exact solution");
    for (auto* sub : {solve_cmd, verify_cmd, sweep_cmd}) {
        sub->add_option("config", config, "YAML run configuration")->required();
        add_common(sub);
    }
    manu_cmd->add_option("u", expr, "candidate solution, e.g. \"cos(pi*x/2)\"")->required();
    manu_cmd->add_option("config", config, "YAML run configuration")->required();
    add_common(manu_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return config_error;
    }
    opt.seed = seed;
    if (*solve_cmd) return cmd_solve(config, opt, out, err);
    if (*verify_cmd) return cmd_verify(config, opt, out, err);
    if (*sweep_cmd) return cmd_sweep(config, opt, out, err);
    return cmd_manufacture(expr, config, opt, out, err);
}

} // namespace visco::cli
