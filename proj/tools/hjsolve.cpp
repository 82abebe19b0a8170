#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hj/characteristics.hpp"
#include "hj/errors.hpp"
#include "hj/harness.hpp"
#include "hj/io.hpp"

namespace {

double pick_dx(const hj::ProblemConfig& cfg, double override_dx) {
    if (override_dx > 0.0) return override_dx;
    if (cfg.dx.empty())
        throw hj::ConfigError("config has no dx ladder; pass --dx");
    return cfg.dx.front();
}

int run_solve(const std::string& config_path, const std::string& out,
              double dx_override) {
    const hj::ProblemConfig cfg = hj::load_config(config_path);
    const hj::LadderSetup setup = hj::ladder_setup(cfg);
    const double dx = pick_dx(cfg, dx_override);
    const hj::SolveResult result =
        hj::solve_problem(cfg, dx, setup, cfg.v0, true);

    hj::write_layers_csv(out + ".csv", result);
    hj::write_solve_metadata(out + ".json", cfg, result);

    std::printf("solved %s, d=%d, dx=%g, dt=%g, lambda=%g, levels=%d\n",
                cfg.model.name.c_str(), cfg.model.dim, dx,
                result.lattice().dt(), result.lattice().lambda(),
                result.lattice().horizon_steps() + 1);
    std::printf("max |D_x v|_inf = %.6g (bound %.6g), update residual %.3g\n",
                result.max_grad_inf(), setup.constants.deriv_bound,
                result.residual_max());
    std::printf("wrote %s.csv and %s.json\n", out.c_str(), out.c_str());
    return 0;
}

int run_walk(const std::string& config_path, const std::vector<double>& x,
             double t, hj::CharacteristicMode mode, std::size_t n,
             std::uint64_t seed, const std::string& out, double dx_override) {
    const hj::ProblemConfig cfg = hj::load_config(config_path);
    const hj::LadderSetup setup = hj::ladder_setup(cfg);
    const double dx = pick_dx(cfg, dx_override);
    const hj::SolveResult result =
        hj::solve_problem(cfg, dx, setup, cfg.v0, true);

    const hj::CharacteristicExtraction ext =
        hj::extract_characteristic(result, x, t, mode, n, seed);
    hj::write_walk_csv(out + ".csv", ext, result.lattice());

    std::printf("apex level %d, %zu ensemble path(s), mean path with %zu "
                "point(s)\n",
                ext.apex.level, ext.ensemble.paths.size(),
                ext.mean.points.size());
    std::printf("wrote %s.csv\n", out.c_str());
    return 0;
}

int run_converge(const std::string& config_path, const std::string& out) {
    const hj::ProblemConfig cfg = hj::load_config(config_path);
    const hj::ConvergenceReport rep = hj::run_convergence(cfg);

    hj::write_convergence_csv(out + ".csv", rep);
    hj::write_convergence_json(out + ".json", rep);

    std::printf("%-10s %-12s %-12s %-10s\n", "dx", "sup_error", "max_grad",
                "seconds");
    for (const hj::ConvergenceRow& row : rep.rows)
        std::printf("%-10g %-12.4e %-12.6g %-10.2f\n", row.dx, row.sup_error,
                    row.max_grad_inf, row.wall_seconds);
    if (rep.exact)
        std::printf("errors at rounding level on every rung\n");
    else if (rep.rate_fitted)
        std::printf("fitted rate %.3f (error ~ %.3g * dx^rate)\n", rep.rate,
                    rep.beta_hat);
    std::printf("wrote %s.csv and %s.json\n", out.c_str(), out.c_str());
    return 0;
}

int run_check_cmd(const std::string& config_path) {
    const hj::ProblemConfig cfg = hj::load_config(config_path);
    const hj::CheckReport rep = hj::run_check(cfg);
    for (const hj::CheckItem& item : rep.items)
        std::printf("[%s] %-26s %s\n", item.pass ? "ok" : "FAIL",
                    item.name.c_str(), item.detail.c_str());
    return rep.all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"staggered-grid solver for Hamilton-Jacobi equations"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out;
    double dx_override = 0.0;

    CLI::App* solve = app.add_subcommand(
        "solve", "solve one problem and dump every stored level");
    solve->add_option("--config", config_path, "problem config (JSON)")
        ->required();
    solve->add_option("--out", out, "output path prefix")->default_val("solve");
    solve->add_option("--dx", dx_override,
                      "grid spacing (default: first ladder entry)");

    std::vector<double> walk_x;
    double walk_t = 0.0;
    hj::CharacteristicMode walk_mode = hj::CharacteristicMode::Mean;
    std::size_t walk_n = 1;
    std::uint64_t walk_seed = 0;
    const std::map<std::string, hj::CharacteristicMode> mode_names{
        {"mean", hj::CharacteristicMode::Mean},
        {"sample", hj::CharacteristicMode::Sample},
        {"ensemble", hj::CharacteristicMode::Ensemble}};

    CLI::App* walk = app.add_subcommand(
        "walk", "trace backward walks under the minimizing control");
    walk->add_option("--config", config_path, "problem config (JSON)")
        ->required();
    walk->add_option("--x", walk_x, "query point coordinates")
        ->required()
        ->expected(-1);
    walk->add_option("--t", walk_t, "query time")->required();
    walk->add_option("--mode", walk_mode, "mean, sample, or ensemble")
        ->transform(CLI::CheckedTransformer(mode_names, CLI::ignore_case));
    walk->add_option("--n", walk_n, "ensemble size");
    walk->add_option("--seed", walk_seed, "sampling seed");
    walk->add_option("--out", out, "output path prefix")->default_val("walk");
    walk->add_option("--dx", dx_override,
                     "grid spacing (default: first ladder entry)");

    CLI::App* converge = app.add_subcommand(
        "converge", "run the refinement ladder against the exact solution");
    converge->add_option("--config", config_path, "problem config (JSON)")
        ->required();
    converge->add_option("--out", out, "output path prefix")
        ->default_val("converge");

    CLI::App* check = app.add_subcommand(
        "check", "verify scheme identities and bounds on one problem");
    check->add_option("--config", config_path, "problem config (JSON)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return run_solve(config_path, out, dx_override);
        if (walk->parsed())
            return run_walk(config_path, walk_x, walk_t, walk_mode, walk_n,
                            walk_seed, out, dx_override);
        if (converge->parsed()) return run_converge(config_path, out);
        if (check->parsed()) return run_check_cmd(config_path);
    } catch (const hj::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
