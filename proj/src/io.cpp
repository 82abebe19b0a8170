#include "hj/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hj/errors.hpp"

namespace hj {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError("config: unknown key \"" + item.key() +
                              "\" in " + where);
    }
}

std::vector<double> to_vec(const json& j, const std::string& where) {
    if (!j.is_array())
        throw ConfigError("config: " + where + " must be an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) out.push_back(v.get<double>());
    return out;
}

InitialDataSpec parse_data(const json& j, const std::string& where) {
    if (!j.is_object())
        throw ConfigError("config: " + where + " must be an object");
    check_keys(j, {"name", "a", "b", "lip", "period", "coarse", "seed"},
               where);
    InitialDataSpec spec;
    spec.name = j.value("name", spec.name);
    if (j.contains("a")) spec.a = to_vec(j.at("a"), where + ".a");
    spec.b = j.value("b", spec.b);
    spec.lip = j.value("lip", spec.lip);
    spec.period = j.value("period", spec.period);
    spec.coarse = j.value("coarse", spec.coarse);
    spec.seed = j.value("seed", spec.seed);
    return spec;
}

DomainSpec parse_domain(const json& j) {
    if (!j.is_object())
        throw ConfigError("config: domain must be an object");
    check_keys(j, {"type", "k_lo", "k_hi", "period"}, "domain");
    DomainSpec dom;
    const std::string type = j.value("type", std::string("slab"));
    if (type == "slab")
        dom.type = DomainSpec::Type::Slab;
    else if (type == "periodic")
        dom.type = DomainSpec::Type::Periodic;
    else
        throw ConfigError("config: domain.type must be \"slab\" or "
                          "\"periodic\", got \"" +
                          type + "\"");
    if (j.contains("k_lo")) dom.k_lo = to_vec(j.at("k_lo"), "domain.k_lo");
    if (j.contains("k_hi")) dom.k_hi = to_vec(j.at("k_hi"), "domain.k_hi");
    if (j.contains("period"))
        dom.period = to_vec(j.at("period"), "domain.period");
    return dom;
}

Budgets parse_budgets(const json& j) {
    if (!j.is_object())
        throw ConfigError("config: budgets must be an object");
    check_keys(j,
               {"enum_cap", "mc_paths", "queries_per_axis", "time_slices",
                "contraction_levels"},
               "budgets");
    Budgets b;
    b.enum_cap = j.value("enum_cap", b.enum_cap);
    b.mc_paths = j.value("mc_paths", b.mc_paths);
    b.queries_per_axis = j.value("queries_per_axis", b.queries_per_axis);
    b.time_slices = j.value("time_slices", b.time_slices);
    b.contraction_levels = j.value("contraction_levels", b.contraction_levels);
    return b;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool centered_diff_in_storage(const Lattice& lat, const IndexBox& box,
                              std::span<const std::int64_t> m) {
    if (lat.is_periodic()) return true;
    std::vector<std::int64_t> n(m.begin(), m.end());
    for (int j = 0; j < lat.dim(); ++j) {
        for (std::int64_t s : {std::int64_t{-1}, std::int64_t{1}}) {
            n[j] = m[j] + s;
            if (!box.contains(n)) return false;
        }
        n[j] = m[j];
    }
    return true;
}

} // namespace

ProblemConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");

    try {
        check_keys(j,
                   {"model", "v0", "v0_b", "domain", "T", "h", "r", "R", "dx",
                    "lambda_safety", "init_mode", "seed", "budgets"},
                   "the top level");

        ProblemConfig cfg;
        if (j.contains("model")) {
            const json& jm = j.at("model");
            if (!jm.is_object())
                throw ConfigError("config: model must be an object");
            check_keys(jm, {"name", "dim", "diag"}, "model");
            cfg.model.name = jm.value("name", cfg.model.name);
            cfg.model.dim = jm.value("dim", cfg.model.dim);
            if (jm.contains("diag"))
                cfg.model.diag = to_vec(jm.at("diag"), "model.diag");
        }
        if (j.contains("v0")) cfg.v0 = parse_data(j.at("v0"), "v0");
        if (j.contains("v0_b")) {
            cfg.v0_b = parse_data(j.at("v0_b"), "v0_b");
            cfg.has_v0_b = true;
        }
        if (j.contains("domain")) cfg.domain = parse_domain(j.at("domain"));
        cfg.T = j.value("T", cfg.T);
        cfg.h = j.value("h", cfg.h);
        cfg.r_override = j.value("r", cfg.r_override);
        cfg.R_override = j.value("R", cfg.R_override);
        if (j.contains("dx")) cfg.dx = to_vec(j.at("dx"), "dx");
        cfg.lambda_safety = j.value("lambda_safety", cfg.lambda_safety);
        if (j.contains("init_mode")) {
            const std::string mode = j.at("init_mode").get<std::string>();
            if (mode == "pointwise")
                cfg.init_mode = InitMode::Pointwise;
            else if (mode == "cell_average")
                cfg.init_mode = InitMode::CellAverage;
            else
                throw ConfigError("config: init_mode must be \"pointwise\" "
                                  "or \"cell_average\", got \"" +
                                  mode + "\"");
        }
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("budgets"))
            cfg.budgets = parse_budgets(j.at("budgets"));
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ProblemConfig load_config(const std::string& path) {
    std::ifstream file(path);
    if (!file)
        throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << file.rdbuf();
    return parse_config(buf.str());
}

void write_layers_csv(const std::string& path, const SolveResult& result) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);

    const Lattice& lat = result.lattice();
    const int d = lat.dim();

    out << "# dx=" << fmt(lat.dx()) << " dt=" << fmt(lat.dt())
        << " lambda=" << fmt(lat.lambda()) << " d=" << d
        << " model=" << result.model().name() << "\n";
    out << "k";
    for (int j = 1; j <= d; ++j) out << ",m" << j;
    out << ",v";
    for (int j = 1; j <= d; ++j) out << ",dv" << j;
    out << "\n";

    std::vector<std::int64_t> m(static_cast<std::size_t>(d));
    for (const Layer& layer : result.layers()) {
        const IndexBox& box = layer.box;
        const std::int64_t n = box.size();
        for (std::int64_t idx = 0; idx < n; ++idx) {
            box.unflatten(idx, m);
            if (lat.is_value_node(m, layer.level)) {
                out << layer.level;
                for (int j = 0; j < d; ++j) out << "," << m[j];
                out << "," << fmt(layer.values[idx]);
                for (int j = 0; j < d; ++j) out << ",";
                out << "\n";
            } else if (centered_diff_in_storage(lat, box, m)) {
                const Vec g = result.gradient_at(m, layer.level);
                out << layer.level;
                for (int j = 0; j < d; ++j) out << "," << m[j];
                out << ",";
                for (int j = 0; j < d; ++j) out << "," << fmt(g[j]);
                out << "\n";
            }
        }
    }
}

void write_solve_metadata(const std::string& path, const ProblemConfig& cfg,
                          const SolveResult& result) {
    const Lattice& lat = result.lattice();
    const SchemeConstants& c = result.constants();

    json j;
    j["model"] = {{"name", result.model().name()}, {"dim", lat.dim()}};
    j["initial_data"] = cfg.v0.name;
    j["grid"] = {{"dx", lat.dx()},
                 {"dt", lat.dt()},
                 {"lambda", lat.lambda()},
                 {"horizon_steps", lat.horizon_steps()},
                 {"periodic", lat.is_periodic()}};
    j["constants"] = {{"r", c.r},
                      {"R", c.R},
                      {"T", c.T},
                      {"h", c.h},
                      {"alpha1", c.alpha1},
                      {"alpha2", c.alpha2},
                      {"lambda1", c.lambda1},
                      {"theta", c.theta},
                      {"deriv_bound", c.deriv_bound}};
    j["init_mode"] =
        result.init_mode() == InitMode::Pointwise ? "pointwise" : "cell_average";
    j["max_grad_inf"] = result.max_grad_inf();
    j["update_residual"] = result.residual_max();

    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << j.dump(2) << "\n";
}

void write_walk_csv(const std::string& path,
                    const CharacteristicExtraction& extraction,
                    const Lattice& lat) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);

    const int d = lat.dim();
    out << "path_id,level,t";
    for (int j = 1; j <= d; ++j) out << ",x" << j;
    for (int j = 1; j <= d; ++j) out << ",eta" << j;
    out << ",density\n";

    const PiecewisePath& mean = extraction.mean;
    for (std::size_t l = 0; l < mean.points.size(); ++l) {
        out << -1 << "," << l << ","
            << fmt(mean.t0 + mean.dt * static_cast<double>(l));
        for (int j = 0; j < d; ++j) out << "," << fmt(mean.points[l][j]);
        for (int j = 0; j < d; ++j) out << ",";
        out << ",1\n";
    }

    const WalkEnsemble& ens = extraction.ensemble;
    for (std::size_t i = 0; i < ens.paths.size(); ++i) {
        const WalkPath& p = ens.paths[i];
        for (int level = ens.bottom; level <= ens.apex.level; ++level) {
            const auto node = ens.node(p, level);
            const auto eta = ens.eta_at(p, level);
            out << i << "," << level << "," << fmt(lat.time(level));
            for (int j = 0; j < d; ++j) out << "," << fmt(lat.coord(node[j]));
            for (int j = 0; j < d; ++j) out << "," << fmt(eta[j]);
            out << "," << fmt(p.density) << "\n";
        }
    }
}

void write_convergence_csv(const std::string& path,
                           const ConvergenceReport& report) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);

    out << "# lambda=" << fmt(report.lambda)
        << " rate=" << fmt(report.rate)
        << " exact=" << (report.exact ? 1 : 0) << "\n";
    out << "dx,dt,sup_error,grad_l1_total,grad_skipped,max_grad_inf,"
           "wall_seconds\n";
    for (const ConvergenceRow& row : report.rows) {
        double total = 0.0;
        for (double g : row.grad_l1) total += g;
        out << fmt(row.dx) << "," << fmt(row.dt) << "," << fmt(row.sup_error)
            << "," << fmt(total) << "," << row.grad_skipped << ","
            << fmt(row.max_grad_inf) << "," << fmt(row.wall_seconds) << "\n";
    }
}

void write_convergence_json(const std::string& path,
                            const ConvergenceReport& report) {
    json j;
    j["lambda"] = report.lambda;
    j["rate"] = report.rate;
    j["beta_hat"] = report.beta_hat;
    j["rate_fitted"] = report.rate_fitted;
    j["exact"] = report.exact;
    j["k_lo"] = report.k_lo;
    j["k_hi"] = report.k_hi;
    j["queries_per_axis"] = report.queries_per_axis;
    j["time_slices"] = report.time_slices;
    j["rows"] = json::array();
    for (const ConvergenceRow& row : report.rows) {
        json r;
        r["dx"] = row.dx;
        r["dt"] = row.dt;
        r["lambda"] = row.lambda;
        r["sup_error"] = row.sup_error;
        r["grad_l1"] = row.grad_l1;
        r["grad_skipped"] = row.grad_skipped;
        r["max_grad_inf"] = row.max_grad_inf;
        r["wall_seconds"] = row.wall_seconds;
        j["rows"].push_back(std::move(r));
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << j.dump(2) << "\n";
}

} // namespace hj
