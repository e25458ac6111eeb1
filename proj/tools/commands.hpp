#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <nnk/nnk.hpp>

namespace nnk::cli {

using json = nlohmann::ordered_json;
using Cell = std::variant<double, long long, std::string>;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;
};

struct RunConfig {
    std::string subcommand;
    std::string activation = "relu";
    double lrelu_slope = 0.2;
    int depth = 0;  // 0: per-command default
    std::optional<double> sigma_w2;
    double sigma_b2 = 0.0;
    double noise_var = 0.1;
    std::vector<double> norm;
    std::string dataset;
    std::string target_col = "-1";
    bool no_header = false;
    std::uint64_t seed = 0;
    std::string out = "-";
    std::string format = "csv";
    bool self_check = false;

    // kernel-eval / mc-verify
    std::vector<double> theta0;
    int n_theta = 32;
    int width = 3000;
    int seeds = 1;
    // fixedpoint
    int grid = 512;
    // gp-fit / benchmark
    double train_frac = 0.8;
    int splits = 5;
    double sw2_min = 0.1, sw2_max = 5.0, sw2_step = 0.1;
    std::string metric = "test_rmse";
    bool tie_bias = true;
    bool raw = false;
    // simplicity
    std::string function = "sin";
    std::vector<std::string> activations{"gelu", "relu"};
    int reps = 10;
    int n_train = 20;
    int n_test = 100;
};

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string cell_text(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

inline std::string render(const Table& t, const std::string& format) {
    std::ostringstream os;
    if (format == "csv") {
        for (std::size_t j = 0; j < t.header.size(); ++j) os << (j ? "," : "") << t.header[j];
        os << "\n";
        for (const auto& r : t.rows) {
            for (std::size_t j = 0; j < r.size(); ++j) os << (j ? "," : "") << cell_text(r[j]);
            os << "\n";
        }
        return os.str();
    }
    json arr = json::array();
    for (const auto& r : t.rows) {
        json o = json::object();
        for (std::size_t j = 0; j < r.size(); ++j) std::visit([&](const auto& v) { o[t.header[j]] = v; }, r[j]);
        arr.push_back(o);
    }
    return arr.dump(1) + "\n";
}

// Re-parses emitted output and checks it against the table schema.
inline void self_check(const std::string& text, const Table& t, const std::string& format) {
    auto fail = [](const std::string& m) { throw ParseError("self-check: " + m); };
    if (format == "csv") {
        std::istringstream in(text);
        std::string line;
        std::getline(in, line);
        std::string expect;
        for (std::size_t j = 0; j < t.header.size(); ++j) expect += (j ? "," : "") + t.header[j];
        if (line != expect) fail("header mismatch");
        std::size_t n = 0;
        while (std::getline(in, line)) {
            const auto f = nnk::detail::split_csv_line(line, n + 2);
            if (f.size() != t.header.size()) fail("row " + std::to_string(n + 1) + " has wrong field count");
            for (std::size_t j = 0; j < f.size(); ++j) {
                if (std::holds_alternative<std::string>(t.rows[n][j])) continue;
                std::size_t used = 0;
                try {
                    std::stod(f[j], &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != f[j].size()) fail("row " + std::to_string(n + 1) + " column '" + t.header[j] + "' not numeric");
            }
            ++n;
        }
        if (n != t.rows.size()) fail("row count mismatch");
        return;
    }
    const json j = json::parse(text);
    if (!j.is_array() || j.size() != t.rows.size()) fail("expected an array of " + std::to_string(t.rows.size()) + " rows");
    for (const auto& o : j)
        for (const auto& h : t.header)
            if (!o.contains(h)) fail("missing key '" + h + "'");
}

struct Output {
    Table table;
    json summary = json::object();
};

inline Activation make_activation(const RunConfig& c) {
    Activation a = parse_activation(c.activation);
    if (a.kind == ActKind::LReLU) a = Activation::lrelu(c.lrelu_slope);
    return a;
}

inline double default_sigma_w2(const RunConfig& c, const Activation& act, double norm) {
    if (c.sigma_w2) return *c.sigma_w2;
    const double s = sigma_star(act, norm);
    return s * s;
}

inline std::vector<double> theta_grid(const RunConfig& c, bool include_zero) {
    if (!c.theta0.empty()) return c.theta0;
    std::vector<double> t;
    if (include_zero) t.push_back(0.0);
    for (int i = 0; i < c.n_theta; ++i) t.push_back(std::numbers::pi * (i + 0.5) / c.n_theta);
    return t;
}

inline std::vector<double> norms_or(const RunConfig& c, std::vector<double> dflt) {
    return c.norm.empty() ? dflt : c.norm;
}

inline Dataset load_dataset(const RunConfig& c) {
    if (c.dataset.empty()) throw DomainError("--dataset is required");
    if (c.dataset.rfind("disc:", 0) == 0) {
        // disc:<function>:<N>
        const auto rest = c.dataset.substr(5);
        const auto colon = rest.find(':');
        const std::string f = rest.substr(0, colon);
        const int n = colon == std::string::npos ? 100 : std::stoi(rest.substr(colon + 1));
        return disc_task(f, n, c.noise_var, c.seed);
    }
    if (c.dataset.size() > 5 && c.dataset.substr(c.dataset.size() - 5) == ".json") {
        std::ifstream in(c.dataset);
        if (!in) throw ParseError("cannot open manifest '" + c.dataset + "'");
        const json m = json::parse(in);
        for (const char* key : {"name", "path", "target_column"})
            if (!m.contains(key)) throw ParseError(std::string("manifest missing '") + key + "'");
        const std::string tc =
            m["target_column"].is_string() ? m["target_column"].get<std::string>() : std::to_string(m["target_column"].get<long>());
        Dataset ds = load_csv(m["path"].get<std::string>(), tc, !c.no_header);
        if (m.contains("n") && m["n"].get<long>() != ds.n())
            throw ParseError("manifest n = " + std::to_string(m["n"].get<long>()) + " but file has " + std::to_string(ds.n()));
        if (m.contains("d") && m["d"].get<long>() != ds.d())
            throw ParseError("manifest d = " + std::to_string(m["d"].get<long>()) + " but file has " + std::to_string(ds.d()));
        ds.provenance = m["name"].get<std::string>();
        return ds;
    }
    return load_csv(c.dataset, c.target_col, !c.no_header);
}

inline json manifest_of(const Dataset& ds, const RunConfig& c) {
    return json{{"name", ds.provenance}, {"path", c.dataset}, {"target_column", ds.target_name}, {"n", ds.n()}, {"d", ds.d()}};
}

inline Output cmd_kernel_eval(const RunConfig& c) {
    const Activation act = make_activation(c);
    const int L = c.depth > 0 ? c.depth : 8;
    Output o;
    o.table.header = {"theta0", "layer", "s1_sq", "s2_sq", "rho", "k", "kdot", "T"};
    for (double norm : norms_or(c, {1.0})) {
        const double sw2 = default_sigma_w2(c, act, norm);
        const auto hyper = NetworkHyper::shared(L, sw2, c.sigma_b2);
        for (double th : theta_grid(c, true)) {
            NtkState st;
            {
                const LayerState s0 = angle_state(th, norm, sw2, c.sigma_b2);
                st = {s0.s1_sq, s0.s2_sq, s0.k(), 0.0, 0.5};
            }
            for (int l = 1; l <= L; ++l) {
                double kd = 0.0;
                st = ntk_iterate(act, st, sw2, c.sigma_b2, &kd);
                const double rho = std::clamp(st.k / std::sqrt(st.s1_sq * st.s2_sq), -1.0, 1.0);
                o.table.rows.push_back({th, static_cast<long long>(l), st.s1_sq, st.s2_sq, rho, st.k, kd, st.T});
            }
        }
        o.summary["runs"].push_back({{"norm", norm}, {"sigma_w2", sw2}, {"sigma_b2", c.sigma_b2}, {"depth", L}});
    }
    o.summary["activation"] = to_string(act);
    return o;
}

inline Output cmd_mc_verify(const RunConfig& c) {
    const Activation act = make_activation(c);
    const int L = c.depth > 0 ? c.depth : 4;
    Output o;
    o.table.header = {"theta0", "layer", "empirical_rho", "analytic_rho", "seed"};
    std::size_t within = 0, total = 0;
    for (double norm : norms_or(c, {1.0})) {
        const double sw2 = default_sigma_w2(c, act, norm);
        const auto thetas = theta_grid(c, false);
        std::vector<std::vector<double>> analytic;
        for (double th : thetas) analytic.push_back(deep_normalized_kernel(act, th, norm, NetworkHyper::shared(L, sw2, c.sigma_b2)));
        for (int s = 0; s < c.seeds; ++s) {
            const std::uint64_t seed = c.seed + s;
            const auto E = empirical_normalized_kernels(act, thetas, norm, c.width, L, sw2, c.sigma_b2, seed);
            for (std::size_t t = 0; t < thetas.size(); ++t)
                for (int l = 0; l < L; ++l) {
                    o.table.rows.push_back({thetas[t], static_cast<long long>(l + 1), E(t, l), analytic[t][l],
                                            static_cast<long long>(seed)});
                    within += std::abs(E(t, l) - analytic[t][l]) <= 0.02;
                    ++total;
                }
        }
    }
    o.summary = {{"activation", to_string(act)}, {"width", c.width}, {"depth", L}, {"points", total},
                 {"fraction_within_0.02", total ? static_cast<double>(within) / total : 0.0}};
    return o;
}

inline Output cmd_fixedpoint(const RunConfig& c) {
    const Activation act = make_activation(c);
    Output o;
    o.table.header = {"theta", "lambda3", "activation", "norm", "sigma"};
    o.summary["activation"] = to_string(act);
    o.summary["results"] = json::array();
    for (double norm : norms_or(c, {0.5, 1.0, 5.0})) {
        const double sigma = c.sigma_w2 ? std::sqrt(*c.sigma_w2) : sigma_star(act, norm);
        double sup = -1e300;
        for (const auto& [th, v] : lambda3_sweep(act, norm, sigma, c.grid)) {
            o.table.rows.push_back({th, v, to_string(act), norm, sigma});
            sup = std::max(sup, v);
        }
        const double s_sq = sigma * sigma * norm * norm;
        const auto rep = find_fixed_point(act, sigma * sigma, c.sigma_b2, {s_sq, s_sq, 0.0}, 1e-10, 10000, c.grid);
        o.summary["results"].push_back({{"norm", norm},
                                        {"sigma", sigma},
                                        {"sup_lambda3_sweep", sup},
                                        {"sup_lambda3", rep.sup_lambda3},
                                        {"converged", rep.converged},
                                        {"iterations", rep.iterations},
                                        {"final_rho", rep.final_state.rho},
                                        {"verdict", to_string(rep.verdict)}});
    }
    return o;
}

inline Output cmd_norm_preserve(const RunConfig& c) {
    const Activation act = make_activation(c);
    Output o;
    o.table.header = {"activation", "norm", "sigma_star", "sigma_w2"};
    std::vector<double> dflt;
    for (int i = 1; i <= 20; ++i) dflt.push_back(0.25 * i);
    for (double norm : norms_or(c, dflt)) {
        const double s = sigma_star(act, norm);
        o.table.rows.push_back({to_string(act), norm, s, s * s});
    }
    o.summary["activation"] = to_string(act);
    return o;
}

inline Table grid_table(const std::vector<GridRow>& rows) {
    Table t;
    t.header = {"activation", "depth", "sigma_w2", "sigma_b2", "noise_var", "split_id", "train_rmse", "test_rmse", "nll"};
    for (const auto& r : rows)
        t.rows.push_back({r.activation, static_cast<long long>(r.depth), r.sigma_w2, r.sigma_b2, r.noise_var,
                          static_cast<long long>(r.split_id), r.train_rmse, r.test_rmse, r.nll});
    return t;
}

inline Output cmd_gp_fit(const RunConfig& c) {
    const Activation act = make_activation(c);
    Dataset ds = load_dataset(c);
    if (!c.raw) ds = standardize(ds);
    const int L = c.depth > 0 ? c.depth : 1;
    const double sw2 = default_sigma_w2(c, act, 1.0);
    GridOptions opt;
    opt.n_splits = 1;
    opt.train_frac = c.train_frac;
    opt.seed = c.seed;
    opt.sigma_b2 = c.sigma_b2;
    const auto res = grid_search(ds, act, {L}, {sw2}, c.noise_var, Metric::TestRmse, opt);
    Output o;
    o.table = grid_table(res.rows);
    o.summary = {{"dataset", manifest_of(ds, c)}, {"standardized", !c.raw}};
    return o;
}

inline Output cmd_benchmark(const RunConfig& c) {
    const Activation act = make_activation(c);
    Dataset ds = load_dataset(c);
    if (!c.raw) ds = standardize(ds);
    const int Lmax = c.depth > 0 ? c.depth : 32;
    std::vector<int> depths;
    for (int l = 1; l <= Lmax; ++l) depths.push_back(l);
    std::vector<double> ws;
    for (int i = 0;; ++i) {
        const double w = c.sw2_min + i * c.sw2_step;
        if (w > c.sw2_max + 1e-9) break;
        ws.push_back(std::round(w * 1e10) / 1e10);
    }
    GridOptions opt;
    opt.n_splits = c.splits;
    opt.train_frac = c.train_frac;
    opt.seed = c.seed;
    if (!c.tie_bias) opt.sigma_b2 = c.sigma_b2;
    const auto res = grid_search(ds, act, depths, ws, c.noise_var, parse_metric(c.metric), opt);
    std::vector<GridRow> all = res.rows;
    all.insert(all.end(), res.ranked.begin(), res.ranked.end());
    Output o;
    o.table = grid_table(all);
    const auto& b = res.ranked.front();
    o.summary = {{"dataset", manifest_of(ds, c)},
                 {"metric", c.metric},
                 {"best", {{"depth", b.depth}, {"sigma_w2", b.sigma_w2}, {"sigma_b2", b.sigma_b2},
                           {"train_rmse", b.train_rmse}, {"test_rmse", b.test_rmse}, {"nll", b.nll}}}};
    return o;
}

inline Output cmd_simplicity(const RunConfig& c) {
    const int L = c.depth > 0 ? c.depth : 100;
    Output o;
    o.table.header = {"activation", "depth", "rep", "train_mse", "test_mse", "const_mse"};
    SweepOptions opt;
    opt.function = c.function;
    opt.n_train = c.n_train;
    opt.n_test = c.n_test;
    opt.reps = c.reps;
    opt.noise_var = c.noise_var;
    opt.sigma_b2 = c.sigma_b2;
    opt.seed = c.seed;
    for (const auto& name : c.activations) {
        RunConfig ci = c;
        ci.activation = name;
        const Activation act = make_activation(ci);
        const double sw2 = default_sigma_w2(c, act, 1.0);
        const auto rows = disc_depth_sweep(act, sw2, L, opt);
        std::vector<double> tr(L, 0.0), te(L, 0.0);
        double cm = 0.0;
        for (const auto& r : rows) {
            o.table.rows.push_back({r.activation, static_cast<long long>(r.depth), static_cast<long long>(r.rep),
                                    r.train_mse, r.test_mse, r.const_mse});
            tr[r.depth - 1] += r.train_mse / c.reps;
            te[r.depth - 1] += r.test_mse / c.reps;
            if (r.depth == 1) cm += r.const_mse / c.reps;
        }
        json by_depth = json::object();
        for (int l : {1, 4, 16, 32, 64, 100})
            if (l <= L) by_depth[std::to_string(l)] = {{"train_mse", tr[l - 1]}, {"test_mse", te[l - 1]}};
        o.summary[name] = {{"sigma_w2", sw2}, {"const_mse", cm}, {"mean_mse", by_depth}};
    }
    o.summary["function"] = c.function;
    return o;
}

inline Output dispatch(const RunConfig& c) {
    if (c.format != "csv" && c.format != "json") throw DomainError("--format must be csv or json");
    if (c.subcommand == "kernel-eval") return cmd_kernel_eval(c);
    if (c.subcommand == "mc-verify") return cmd_mc_verify(c);
    if (c.subcommand == "fixedpoint") return cmd_fixedpoint(c);
    if (c.subcommand == "norm-preserve") return cmd_norm_preserve(c);
    if (c.subcommand == "gp-fit") return cmd_gp_fit(c);
    if (c.subcommand == "benchmark") return cmd_benchmark(c);
    if (c.subcommand == "simplicity") return cmd_simplicity(c);
    throw DomainError("unknown subcommand '" + c.subcommand + "'");
}

inline std::string error_json(const std::string& type, const std::string& msg) {
    return json{{"error", {{"type", type}, {"message", msg}}}}.dump();
}

/// Parses argv, runs the subcommand and writes outputs. Returns the exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunConfig c;
    CLI::App app{"Neural network kernel toolkit"};
    app.set_config("--config", "", "TOML/INI config file (command-line flags take precedence)");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    auto common = [&](CLI::App* s) {
        s->add_option("--activation", c.activation, "gelu|elu|selu|relu|lrelu|erf")->capture_default_str();
        s->add_option("--lrelu-slope", c.lrelu_slope, "Leaky ReLU slope")->capture_default_str();
        s->add_option("--depth", c.depth, "Depth (maximum depth for sweeps)");
        s->add_option("--sigma-w2", c.sigma_w2, "Weight variance (default: norm-preserving value)");
        s->add_option("--sigma-b2", c.sigma_b2, "Bias variance")->capture_default_str();
        s->add_option("--noise-var", c.noise_var, "GP noise variance")->capture_default_str();
        s->add_option("--norm", c.norm, "Input norm(s)");
        s->add_option("--dataset", c.dataset, "CSV path, manifest .json, or disc:<f>:<N>");
        s->add_option("--target-col", c.target_col, "Target column name or index")->capture_default_str();
        s->add_flag("--no-header", c.no_header, "CSV has no header row");
        s->add_option("--seed", c.seed, "Random seed")->capture_default_str();
        s->add_option("--out", c.out, "Output file ('-' for stdout)")->capture_default_str();
        s->add_option("--format", c.format, "csv|json")->capture_default_str();
        s->add_flag("--self-check", c.self_check, "Re-parse the emitted file against its schema");
    };
    auto sub = [&](const char* name, const char* desc) {
        auto* s = app.add_subcommand(name, desc);
        common(s);
        s->callback([&c, name] { c.subcommand = name; });
        return s;
    };

    auto* ke = sub("kernel-eval", "k, kdot and cos theta trajectories over depth");
    ke->add_option("--theta0", c.theta0, "Input angles (default: 0 and a 32-point grid)");
    ke->add_option("--n-theta", c.n_theta)->capture_default_str();

    auto* mc = sub("mc-verify", "finite-width empirical vs analytic normalized kernels");
    mc->add_option("--theta0", c.theta0, "Input angles (default: 32-point grid)");
    mc->add_option("--n-theta", c.n_theta)->capture_default_str();
    mc->add_option("--width", c.width, "Hidden width")->capture_default_str();
    mc->add_option("--seeds", c.seeds, "Number of sampled networks")->capture_default_str();

    auto* fp = sub("fixedpoint", "lambda3 sweeps and contraction verdicts at sigma*");
    fp->add_option("--grid", c.grid, "Interior theta grid size")->capture_default_str();

    sub("norm-preserve", "norm-preserving sigma* against input norm");

    auto* gp = sub("gp-fit", "GP fit/predict/NLL on one train/test split");
    gp->add_option("--train-frac", c.train_frac)->capture_default_str();
    gp->add_flag("--raw", c.raw, "Skip standardization");

    auto* bm = sub("benchmark", "depth x sigma_w2 grid search over seeded splits");
    bm->add_option("--train-frac", c.train_frac)->capture_default_str();
    bm->add_option("--splits", c.splits)->capture_default_str();
    bm->add_option("--sw2-min", c.sw2_min)->capture_default_str();
    bm->add_option("--sw2-max", c.sw2_max)->capture_default_str();
    bm->add_option("--sw2-step", c.sw2_step)->capture_default_str();
    bm->add_option("--metric", c.metric, "test_rmse|train_rmse|nll")->capture_default_str();
    bm->add_flag("!--fixed-bias", c.tie_bias, "Use --sigma-b2 instead of sigma_b2 = sigma_w2");
    bm->add_flag("--raw", c.raw, "Skip standardization");

    auto* sp = sub("simplicity", "disc-task depth sweep of train/test MSE");
    sp->add_option("--function", c.function, "sin|saw|cubic|sinc|expabs|tan")->capture_default_str();
    sp->add_option("--activations", c.activations)->delimiter(',')->capture_default_str();
    sp->add_option("--reps", c.reps)->capture_default_str();
    sp->add_option("--n-train", c.n_train)->capture_default_str();
    sp->add_option("--n-test", c.n_test)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << error_json("UsageError", e.what()) << "\n";
        return 1;
    }

    try {
        const Output o = dispatch(c);
        const std::string text = render(o.table, c.format);
        if (c.self_check) self_check(text, o.table, c.format);
        if (c.out == "-") {
            out << text;
        } else {
            std::ofstream f(c.out, std::ios::binary);
            if (!f) throw ParseError("cannot write '" + c.out + "'");
            f << text;
            if (!f) throw ParseError("write failed for '" + c.out + "'");
            json s = o.summary;
            s["subcommand"] = c.subcommand;
            s["out"] = c.out;
            s["rows"] = o.table.rows.size();
            out << s.dump(1) << "\n";
        }
    } catch (const DomainError& e) {
        err << error_json("DomainError", e.what()) << "\n";
        return 1;
    } catch (const NumericError& e) {
        err << error_json("NumericError", e.what()) << "\n";
        return 1;
    } catch (const ParseError& e) {
        err << error_json("ParseError", e.what()) << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << error_json("Error", e.what()) << "\n";
        return 1;
    }
    return 0;
}

}  // namespace nnk::cli
