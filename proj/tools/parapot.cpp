#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "parapot/io.hpp"

namespace {

using namespace parapot;
using parapot::io::json;

std::string out_path(const std::string& out_dir, const std::string& name) {
    if (out_dir.empty()) return name;
    std::filesystem::create_directories(out_dir);
    return (std::filesystem::path(out_dir) / name).string();
}

json parse_config(const std::string& path, std::string& raw) {
    raw = io::read_file(path);
    return json::parse(raw);
}

SpaceTimeGrid parse_grid_arg(const std::string& arg, const Domain& dom) {
    std::vector<int> parts;
    std::string cur;
    for (char c : arg) {
        if (c == 'x') {
            parts.push_back(std::stoi(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(std::stoi(cur));
    if (static_cast<int>(parts.size()) != dom.dim() + 1)
        throw std::invalid_argument("--grid must have N spatial extents plus a time extent");
    int nt = parts.back();
    parts.pop_back();
    return SpaceTimeGrid::make(dom.bounding_box(), dom.T, parts, nt);
}

int run_constants(const std::string& inputs, const std::string& out, const std::string& out_dir) {
    std::string raw;
    json j = parse_config(inputs, raw);
    ConstantsInputs in;
    in.N = j.value("N", 2);
    in.alpha = j.value("alpha", 1.0);
    in.beta = j.value("beta", 0.0);
    in.q = j.value("q", 1.0);
    in.ell = j.value("ell", 1);
    in.a = j.value("a", 1.0);
    in.delta = j.value("delta", 1.0);
    if (j.contains("domain"))
        in.d = io::load_domain(j.at("domain")).d();
    else
        in.d = j.value("d", 1.0);
    ConstantsTable table = make_constants_table(in);
    io::write_constants_csv(out_path(out_dir, out), table, io::config_hash(raw));
    std::cout << "constants: " << table.names().size() << " entries -> " << out << "\n";
    return 0;
}

int run_potential(const std::string& kind, const std::string& measure_path,
                  const std::string& params_path, const std::string& grid_arg,
                  const std::string& out, const std::string& out_dir, int workers) {
    std::string raw_m, raw_p;
    json jm = parse_config(measure_path, raw_m);
    json jp = parse_config(params_path, raw_p);
    Domain dom = io::load_domain(jp.at("domain"));
    PotentialParams params = io::load_potential_params(jp, dom);
    SpaceTimeGrid grid = parse_grid_arg(grid_arg, dom);

    PotentialField field;
    if (kind == "wolff") {
        SpaceTimeMeasure mu = io::load_spacetime_measure(jm);
        field = wolff_field(mu.is_nonnegative() ? mu : mu.positive_part(), grid, params, workers);
    } else if (kind == "max1") {
        SpatialMeasure om = io::load_spatial_measure(jm);
        field = max1_field(om.is_nonnegative() ? om : om.positive_part(), grid, params, workers);
    } else if (kind == "max2") {
        SpaceTimeMeasure mu = io::load_spacetime_measure(jm);
        field = max2_field(mu.is_nonnegative() ? mu : mu.positive_part(), grid, params, workers);
    } else {
        throw std::invalid_argument("--kind must be wolff, max1 or max2");
    }
    ConstantsInputs ci;
    ci.N = dom.dim();
    ci.alpha = std::max(params.alpha, 1.0);
    ci.beta = params.beta;
    ci.d = dom.d();
    ConstantsTable table = make_constants_table(ci);
    io::write_field_csv(out_path(out_dir, out), field,
                        io::artifact_header(io::config_hash(raw_m + raw_p), table));
    std::cout << "potential " << kind << ": " << field.values.size() << " nodes -> " << out
              << "\n";
    return 0;
}

int run_green(const std::string& config_path, const std::string& probe_path,
              const std::string& out, const std::string& out_dir) {
    std::string raw_c;
    json jc = parse_config(config_path, raw_c);
    Domain dom = io::load_domain(jc.at("domain"));
    GreenConfig cfg = jc.contains("green") ? io::load_green_config(jc.at("green")) : GreenConfig{};
    if (dom.kind != Domain::Kind::box)
        throw std::invalid_argument("green: only box domains are supported");

    std::string probes = io::read_file(probe_path);
    std::ostringstream result;
    result << "# config_hash=" << io::config_hash(raw_c + probes) << "\n";
    int N = dom.dim();
    for (int a = 0; a < N; ++a) result << 'x' << (a + 1) << ',';
    result << "t,";
    for (int a = 0; a < N; ++a) result << 'y' << (a + 1) << ',';
    result << "value\n";

    std::istringstream lines(probes);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 'x') continue;
        std::vector<double> vals;
        std::string cell;
        std::istringstream cells(line);
        while (std::getline(cells, cell, ',')) vals.push_back(std::stod(cell));
        if (static_cast<int>(vals.size()) != 2 * N + 1)
            throw std::invalid_argument("green probe rows need x1..xN,t,y1..yN");
        Point x(vals.begin(), vals.begin() + N);
        double t = vals[N];
        Point y(vals.begin() + N + 1, vals.end());
        double g = green_box(dom.box, x, t, y, cfg);
        for (double v : vals) result << io::format17(v) << ',';
        result << io::format17(g) << "\n";
    }
    io::write_file(out_path(out_dir, out), result.str());
    std::cout << "green: probes evaluated -> " << out << "\n";
    return 0;
}

int run_solve(const std::string& spec_path, const std::string& out, const std::string& report,
              const std::string& out_dir, int workers) {
    std::string raw;
    json j = parse_config(spec_path, raw);
    ProblemSpec spec = io::load_problem_spec(j);
    spec.scheme.workers = workers;
    Solution sol = solve(spec);

    ConstantsTable table = make_constants_table(spec.constants_inputs());
    std::string hash = io::config_hash(raw);
    io::write_field_csv(out_path(out_dir, out), sol.u, io::artifact_header(hash, table));
    json rep = io::solution_to_json(sol);
    rep["config_hash"] = hash;
    rep["constants"] = io::constants_to_json(table);
    io::write_file(out_path(out_dir, report), rep.dump(2) + "\n");
    std::cout << "solve: status " << to_string(sol.status) << " -> " << out << ", " << report
              << "\n";
    return sol.status == SolveStatus::ok ? 0 : 1;
}

int run_verify(const std::string& check, const std::string& spec_path, const std::string& out,
               const std::string& out_dir, int workers) {
    std::string raw;
    json j = parse_config(spec_path, raw);
    Domain dom = io::load_domain(j.at("domain"));
    double d = dom.d();
    CheckReport rep;

    if (check == "levelset") {
        SpaceTimeMeasure mu = io::load_spacetime_measure(j.at("mu"));
        LevelsetOptions opt;
        opt.beta = j.value("beta", 0.0);
        opt.d = d;
        opt.R = j.value("R", 2 * d);
        opt.center_x = j.at("center_x").get<std::vector<double>>();
        opt.center_t = j.value("center_t", 0.0);
        opt.r = j.at("r").get<double>();
        opt.lambda_ladder = j.at("lambda_ladder").get<std::vector<double>>();
        opt.eps_ladder = j.at("eps_ladder").get<std::vector<double>>();
        opt.cells_per_axis = j.value("cells_per_axis", opt.cells_per_axis);
        opt.time_cells = j.value("time_cells", opt.time_cells);
        opt.workers = workers;
        rep = check_levelset_decay(mu, opt);
    } else if (check == "double") {
        SpaceTimeMeasure mu = io::load_spacetime_measure(j.at("mu"));
        DoubleAvgOptions opt;
        opt.beta = j.value("beta", 0.0);
        opt.d = d;
        opt.R = j.value("R", 2 * d);
        opt.r = j.at("r").get<double>();
        opt.r_prime = j.value("r_prime", opt.r);
        opt.center_x = j.at("center_x").get<std::vector<double>>();
        opt.center_t = j.value("center_t", 0.0);
        opt.delta_ladder = j.at("delta_ladder").get<std::vector<double>>();
        opt.workers = workers;
        rep = check_double_average(mu, opt);
    } else if (check == "hexp") {
        SpaceTimeMeasure mu = io::load_spacetime_measure(j.at("mu"));
        HexpOptions opt;
        opt.beta = j.value("beta", 0.0);
        opt.d = d;
        opt.R = j.value("R", 2 * d);
        opt.r_ladder = j.at("r_ladder").get<std::vector<double>>();
        for (const auto& c : j.at("centers")) {
            opt.centers_x.push_back(c.at("x").get<std::vector<double>>());
            opt.centers_t.push_back(c.at("t").get<double>());
        }
        opt.workers = workers;
        rep = check_hexp(mu, opt);
    } else if (check == "initexp") {
        SpatialMeasure om = io::load_spatial_measure(j.at("omega"));
        InitExpOptions opt;
        opt.alpha = j.value("alpha", 1.0);
        opt.delta = j.value("delta", 1.0);
        opt.d = d;
        opt.probe_box = dom.bounding_box();
        opt.probes_per_axis = j.value("probes_per_axis", opt.probes_per_axis);
        opt.t_ladder = j.at("t_ladder").get<std::vector<double>>();
        opt.workers = workers;
        rep = check_initial_exp_bound(om, opt);
    } else if (check == "wolffdom") {
        SpaceTimeMeasure mu = io::load_spacetime_measure(j.at("mu"));
        std::vector<int> nx = j.at("nx").get<std::vector<int>>();
        SpaceTimeGrid grid = SpaceTimeGrid::make(dom.bounding_box(), dom.T, nx,
                                                 j.at("nt").get<int>());
        WolffDomOptions opt;
        opt.beta = j.value("beta", 0.0);
        opt.workers = workers;
        rep = check_wolff_domination(mu, grid, opt);
    } else {
        throw std::invalid_argument(
            "--check must be levelset, double, hexp, initexp or wolffdom");
    }

    json out_json = io::report_to_json(rep);
    out_json["config_hash"] = io::config_hash(raw);
    io::write_file(out_path(out_dir, out), out_json.dump(2) + "\n");
    std::cout << "verify " << check << ": " << to_string(rep.verdict) << " -> " << out << "\n";
    return rep.verdict == Verdict::FAIL ? 1 : 0;
}

int run_bench(int atoms, const std::string& grid_arg, int workers, std::uint64_t seed) {
    Box b;
    b.lo = {0, 0};
    b.hi = {1, 1};
    Domain dom = Domain::make_box(b, 0.5);
    SpaceTimeGrid grid = parse_grid_arg(grid_arg, dom);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(0, 1), ut(0, 0.5), uw(0.1, 1.0);
    SpaceTimeMeasure mu(2);
    for (int i = 0; i < atoms; ++i) mu.add_atom({ux(rng), ux(rng)}, ut(rng), uw(rng));

    PotentialParams p;
    p.d = dom.d();
    p.R = 2 * p.d;

    auto t0 = std::chrono::steady_clock::now();
    PotentialField serial = wolff_field(mu, grid, p, 1);
    auto t1 = std::chrono::steady_clock::now();
    double serial_s = std::chrono::duration<double>(t1 - t0).count();
    std::cout << "bench: " << atoms << " atoms on " << grid_arg << ", single worker "
              << serial_s << " s\n";

    if (workers > 1) {
        auto t2 = std::chrono::steady_clock::now();
        PotentialField par = wolff_field(mu, grid, p, workers);
        auto t3 = std::chrono::steady_clock::now();
        bool identical = par.values == serial.values && par.infinite == serial.infinite;
        std::cout << "bench: " << workers << " workers "
                  << std::chrono::duration<double>(t3 - t2).count() << " s, byte-identical "
                  << (identical ? "yes" : "NO") << "\n";
        if (!identical) return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parabolic potential toolkit"};
    app.require_subcommand(1);
    int workers = 1;
    std::uint64_t seed = 0x5eed;
    std::string out_dir;
    app.add_option("--workers", workers, "worker threads for field sweeps");
    app.add_option("--seed", seed, "seed for probe sampling");
    app.add_option("--out-dir", out_dir, "directory for artifacts");

    auto* c = app.add_subcommand("constants", "emit the admissibility constants table");
    std::string c_inputs, c_out = "table.csv";
    c->add_option("--inputs", c_inputs)->required();
    c->add_option("--out", c_out);

    auto* p = app.add_subcommand("potential", "evaluate a potential field over a grid");
    std::string p_kind, p_measure, p_params, p_grid = "32x32x16", p_out = "field.csv";
    p->add_option("--kind", p_kind)->required();
    p->add_option("--measure", p_measure)->required();
    p->add_option("--params", p_params)->required();
    p->add_option("--grid", p_grid);
    p->add_option("--out", p_out);

    auto* g = app.add_subcommand("green", "evaluate the box Green function at probes");
    std::string g_config, g_probe, g_out = "vals.csv";
    g->add_option("--config", g_config)->required();
    g->add_option("--probe", g_probe)->required();
    g->add_option("--out", g_out);

    auto* s = app.add_subcommand("solve", "solve a linear/absorption/source problem");
    std::string s_spec, s_out = "solution.csv", s_report = "report.json";
    s->add_option("--spec", s_spec)->required();
    s->add_option("--out", s_out);
    s->add_option("--report", s_report);

    auto* v = app.add_subcommand("verify", "run a numerical estimate check");
    std::string v_check, v_spec, v_out = "report.json";
    v->add_option("--check", v_check)->required();
    v->add_option("--spec", v_spec)->required();
    v->add_option("--out", v_out);

    auto* bn = app.add_subcommand("bench", "atomic Wolff field benchmark");
    int b_atoms = 10000;
    std::string b_grid = "64x64x64";
    bn->add_option("--atoms", b_atoms);
    bn->add_option("--grid", b_grid);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c->parsed()) return run_constants(c_inputs, c_out, out_dir);
        if (p->parsed()) return run_potential(p_kind, p_measure, p_params, p_grid, p_out,
                                              out_dir, workers);
        if (g->parsed()) return run_green(g_config, g_probe, g_out, out_dir);
        if (s->parsed()) return run_solve(s_spec, s_out, s_report, out_dir, workers);
        if (v->parsed()) return run_verify(v_check, v_spec, v_out, out_dir, workers);
        if (bn->parsed()) return run_bench(b_atoms, b_grid, workers, seed);
    } catch (const nlohmann::json::parse_error& e) {
        std::cerr << "config parse error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config schema error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
