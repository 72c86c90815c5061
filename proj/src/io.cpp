#include "parapot/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace parapot::io {

std::string format17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string config_hash(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

Domain load_domain(const json& j) {
    double T = j.at("T").get<double>();
    if (j.contains("box")) {
        Box b;
        for (const auto& iv : j.at("box")) {
            b.lo.push_back(iv.at(0).get<double>());
            b.hi.push_back(iv.at(1).get<double>());
        }
        return Domain::make_box(b, T);
    }
    if (j.contains("ball")) {
        const auto& bl = j.at("ball");
        return Domain::make_ball(bl.at("center").get<std::vector<double>>(),
                                 bl.at("radius").get<double>(), T);
    }
    throw std::invalid_argument("domain: need \"box\" or \"ball\"");
}

namespace {

DensityGrid load_density_grid(const json& j) {
    Box b;
    b.lo = j.at("lo").get<std::vector<double>>();
    b.hi = j.at("hi").get<std::vector<double>>();
    return DensityGrid(b, j.at("shape").get<std::vector<int>>(),
                       j.at("values").get<std::vector<double>>());
}

SpaceTimeDensityGrid load_st_density_grid(const json& j) {
    Box b;
    b.lo = j.at("lo").get<std::vector<double>>();
    b.hi = j.at("hi").get<std::vector<double>>();
    return SpaceTimeDensityGrid(b, j.at("t0").get<double>(), j.at("t1").get<double>(),
                                j.at("shape").get<std::vector<int>>(), j.at("nt").get<int>(),
                                j.at("values").get<std::vector<double>>());
}

StepFunction load_step_function(const json& j) {
    StepFunction s;
    for (const auto& p : j)
        s.pieces.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    s.validate();
    return s;
}

}  // namespace

SpatialMeasure load_spatial_measure(const json& j) {
    int dim = j.value("dim", 0);
    SpatialMeasure m(dim);
    if (j.contains("atoms"))
        for (const auto& a : j.at("atoms"))
            m.add_atom(a.at("x").get<std::vector<double>>(), a.at("w").get<double>());
    if (j.contains("density")) m.set_density(load_density_grid(j.at("density")));
    if (j.contains("lebesgue")) m.set_lebesgue(j.at("lebesgue").get<double>());
    if (m.dim() == 0) throw std::invalid_argument("spatial measure: dimension unresolved");
    if (!(m.total_variation() < std::numeric_limits<double>::infinity()) &&
        m.lebesgue_constant() == 0)
        throw std::invalid_argument("spatial measure: infinite total variation");
    return m;
}

SpaceTimeMeasure load_spacetime_measure(const json& j) {
    int dim = j.value("dim", 0);
    SpaceTimeMeasure m(dim);
    if (j.contains("atoms"))
        for (const auto& a : j.at("atoms"))
            m.add_atom(a.at("x").get<std::vector<double>>(), a.at("t").get<double>(),
                       a.at("w").get<double>());
    if (j.contains("density")) m.set_density(load_st_density_grid(j.at("density")));
    if (j.contains("tensor"))
        m.set_tensor(load_spatial_measure(j.at("tensor").at("lambda")),
                     load_step_function(j.at("tensor").at("theta")));
    if (j.contains("lebesgue")) m.set_lebesgue(j.at("lebesgue").get<double>());
    if (m.dim() == 0) throw std::invalid_argument("spacetime measure: dimension unresolved");
    return m;
}

PotentialParams load_potential_params(const json& j, const Domain& dom) {
    PotentialParams p;
    p.d = dom.d();
    p.alpha = j.value("alpha", 1.0);
    p.beta = j.value("beta", 0.0);
    if (j.contains("R")) {
        if (j.at("R").is_string()) {
            std::string r = j.at("R").get<std::string>();
            if (r == "inf")
                p.R = std::numeric_limits<double>::infinity();
            else if (r == "2d")
                p.R = 2 * p.d;
            else if (r == "d")
                p.R = p.d;
            else
                throw std::invalid_argument("params: R string must be inf, d or 2d");
        } else {
            p.R = j.at("R").get<double>();
        }
    }
    p.nodes_per_decade = j.value("nodes_per_decade", p.nodes_per_decade);
    p.s_min_factor = j.value("s_min_factor", p.s_min_factor);
    p.clip_depth = j.value("clip_depth", p.clip_depth);
    p.quad_rtol = j.value("quad_rtol", p.quad_rtol);
    p.max_refine = j.value("max_refine", p.max_refine);
    p.divergence_threshold = j.value("divergence_threshold", p.divergence_threshold);
    p.validate();
    return p;
}

GreenConfig load_green_config(const json& j) {
    GreenConfig g;
    g.images = j.value("images", g.images);
    g.modes = j.value("modes", g.modes);
    g.eps_trunc = j.value("eps_trunc", g.eps_trunc);
    g.switch_time = j.value("switch_time", g.switch_time);
    if (j.contains("method")) {
        std::string m = j.at("method").get<std::string>();
        if (m == "reflections")
            g.method = GreenConfig::Method::reflections;
        else if (m == "eigen")
            g.method = GreenConfig::Method::eigen_series;
        else if (m == "auto")
            g.method = GreenConfig::Method::automatic;
        else
            throw std::invalid_argument("green: method must be reflections, eigen or auto");
    }
    return g;
}

ProblemSpec load_problem_spec(const json& j) {
    ProblemSpec spec;
    spec.domain = load_domain(j.at("domain"));
    spec.kind = problem_kind_from_string(j.at("kind").get<std::string>());
    const auto& nl = j.at("nonlinearity");
    spec.nl = spec.kind == ProblemKind::source
                  ? ExpNonlinearity::make_source(nl.at("a").get<double>(),
                                                 nl.at("q").get<double>(), nl.at("ell").get<int>())
                  : ExpNonlinearity::make(nl.at("a").get<double>(), nl.at("q").get<double>(),
                                          nl.at("ell").get<int>());
    spec.omega = SpatialMeasure(spec.domain.dim());
    spec.mu = SpaceTimeMeasure(spec.domain.dim());
    if (j.contains("omega")) spec.omega = load_spatial_measure(j.at("omega"));
    if (j.contains("mu")) spec.mu = load_spacetime_measure(j.at("mu"));
    if (j.contains("f1")) spec.f1 = load_density_grid(j.at("f1"));
    if (j.contains("f2")) spec.f2 = load_st_density_grid(j.at("f2"));
    spec.nx = j.at("nx").get<std::vector<int>>();
    spec.nt = j.at("nt").get<int>();
    spec.alpha = j.value("alpha", 1.0);
    spec.beta = j.value("beta", 0.0);
    spec.delta = j.value("delta", 1.0);
    if (j.contains("green")) spec.green = load_green_config(j.at("green"));
    if (j.contains("scheme")) {
        const auto& s = j.at("scheme");
        spec.scheme.theta = s.value("theta", spec.scheme.theta);
        spec.scheme.moll_base = s.value("moll_base", spec.scheme.moll_base);
        spec.scheme.moll_levels = s.value("moll_levels", spec.scheme.moll_levels);
        spec.scheme.ladder_rtol = s.value("ladder_rtol", spec.scheme.ladder_rtol);
        spec.scheme.trunc_levels = s.value("trunc_levels", spec.scheme.trunc_levels);
        spec.scheme.trunc_base = s.value("trunc_base", spec.scheme.trunc_base);
        spec.scheme.picard_maxit = s.value("picard_maxit", spec.scheme.picard_maxit);
        spec.scheme.picard_tol = s.value("picard_tol", spec.scheme.picard_tol);
        spec.scheme.cross_validation_rtol =
            s.value("cross_validation_rtol", spec.scheme.cross_validation_rtol);
        if (s.contains("kernel"))
            spec.scheme.kernel = s.at("kernel").get<std::string>() == "wendland"
                                     ? MollifierKernel::wendland
                                     : MollifierKernel::bump;
    }
    spec.validate();
    return spec;
}

json report_to_json(const CheckReport& rep) {
    json j;
    j["check"] = rep.name;
    j["verdict"] = to_string(rep.verdict);
    j["metrics"] = rep.metrics;
    j["rows"] = rep.rows;
    j["notes"] = rep.notes;
    j["dependence"] = rep.dependence;
    return j;
}

json solution_to_json(const Solution& sol) {
    json j;
    j["status"] = to_string(sol.status);
    j["diagnostics"] = sol.diagnostics;
    j["notes"] = sol.notes;
    json adm;
    adm["m1_pos"] = sol.admissibility.m1_pos;
    adm["m1_neg"] = sol.admissibility.m1_neg;
    adm["m2_pos"] = sol.admissibility.m2_pos;
    adm["m2_neg"] = sol.admissibility.m2_neg;
    adm["m1_infinite"] = sol.admissibility.m1_infinite;
    adm["m2_infinite"] = sol.admissibility.m2_infinite;
    adm["M1"] = sol.admissibility.M1;
    adm["M2"] = sol.admissibility.M2;
    adm["within"] = sol.admissibility.within;
    adm["warnings"] = sol.admissibility.warnings;
    j["admissibility"] = adm;
    json its = json::array();
    for (const auto& it : sol.iterates) {
        json e;
        e["ladder"] = it.ladder;
        e["level"] = it.level;
        e["l1_delta"] = it.l1_delta;
        e["g_mass"] = it.g_mass;
        e["mass_bound"] = it.mass_bound;
        e["mass_bound_ok"] = it.mass_bound_ok;
        e["sandwich_ok"] = it.sandwich_ok;
        e["sup_delta"] = it.sup_delta;
        e["monotone_ok"] = it.monotone_ok;
        its.push_back(e);
    }
    j["iterates"] = its;
    return j;
}

json constants_to_json(const ConstantsTable& table) {
    json j = json::array();
    for (const auto& name : table.names()) {
        const auto& e = table.get(name);
        json row;
        row["name"] = name;
        row["value"] = e.value;
        row["formula"] = e.formula;
        row["provenance"] = e.provenance;
        j.push_back(row);
    }
    return j;
}

std::string artifact_header(const std::string& hash, const ConstantsTable& table) {
    std::ostringstream out;
    out << "# config_hash=" << hash << "\n";
    out << "# constants:";
    for (const auto& name : table.names())
        out << ' ' << name << '=' << format17(table.get(name).value);
    out << "\n";
    return out.str();
}

void write_field_csv(const std::string& path, const PotentialField& field,
                     const std::string& header) {
    std::ostringstream out;
    out << header;
    int dim = field.grid.dim();
    for (int a = 0; a < dim; ++a) out << 'x' << (a + 1) << ',';
    out << "t,value,is_infinite\n";
    std::size_t S = field.grid.spatial_count();
    for (int k = 0; k < field.grid.nt; ++k) {
        double t = field.grid.time_node(k);
        for (std::size_t sp = 0; sp < S; ++sp) {
            Point x = field.grid.spatial_node(sp);
            for (int a = 0; a < dim; ++a) out << format17(x[a]) << ',';
            std::size_t i = field.grid.flat(k, sp);
            out << format17(t) << ',' << format17(field.infinite[i] ? 0.0 : field.values[i])
                << ',' << (field.infinite[i] ? 1 : 0) << "\n";
        }
    }
    write_file(path, out.str());
}

void write_constants_csv(const std::string& path, const ConstantsTable& table,
                         const std::string& hash) {
    std::ostringstream out;
    out << "# config_hash=" << hash << "\n";
    out << "name,value,formula,provenance\n";
    for (const auto& name : table.names()) {
        const auto& e = table.get(name);
        out << name << ',' << format17(e.value) << ",\"" << e.formula << "\",\"" << e.provenance
            << "\"\n";
    }
    write_file(path, out.str());
}

}  // namespace parapot::io
