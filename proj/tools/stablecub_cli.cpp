// stablecub: generate point sets, build cubature formulas, apply them and run
// the experiment sweeps. Exit codes: 0 ok, 2 bad usage or input, 3 the
// construction itself failed.

#include "stablecub/stablecub.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace stablecub;
using nlohmann::json;

namespace
{

constexpr int exit_input = 2;
constexpr int exit_construction = 3;

void write_json(const json& j, const std::string& path)
{
    std::ofstream os(path);
    if (!os)
        throw InputError("cannot open '" + path + "' for writing");
    os << j.dump(2) << '\n';
}

json read_json(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw InputError("cannot open '" + path + "'");
    try
    {
        return json::parse(is);
    }
    catch (const json::parse_error& e)
    {
        throw InputError(path + ": " + e.what());
    }
}

// One value per line, or a single CSV column with an optional header.
Eigen::VectorXd read_values(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw InputError("cannot open '" + path + "'");
    std::vector<double> vals;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line))
    {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#')
            continue;
        auto fields = detail::split_csv_row(line);
        if (fields.size() != 1)
            throw InputError(path + ":" + std::to_string(line_no) + ": expected 1 field, found " +
                             std::to_string(fields.size()));
        auto v = detail::parse_real(fields[0]);
        if (!v)
        {
            const std::string lower = [&] {
                std::string s = fields[0];
                for (auto& c : s)
                    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                return s;
            }();
            if (vals.empty() && line_no == 1 && lower.find("nan") == std::string::npos &&
                lower.find("inf") == std::string::npos)
                continue; // header
            throw InputError(path + ":" + std::to_string(line_no) + ": not a number: '" + fields[0] + "'");
        }
        if (!std::isfinite(*v))
            throw InputError(path + ":" + std::to_string(line_no) + ": non-finite value");
        vals.push_back(*v);
    }
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

std::vector<int> parse_int_list(const std::string& s)
{
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        // a:b or a:b:step ranges
        std::vector<int> parts;
        std::stringstream is(item);
        std::string p;
        while (std::getline(is, p, ':'))
        {
            try
            {
                std::size_t used = 0;
                parts.push_back(std::stoi(p, &used));
                if (used != p.size())
                    throw std::invalid_argument(p);
            }
            catch (const std::exception&)
            {
                throw InputError("bad integer list '" + s + "'");
            }
        }
        if (parts.size() == 1)
            out.push_back(parts[0]);
        else if (parts.size() == 2 || parts.size() == 3)
        {
            const int step = parts.size() == 3 ? parts[2] : 1;
            if (step <= 0)
                throw InputError("range step must be positive in '" + s + "'");
            for (int v = parts[0]; v <= parts[1]; v += step)
                out.push_back(v);
        }
        else
            throw InputError("bad integer list '" + s + "'");
    }
    return out;
}

std::vector<Method> parse_methods(const std::string& s)
{
    std::vector<Method> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_method(item));
    if (out.empty())
        throw InputError("no methods given");
    return out;
}

std::string domain_label(const Domain& d)
{
    return std::string(to_string(d.kind)) + std::to_string(d.dim);
}

// ---- points ----

struct PointsArgs
{
    std::string family = "halton";
    int q = 2;
    std::optional<int> n;
    std::optional<int> grid;
    std::uint64_t seed = 0;
    std::string domain = "cube";
    std::string out;
};

int run_points(const PointsArgs& a)
{
    const Domain dom = Domain::make(parse_domain_kind(a.domain), a.q);
    PointSet ps;
    if (a.family == "equid" || a.family == "equidistant")
    {
        int per_axis = 0;
        if (a.grid)
            per_axis = *a.grid;
        else if (a.n)
        {
            per_axis = static_cast<int>(std::lround(std::pow(*a.n, 1.0 / a.q)));
            if (detail::ipow(per_axis, a.q) != *a.n)
                throw InputError("equidistant grids need N = n^q; use --grid n (got N = " + std::to_string(*a.n) +
                                 ", q = " + std::to_string(a.q) + ")");
        }
        else
            throw InputError("equidistant family needs --grid or --n");
        ps = equidistant_grid(a.q, per_axis);
    }
    else
    {
        if (!a.n)
            throw InputError("--n is required for the " + a.family + " family");
        if (a.family == "halton")
            ps = halton(a.q, *a.n);
        else if (a.family == "uniform")
            ps = uniform_random(a.q, *a.n, a.seed);
        else
            throw InputError("unknown point family '" + a.family + "' (expected equid|uniform|halton)");
    }
    if (dom.kind == DomainKind::ball)
        ps = restrict_to_ball(ps);

    if (a.out.empty())
    {
        write_points_csv(std::cout, ps);
        return 0;
    }
    save_points(ps, a.out);
    json manifest;
    manifest["version"] = version_string;
    manifest["config"] = {{"command", "points"}, {"family", a.family}, {"q", a.q},      {"domain", a.domain},
                          {"seed", a.seed},      {"prng", prng_name},   {"out", a.out}};
    if (a.n)
        manifest["config"]["n"] = *a.n;
    if (a.grid)
        manifest["config"]["grid"] = *a.grid;
    manifest["N"] = ps.size();
    manifest["provenance"] = ps.provenance().to_json();
    write_json(manifest, a.out + ".json");
    return 0;
}

// ---- construct ----

struct ConstructArgs
{
    std::string method = "ls";
    std::string domain = "cube";
    std::string weight = "const";
    std::string points;
    std::string out;
    std::optional<int> start_degree;
    std::optional<int> max_degree;
    bool restrict_ball = false;
};

int run_construct(const ConstructArgs& a)
{
    PointSet ps = load_points(a.points);
    const Domain dom = Domain::make(parse_domain_kind(a.domain), ps.dim());
    const WeightFunction w{parse_weight_kind(a.weight)};
    require_supported(dom, w);
    if (a.restrict_ball && dom.kind == DomainKind::ball)
        ps = restrict_to_ball(ps);
    for (int n = 0; n < ps.size(); ++n)
        if (!contains(dom, ps.point(n)))
            throw InputError("point " + std::to_string(n) + " lies outside " + domain_label(dom) +
                             (dom.kind == DomainKind::ball ? " (use --restrict-to-ball)" : ""));

    ConstructOptions opts;
    opts.max_degree = a.max_degree;
    const Method m = parse_method(a.method);
    CubatureFormula cf;
    switch (m)
    {
    case Method::ls: cf = construct_ls(ps, dom, w, opts); break;
    case Method::l1: cf = construct_l1(ps, dom, w, a.start_degree, opts); break;
    case Method::mc: cf = mc_weights(ps, dom, w); break;
    case Method::product_gauss: throw InputError("product_gauss does not take data points; use ls|l1|mc");
    }

    json j = to_json(cf);
    j["version"] = version_string;
    j["config"] = {{"command", "construct"}, {"method", a.method}, {"domain", a.domain},
                   {"weight", a.weight},     {"points", a.points}, {"restrict_to_ball", a.restrict_ball}};
    if (a.start_degree)
        j["config"]["start_degree"] = *a.start_degree;
    if (a.max_degree)
        j["config"]["max_degree"] = *a.max_degree;
    if (a.out.empty())
        std::cout << j.dump(2) << '\n';
    else
        write_json(j, a.out);
    return 0;
}

// ---- integrate ----

int run_integrate(const std::string& cf_path, const std::string& values_path)
{
    const CubatureFormula cf = cubature_from_json(read_json(cf_path));
    const Eigen::VectorXd v = read_values(values_path);
    if (v.size() != cf.weights.size())
        throw InputError(values_path + " has " + std::to_string(v.size()) + " values but the formula has " +
                         std::to_string(cf.weights.size()) + " weights");
    std::cout << format_real(apply(cf, v)) << '\n';
    return 0;
}

// ---- experiment ----

struct ExperimentArgs
{
    std::string kind;
    std::string manifest;
    std::string domain = "cube";
    int q = 2;
    std::string weight = "const";
    std::string family = "halton";
    std::string methods;
    std::string sweep;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> noise_seed;
    std::optional<double> epsilon;
    std::string test;
    std::string out;
    bool no_timing = false;
};

std::vector<int> default_sweep(ExperimentKind kind, int q)
{
    if (kind == ExperimentKind::accuracy || kind == ExperimentKind::noise)
        return q == 2 ? parse_int_list("10:40:10") : parse_int_list("4:10:2");
    return q == 2 ? parse_int_list("4:40:4") : parse_int_list("4:10");
}

ExperimentConfig config_from_args(const ExperimentArgs& a)
{
    ExperimentConfig c;
    c.kind = parse_experiment_kind(a.kind);
    if (c.kind == ExperimentKind::accuracy || c.kind == ExperimentKind::noise)
    {
        if (a.test.empty())
            throw InputError(a.kind + " experiment needs --test testA|testB");
        c.test = parse_test_function(a.test);
        c.domain = c.test->domain();
        c.weight = c.test->weight();
        c.methods = {Method::ls, Method::l1, Method::mc, Method::product_gauss};
        c.epsilon = a.epsilon.value_or(c.kind == ExperimentKind::noise ? 1e-6 : 0.0);
        if (c.kind == ExperimentKind::noise && !(c.epsilon > 0.0))
            throw InputError("noise experiment needs --epsilon > 0");
        if (c.kind == ExperimentKind::accuracy && c.epsilon > 0.0)
            c.kind = ExperimentKind::noise;
    }
    else
    {
        c.domain = Domain::make(parse_domain_kind(a.domain), a.q);
        c.weight = WeightFunction{parse_weight_kind(a.weight)};
        c.methods = {Method::ls, Method::l1};
        c.epsilon = 0.0;
    }
    if (!a.methods.empty())
        c.methods = parse_methods(a.methods);
    c.family = a.family;
    c.sweep = a.sweep.empty() ? default_sweep(c.kind, c.domain.dim) : parse_int_list(a.sweep);
    c.seed = a.seed;
    c.noise_seed = a.noise_seed.value_or(a.seed + 1);
    c.record_timing = !a.no_timing;
    return c;
}

int run_experiment_cmd(const ExperimentArgs& a)
{
    ExperimentConfig cfg;
    if (!a.manifest.empty())
    {
        const json m = read_json(a.manifest);
        if (!m.contains("config"))
            throw InputError(a.manifest + ": no 'config' object");
        cfg = ExperimentConfig::from_json(m.at("config"));
        if (a.no_timing)
            cfg.record_timing = false;
    }
    else
    {
        if (a.kind.empty())
            throw InputError("experiment needs a kind (ratio|accuracy|noise|sparsity) or --manifest");
        cfg = config_from_args(a);
    }

    const ExperimentRecord rec = run_experiment(cfg);
    if (a.out.empty())
    {
        write_experiment_csv(std::cout, rec);
        return 0;
    }
    {
        std::ofstream os(a.out);
        if (!os)
            throw InputError("cannot open '" + a.out + "' for writing");
        write_experiment_csv(os, rec);
    }
    json manifest = experiment_manifest(rec);
    manifest["output"] = a.out;
    write_json(manifest, a.out + ".manifest.json");
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Nonnegative cubature formulas on scattered data"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version_string);

    PointsArgs pa;
    auto* points = app.add_subcommand("points", "generate a point set (CSV)");
    points->add_option("--family", pa.family, "equid | uniform | halton")->capture_default_str();
    points->add_option("--q", pa.q, "dimension")->capture_default_str();
    points->add_option("--n", pa.n, "number of points (per-axis count is --grid for equid)");
    points->add_option("--grid", pa.grid, "points per axis for the equidistant grid");
    points->add_option("--seed", pa.seed, "seed for the uniform family")->capture_default_str();
    points->add_option("--domain", pa.domain, "cube | ball (ball keeps points with |x| <= 1)")->capture_default_str();
    points->add_option("--out", pa.out, "output CSV (provenance goes to <out>.json); stdout if omitted");

    ConstructArgs ca;
    auto* construct = app.add_subcommand("construct", "build a cubature formula on a point set");
    construct->add_option("--method", ca.method, "ls | l1 | mc")->capture_default_str();
    construct->add_option("--domain", ca.domain, "cube | ball")->capture_default_str();
    construct->add_option("--weight", ca.weight, "const | cheb2 | sqrt_radius")->capture_default_str();
    construct->add_option("--points", ca.points, "point CSV")->required();
    construct->add_option("--out", ca.out, "output JSON; stdout if omitted");
    construct->add_option("--start-degree", ca.start_degree, "first degree tried by l1 (e.g. the LS degree)");
    construct->add_option("--max-degree", ca.max_degree, "stop the degree ascent here");
    construct->add_flag("--restrict-to-ball", ca.restrict_ball, "drop points outside the ball first");

    std::string cf_path, values_path;
    auto* integrate = app.add_subcommand("integrate", "apply a formula to data values");
    integrate->add_option("formula", cf_path, "formula JSON from 'construct'")->required();
    integrate->add_option("values", values_path, "one value per line, in point order")->required();

    ExperimentArgs ea;
    auto* experiment = app.add_subcommand("experiment", "run a sweep and write CSV plus a manifest");
    experiment->add_option("kind", ea.kind, "ratio | accuracy | noise | sparsity");
    experiment->add_option("--manifest", ea.manifest, "rerun the config stored in a manifest");
    experiment->add_option("--domain", ea.domain, "cube | ball")->capture_default_str();
    experiment->add_option("--q", ea.q, "dimension")->capture_default_str();
    experiment->add_option("--weight", ea.weight, "const | cheb2 | sqrt_radius")->capture_default_str();
    experiment->add_option("--family", ea.family, "equid | uniform | halton")->capture_default_str();
    experiment->add_option("--method", ea.methods, "comma list of ls,l1,mc,product_gauss");
    experiment->add_option("--sweep", ea.sweep, "per-axis n values: list and a:b[:step] ranges, e.g. 4:40:4");
    experiment->add_option("--seed", ea.seed, "seed for uniform points")->capture_default_str();
    experiment->add_option("--noise-seed", ea.noise_seed, "seed for data noise (default seed + 1)");
    experiment->add_option("--epsilon", ea.epsilon, "noise level (noise default 1e-6)");
    experiment->add_option("--test", ea.test, "testA | testB (accuracy and noise)");
    experiment->add_option("--out", ea.out, "output CSV (manifest goes to <out>.manifest.json); stdout if omitted");
    experiment->add_flag("--no-timing", ea.no_timing, "write wall_time_ms = 0 for byte-identical reruns");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_input;
    }

    try
    {
        if (*points)
            return run_points(pa);
        if (*construct)
            return run_construct(ca);
        if (*integrate)
            return run_integrate(cf_path, values_path);
        if (*experiment)
            return run_experiment_cmd(ea);
    }
    catch (const InputError& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    }
    catch (const ConstructionError& e)
    {
        std::cerr << "construction failed: " << e.what() << '\n';
        return exit_construction;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
