#pragma once

// Numerical experiments on scattered-data cubature: how the attainable degree
// grows with N (power-law fits N = C d^s), accuracy on two smooth test
// integrands with and without data noise, and sparsity of the l1 weights.

#include "stablecub/cubature.hpp"
#include "stablecub/domains.hpp"
#include "stablecub/errors.hpp"
#include "stablecub/pointsets.hpp"
#include "stablecub/version.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace stablecub
{

enum class TestId
{
    testA, ///< 1/(1+|x|^2) on B_2 with omega = sqrt(|x|)
    testB  ///< arccos(x) arccos(y) arccos(z) on C_3 with the Chebyshev-2 product weight
};

struct TestFunction
{
    TestId id = TestId::testA;
    double scale = 1.0;

    static TestFunction testA() { return {TestId::testA, 1.0}; }
    static TestFunction testB() { return {TestId::testB, 1.0}; }

    std::string name() const { return id == TestId::testA ? "testA" : "testB"; }
    Domain domain() const { return id == TestId::testA ? Domain::ball(2) : Domain::cube(3); }
    WeightFunction weight() const
    {
        return WeightFunction{id == TestId::testA ? WeightKind::sqrt_radius : WeightKind::chebyshev2_product};
    }

    double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const
    {
        if (id == TestId::testA)
            return scale / (1.0 + x.squaredNorm());
        double v = scale;
        for (Eigen::Index i = 0; i < x.size(); ++i)
            v *= std::acos(x[i]);
        return v;
    }
};

inline TestFunction parse_test_function(const std::string& s)
{
    if (s == "testA" || s == "A")
        return TestFunction::testA();
    if (s == "testB" || s == "B")
        return TestFunction::testB();
    throw InputError("unknown test function '" + s + "' (expected testA|testB)");
}

namespace detail
{

// 2 pi int_0^1 r^{3/2} / (1 + r^2) dr
inline double testA_radial_integral()
{
    static const double value = [] {
        boost::math::quadrature::tanh_sinh<double> integrator;
        auto g = [](double r) { return r * std::sqrt(r) / (1.0 + r * r); };
        return 2.0 * std::numbers::pi * integrator.integrate(g, 0.0, 1.0, 1e-15);
    }();
    return value;
}

} // namespace detail

/// Exact weighted integral of the test function over its domain.
inline double reference_integral(const TestFunction& tf)
{
    if (tf.id == TestId::testB)
        return tf.scale * std::pow(std::numbers::pi, 6) / 64.0;
    return tf.scale * detail::testA_radial_integral();
}

/// Least-squares fit of log N = log C + s log d.
struct RatioFit
{
    std::vector<std::pair<long long, int>> samples; ///< (N, d), all of them
    double C = std::numeric_limits<double>::quiet_NaN();
    double s = std::numeric_limits<double>::quiet_NaN();
    int used = 0; ///< samples with d >= 1 that entered the fit

    bool ok() const { return std::isfinite(C) && std::isfinite(s); }
};

inline RatioFit fit_power_law(const std::vector<std::pair<long long, int>>& samples)
{
    RatioFit fit;
    fit.samples = samples;
    std::vector<double> x, y;
    for (auto [n, d] : samples)
        if (d >= 1 && n >= 1)
        {
            x.push_back(std::log(static_cast<double>(d)));
            y.push_back(std::log(static_cast<double>(n)));
        }
    fit.used = static_cast<int>(x.size());
    if (x.size() < 2)
        return fit;
    Eigen::MatrixXd a(x.size(), 2);
    Eigen::VectorXd b(y.size());
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        a(i, 0) = 1.0;
        a(i, 1) = x[i];
        b[i] = y[i];
    }
    if (a.col(1).maxCoeff() == a.col(1).minCoeff())
        return fit; // every sample has the same degree
    const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(b);
    fit.C = std::exp(coef[0]);
    fit.s = coef[1];
    return fit;
}

enum class ExperimentKind
{
    ratio,
    accuracy,
    noise,
    sparsity
};

inline std::string_view to_string(ExperimentKind k)
{
    switch (k)
    {
    case ExperimentKind::ratio: return "ratio";
    case ExperimentKind::accuracy: return "accuracy";
    case ExperimentKind::noise: return "noise";
    case ExperimentKind::sparsity: return "sparsity";
    }
    return "?";
}

inline ExperimentKind parse_experiment_kind(std::string_view s)
{
    if (s == "ratio")
        return ExperimentKind::ratio;
    if (s == "accuracy")
        return ExperimentKind::accuracy;
    if (s == "noise")
        return ExperimentKind::noise;
    if (s == "sparsity")
        return ExperimentKind::sparsity;
    throw InputError("unknown experiment '" + std::string(s) + "' (expected ratio|accuracy|noise|sparsity)");
}

/// Everything needed to rerun an experiment.
struct ExperimentConfig
{
    ExperimentKind kind = ExperimentKind::ratio;
    Domain domain = Domain::cube(2);
    WeightFunction weight{WeightKind::constant};
    std::string family = "halton";
    std::vector<Method> methods{Method::ls};
    std::vector<int> sweep;          ///< per-axis n; the generated set has n^q points
    std::uint64_t seed = 0;          ///< point generation (uniform family)
    std::uint64_t noise_seed = 1;
    double epsilon = 0.0;
    std::optional<TestFunction> test;
    bool record_timing = true;       ///< false writes wall_time_ms = 0 so reruns are byte-identical

    nlohmann::json to_json() const
    {
        nlohmann::json j;
        j["kind"] = to_string(kind);
        j["domain"] = to_string(domain.kind);
        j["q"] = domain.dim;
        j["weight"] = to_string(weight.kind);
        j["family"] = family;
        nlohmann::json m = nlohmann::json::array();
        for (Method x : methods)
            m.push_back(to_string(x));
        j["methods"] = m;
        j["sweep"] = sweep;
        j["seed"] = seed;
        j["noise_seed"] = noise_seed;
        j["prng"] = prng_name;
        j["epsilon"] = epsilon;
        if (test)
            j["test"] = test->name();
        j["record_timing"] = record_timing;
        return j;
    }

    static ExperimentConfig from_json(const nlohmann::json& j)
    {
        try
        {
            ExperimentConfig c;
            c.kind = parse_experiment_kind(j.at("kind").get<std::string>());
            c.domain = Domain::make(parse_domain_kind(j.at("domain").get<std::string>()), j.at("q").get<int>());
            c.weight = WeightFunction{parse_weight_kind(j.at("weight").get<std::string>())};
            c.family = j.at("family").get<std::string>();
            c.methods.clear();
            for (const auto& m : j.at("methods"))
                c.methods.push_back(parse_method(m.get<std::string>()));
            c.sweep = j.at("sweep").get<std::vector<int>>();
            c.seed = j.at("seed").get<std::uint64_t>();
            c.noise_seed = j.at("noise_seed").get<std::uint64_t>();
            c.epsilon = j.at("epsilon").get<double>();
            if (j.contains("test"))
                c.test = parse_test_function(j.at("test").get<std::string>());
            c.record_timing = j.value("record_timing", true);
            return c;
        }
        catch (const nlohmann::json::exception& e)
        {
            throw InputError(std::string("malformed experiment config: ") + e.what());
        }
    }
};

struct ExperimentRow
{
    long long N = 0;
    Method method = Method::ls;
    int d = 0;
    long long K = 0;
    double kappa = 0.0;
    double error = std::numeric_limits<double>::quiet_NaN(); ///< |C_N[f] - I[f]|, NaN when no integrand
    int nonzero_count = 0;
    double wall_time_ms = 0.0;
    long long generated_N = 0; ///< size before ball restriction
    bool failed = false;       ///< construction threw; d is reported as 0
    std::string note;
};

struct ExperimentRecord
{
    ExperimentConfig config;
    std::vector<ExperimentRow> rows;
    std::map<std::string, RatioFit> fits; ///< keyed by method name
    std::optional<double> reference;
};

namespace detail
{

class Stopwatch
{
public:
    explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
    double ms() const
    {
        if (!enabled_)
            return 0.0;
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    bool enabled_;
    std::chrono::steady_clock::time_point start_;
};

inline ExperimentRow row_from(const CubatureFormula& cf, long long generated, double ms)
{
    ExperimentRow r;
    r.N = cf.size();
    r.method = cf.method;
    r.d = cf.degree;
    r.K = cf.degree >= 0 ? cf.basis_size() : 0;
    r.kappa = cf.kappa;
    r.nonzero_count = static_cast<int>((cf.weights.array() != 0.0).count());
    r.wall_time_ms = ms;
    r.generated_N = generated;
    return r;
}

inline ExperimentRow failed_row(Method m, long long n_points, long long generated, const std::string& why)
{
    ExperimentRow r;
    r.N = n_points;
    r.method = m;
    r.d = 0;
    r.generated_N = generated;
    r.failed = true;
    r.note = why;
    return r;
}

inline long long ipow(int n, int q)
{
    long long t = 1;
    for (int i = 0; i < q; ++i)
        t *= n;
    return t;
}

/// Tensor Gauss-Legendre rule on the cube with omega folded into the weights,
/// so it applies directly to samples of f.
inline CubatureFormula weighted_product_gauss(const Domain& domain, WeightFunction weight, int n)
{
    CubatureFormula cf = product_gauss_legendre(domain.dim, n);
    if (weight.kind != WeightKind::constant)
    {
        for (int k = 0; k < cf.size(); ++k)
            cf.weights[k] *= weight_eval(domain, weight, cf.points.point(k));
        cf.weight = weight;
        cf.degree = -1;
        cf.kappa = kappa(cf.weights);
    }
    return cf;
}

// LS first, then l1 started at the LS degree; other methods as requested.
struct SweepPoint
{
    std::vector<ExperimentRow> rows;
    std::vector<CubatureFormula> formulas;
};

inline SweepPoint run_methods(const ExperimentConfig& cfg, const PointSet& ps, long long generated)
{
    SweepPoint out;
    std::optional<int> ls_degree;
    auto wants = [&](Method m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end(); };
    for (Method m : {Method::ls, Method::l1, Method::mc})
    {
        if (!wants(m))
            continue;
        Stopwatch sw(cfg.record_timing);
        try
        {
            CubatureFormula cf;
            if (m == Method::ls)
            {
                cf = construct_ls(ps, cfg.domain, cfg.weight);
                ls_degree = cf.degree;
            }
            else if (m == Method::l1)
                cf = construct_l1(ps, cfg.domain, cfg.weight, ls_degree);
            else
                cf = mc_weights(ps, cfg.domain, cfg.weight);
            out.rows.push_back(row_from(cf, generated, sw.ms()));
            out.formulas.push_back(std::move(cf));
        }
        catch (const ConstructionError& e)
        {
            out.rows.push_back(failed_row(m, ps.size(), generated, e.what()));
            out.formulas.emplace_back();
        }
    }
    return out;
}

inline void require_sweep(const ExperimentConfig& cfg)
{
    if (cfg.sweep.empty())
        throw InputError("experiment sweep is empty");
    for (int n : cfg.sweep)
        if (n < 1)
            throw InputError("sweep values must be >= 1");
    require_supported(cfg.domain, cfg.weight);
}

inline void fit_rows(ExperimentRecord& rec)
{
    std::map<std::string, std::vector<std::pair<long long, int>>> by_method;
    for (const auto& r : rec.rows)
        if (!r.failed)
            by_method[std::string(to_string(r.method))].emplace_back(r.N, r.d);
    for (auto& [m, samples] : by_method)
        if (m != "MC")
            rec.fits[m] = fit_power_law(samples);
}

} // namespace detail

/// Attainable degree versus N. product_gauss rows use the tensor rule with
/// the same per-axis n (cube and omega = 1 only).
inline ExperimentRecord ratio_experiment(ExperimentConfig cfg)
{
    cfg.kind = ExperimentKind::ratio;
    detail::require_sweep(cfg);
    ExperimentRecord rec{cfg, {}, {}, std::nullopt};
    const bool gauss = std::find(cfg.methods.begin(), cfg.methods.end(), Method::product_gauss) != cfg.methods.end();
    if (gauss && (cfg.domain.kind != DomainKind::cube || cfg.weight.kind != WeightKind::constant))
        throw InputError("product_gauss rows need the cube with the constant weight");
    for (int n : cfg.sweep)
    {
        const long long generated = detail::ipow(n, cfg.domain.dim);
        const PointSet ps = points_for_domain(cfg.domain, cfg.family, n, cfg.seed);
        auto sp = detail::run_methods(cfg, ps, generated);
        for (auto& r : sp.rows)
            rec.rows.push_back(std::move(r));
        if (gauss)
        {
            detail::Stopwatch sw(cfg.record_timing);
            const CubatureFormula g = product_gauss_legendre(cfg.domain.dim, n);
            rec.rows.push_back(detail::row_from(g, generated, sw.ms()));
        }
    }
    detail::fit_rows(rec);
    return rec;
}

/// |C_N[f^eps] - I[f]| for LS, l1, MC and (on the cube) the tensor
/// Gauss-Legendre rule with the same per-axis n. Noise is drawn from
/// cfg.noise_seed, independently of the point seed.
inline ExperimentRecord accuracy_experiment(ExperimentConfig cfg)
{
    if (!cfg.test)
        throw InputError("accuracy experiment needs a test function");
    const TestFunction tf = *cfg.test;
    cfg.domain = tf.domain();
    cfg.weight = tf.weight();
    if (!(cfg.epsilon >= 0.0))
        throw InputError("noise level must be >= 0");
    cfg.kind = cfg.epsilon > 0.0 ? ExperimentKind::noise : ExperimentKind::accuracy;
    detail::require_sweep(cfg);
    const double ref = reference_integral(tf);
    ExperimentRecord rec{cfg, {}, {}, ref};

    auto noisy = [&](const PointSet& ps) {
        Eigen::VectorXd f = sample(ps, tf);
        return cfg.epsilon > 0.0 ? add_noise(f, cfg.epsilon, cfg.noise_seed).values : f;
    };

    for (int n : cfg.sweep)
    {
        const long long generated = detail::ipow(n, cfg.domain.dim);
        const PointSet ps = points_for_domain(cfg.domain, cfg.family, n, cfg.seed);
        const Eigen::VectorXd fe = noisy(ps);
        auto sp = detail::run_methods(cfg, ps, generated);
        for (std::size_t i = 0; i < sp.rows.size(); ++i)
        {
            if (!sp.rows[i].failed)
                sp.rows[i].error = std::abs(apply(sp.formulas[i], fe) - ref);
            rec.rows.push_back(std::move(sp.rows[i]));
        }
        const bool gauss =
            std::find(cfg.methods.begin(), cfg.methods.end(), Method::product_gauss) != cfg.methods.end();
        if (gauss && cfg.domain.kind == DomainKind::cube)
        {
            detail::Stopwatch sw(cfg.record_timing);
            const CubatureFormula g = detail::weighted_product_gauss(cfg.domain, cfg.weight, n);
            const Eigen::VectorXd fg = noisy(g.points);
            ExperimentRow r = detail::row_from(g, generated, 0.0);
            r.d = 2 * n - 1;
            r.K = basis_size(cfg.domain.dim, r.d);
            r.error = std::abs(apply(g, fg) - ref);
            r.wall_time_ms = sw.ms();
            rec.rows.push_back(std::move(r));
        }
    }
    return rec;
}

/// Nonzero count of the l1 weights against K(d).
inline ExperimentRecord sparsity_experiment(ExperimentConfig cfg)
{
    cfg.kind = ExperimentKind::sparsity;
    cfg.methods = {Method::l1};
    detail::require_sweep(cfg);
    ExperimentRecord rec{cfg, {}, {}, std::nullopt};
    for (int n : cfg.sweep)
    {
        const long long generated = detail::ipow(n, cfg.domain.dim);
        const PointSet ps = points_for_domain(cfg.domain, cfg.family, n, cfg.seed);
        detail::Stopwatch sw(cfg.record_timing);
        try
        {
            const CubatureFormula ls = construct_ls(ps, cfg.domain, cfg.weight);
            const CubatureFormula l1 = construct_l1(ps, cfg.domain, cfg.weight, ls.degree);
            rec.rows.push_back(detail::row_from(l1, generated, sw.ms()));
        }
        catch (const ConstructionError& e)
        {
            rec.rows.push_back(detail::failed_row(Method::l1, ps.size(), generated, e.what()));
        }
    }
    return rec;
}

inline ExperimentRecord run_experiment(const ExperimentConfig& cfg)
{
    switch (cfg.kind)
    {
    case ExperimentKind::ratio: return ratio_experiment(cfg);
    case ExperimentKind::accuracy:
    case ExperimentKind::noise: return accuracy_experiment(cfg);
    case ExperimentKind::sparsity: return sparsity_experiment(cfg);
    }
    throw InputError("unknown experiment kind");
}

inline const char* csv_header = "N,method,d,K,kappa,error,nonzero_count,wall_time_ms";

/// One row per (N, method); fits follow as '# fit' comment lines.
inline void write_experiment_csv(std::ostream& os, const ExperimentRecord& rec)
{
    os << csv_header << '\n';
    for (const auto& r : rec.rows)
    {
        os << r.N << ',' << to_string(r.method) << ',' << r.d << ',' << r.K << ',' << format_real(r.kappa) << ','
           << (std::isnan(r.error) ? std::string("nan") : format_real(r.error)) << ',' << r.nonzero_count << ','
           << format_real(r.wall_time_ms) << '\n';
    }
    for (const auto& [m, fit] : rec.fits)
        os << "# fit," << m << ",C=" << format_real(fit.C) << ",s=" << format_real(fit.s) << ",used=" << fit.used
           << '\n';
}

/// Run manifest: config, code version, reference value, fits and per-row
/// bookkeeping that does not fit the CSV column set.
inline nlohmann::json experiment_manifest(const ExperimentRecord& rec)
{
    nlohmann::json j;
    j["version"] = version_string;
    j["config"] = rec.config.to_json();
    if (rec.reference)
        j["reference_integral"] = *rec.reference;
    nlohmann::json fits = nlohmann::json::object();
    for (const auto& [m, fit] : rec.fits)
        fits[m] = {{"C", fit.C}, {"s", fit.s}, {"used", fit.used}};
    j["fits"] = fits;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rec.rows)
    {
        nlohmann::json x = {{"N", r.N}, {"method", to_string(r.method)}, {"generated_N", r.generated_N}};
        if (r.failed)
            x["failure"] = r.note;
        rows.push_back(std::move(x));
    }
    j["rows"] = rows;
    return j;
}

} // namespace stablecub
