#pragma once

// Cubature formulas on scattered data: the stability value, Monte Carlo and
// tensor Gauss-Legendre baselines, and the nonnegative least-squares and l1
// constructions, which raise the degree of exactness for as long as the
// point set stays unisolvent and all weights stay nonnegative.

#include "stablecub/domains.hpp"
#include "stablecub/errors.hpp"
#include "stablecub/pointsets.hpp"
#include "stablecub/polybasis.hpp"
#include "stablecub/solvers.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace stablecub
{

enum class Method
{
    ls,
    l1,
    mc,
    product_gauss
};

inline std::string_view to_string(Method m)
{
    switch (m)
    {
    case Method::ls: return "LS";
    case Method::l1: return "L1";
    case Method::mc: return "MC";
    case Method::product_gauss: return "product_gauss";
    }
    return "?";
}

inline Method parse_method(std::string_view s)
{
    if (s == "ls" || s == "LS")
        return Method::ls;
    if (s == "l1" || s == "L1")
        return Method::l1;
    if (s == "mc" || s == "MC")
        return Method::mc;
    if (s == "product_gauss" || s == "gauss")
        return Method::product_gauss;
    throw InputError("unknown method '" + std::string(s) + "' (expected ls|l1|mc|product_gauss)");
}

/// Why the degree ascent stopped.
enum class StopReason
{
    none,
    basis_exceeds_points, ///< K(d+1) > N+
    rank_deficient,
    breakdown,
    negative_weight,
    degree_cap
};

inline std::string_view to_string(StopReason r)
{
    switch (r)
    {
    case StopReason::none: return "none";
    case StopReason::basis_exceeds_points: return "basis_exceeds_points";
    case StopReason::rank_deficient: return "rank_deficient";
    case StopReason::breakdown: return "breakdown";
    case StopReason::negative_weight: return "negative_weight";
    case StopReason::degree_cap: return "degree_cap";
    }
    return "?";
}

struct SolverInfo
{
    int iterations = 0;             ///< simplex iterations for the accepted l1 solution
    int nonzero_count = 0;
    int degrees_tried = 0;
    double gram_residual = 0.0;     ///< of the accepted DOP basis
    bool reorthogonalized = false;
    StopReason stop_reason = StopReason::none;
};

struct CubatureFormula
{
    PointSet points;
    Eigen::VectorXd weights;
    int degree = -1;
    double kappa = 0.0;
    Method method = Method::mc;
    Domain domain;
    WeightFunction weight;
    SolverInfo solver;

    int size() const { return static_cast<int>(weights.size()); }
    long long basis_size() const { return stablecub::basis_size(domain.dim, degree); }
};

/// Stability value sum_n |w_n|.
inline double kappa(const Eigen::Ref<const Eigen::VectorXd>& w)
{
    return w.lpNorm<1>();
}

inline double apply(const CubatureFormula& cf, const Eigen::Ref<const Eigen::VectorXd>& values)
{
    if (values.size() != cf.weights.size())
        throw InputError("apply: " + std::to_string(values.size()) + " values for " +
                         std::to_string(cf.weights.size()) + " weights");
    return cf.weights.dot(values);
}

/// Evaluates f at every point of the formula.
template <class F>
Eigen::VectorXd sample(const PointSet& points, F&& f)
{
    Eigen::VectorXd v(points.size());
    for (int n = 0; n < points.size(); ++n)
        v[n] = f(Eigen::VectorXd(points.point(n)));
    return v;
}

namespace detail
{

inline void require_in_domain(const PointSet& points, const Domain& domain)
{
    if (points.dim() != domain.dim)
        throw InputError("points have dimension " + std::to_string(points.dim()) + ", domain has " +
                         std::to_string(domain.dim));
    for (int n = 0; n < points.size(); ++n)
        if (!contains(domain, points.point(n)))
            throw InputError("point " + std::to_string(n) + " lies outside the " +
                             std::string(to_string(domain.kind)));
}

} // namespace detail

/// (Quasi) Monte Carlo weights |Omega| omega(x_n) / N. No exactness is
/// claimed (degree -1).
inline CubatureFormula mc_weights(const PointSet& points, const Domain& domain, WeightFunction weight)
{
    require_supported(domain, weight);
    detail::require_in_domain(points, domain);
    const double vol = volume(domain);
    Eigen::VectorXd w(points.size());
    for (int n = 0; n < points.size(); ++n)
        w[n] = vol * weight_eval(domain, weight, points.point(n)) / points.size();
    CubatureFormula cf{points, w, -1, kappa(w), Method::mc, domain, weight, {}};
    cf.solver.nonzero_count = static_cast<int>((w.array() != 0.0).count());
    return cf;
}

struct GaussRule1d
{
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail
{

// (P_n(x), P_n'(x)) by the three-term recurrence.
inline std::pair<double, double> legendre_with_derivative(int n, double x)
{
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k)
    {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
}

} // namespace detail

/// n-point Gauss-Legendre rule on [-1,1]: Newton on P_n from the asymptotic
/// initial guess cos(pi (i + 3/4) / (n + 1/2)), weights 2 / ((1 - x^2) P_n'(x)^2).
inline GaussRule1d gauss_legendre(int n)
{
    if (n < 1)
        throw InputError("gauss_legendre needs n >= 1");
    GaussRule1d rule{std::vector<double>(n), std::vector<double>(n)};
    for (int i = 0; i < (n + 1) / 2; ++i)
    {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it)
        {
            const auto [p, dp] = detail::legendre_with_derivative(n, x);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) <= 1e-16)
                break;
        }
        const double dp = detail::legendre_with_derivative(n, x).second;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1)
        rule.nodes[n / 2] = 0.0;
    return rule;
}

/// Tensor product of the n-point Gauss-Legendre rule on C_q (omega = 1),
/// exact to degree 2n - 1.
inline CubatureFormula product_gauss_legendre(int q, int n)
{
    if (q < 1)
        throw InputError("product_gauss_legendre needs q >= 1");
    const GaussRule1d rule = gauss_legendre(n);
    long long total = 1;
    for (int i = 0; i < q; ++i)
        total *= n;
    Eigen::MatrixXd coords(q, total);
    Eigen::VectorXd w(total);
    std::vector<int> digit(q, 0);
    for (long long col = 0; col < total; ++col)
    {
        double wc = 1.0;
        for (int i = 0; i < q; ++i)
        {
            coords(i, col) = rule.nodes[digit[i]];
            wc *= rule.weights[digit[i]];
        }
        w[col] = wc;
        for (int i = 0; i < q && ++digit[i] == n; ++i)
            digit[i] = 0;
    }
    Provenance p;
    p.family = "gauss_legendre";
    p.grid_n = n;
    CubatureFormula cf{PointSet(std::move(coords), p), w, 2 * n - 1, kappa(w), Method::product_gauss,
                       Domain::cube(q), WeightFunction{WeightKind::constant}, {}};
    cf.solver.nonzero_count = static_cast<int>(total);
    return cf;
}

struct ConstructOptions
{
    /// Weights >= -nonneg_tol * I[1] count as nonnegative and are clamped to 0.
    double nonneg_tol = 1e-10;
    std::optional<int> max_degree;
    SimplexOptions simplex;
    DopOptions dop;
    /// Called with every DOP basis built during the degree search.
    std::function<void(const DOPBasis&)> on_basis;
};

/// Exactness system in the DOP basis for one degree, or the reason it cannot
/// be formulated.
struct DegreeSystem
{
    std::optional<DOPBasis> dop;
    StopReason failure = StopReason::none;
};

inline DegreeSystem formulate_system(const DiscreteInnerProduct& inner, const Domain& domain, WeightFunction weight,
                                     int degree, const ConstructOptions& opts = {})
{
    const std::vector<int> support = inner.positive_support();
    const long long K = basis_size(domain.dim, degree);
    if (K > static_cast<long long>(support.size()))
        return {std::nullopt, StopReason::basis_exceeds_points};

    const MonomialBasis basis = enumerate_multi_indices(domain.dim, degree);
    Eigen::MatrixXd support_pts(domain.dim, static_cast<Eigen::Index>(support.size()));
    for (std::size_t j = 0; j < support.size(); ++j)
        support_pts.col(static_cast<Eigen::Index>(j)) = inner.points.point(support[j]);
    const RowMatrix e = eval_monomials(basis, support_pts);
    if (rank_of(e).rank < K)
        return {std::nullopt, StopReason::rank_deficient};

    const auto& moments = MomentCache::global().get(domain, weight, degree, basis.indices);
    try
    {
        DOPBasis dop = build_dop(basis, inner, moments, opts.dop);
        if (opts.on_basis)
            opts.on_basis(dop);
        return {std::move(dop), StopReason::none};
    }
    catch (const BreakdownError&)
    {
        return {std::nullopt, StopReason::breakdown};
    }
}

/// w_n = r_n sum_k pi_k(x_n) I[pi_k].
inline Eigen::VectorXd explicit_ls_weights(const DOPBasis& dop)
{
    Eigen::VectorXd w = dop.values.transpose() * dop.moments;
    return w.cwiseProduct(dop.inner.r);
}

/// l1-minimal weights for the DOP system, restricted to points with r_n > 0.
inline L1Solution l1_weights(const DOPBasis& dop, const SimplexOptions& opts = {},
                             const std::vector<int>* warm_basis = nullptr)
{
    const std::vector<int> support = dop.inner.positive_support();
    Eigen::MatrixXd p(dop.values.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t j = 0; j < support.size(); ++j)
        p.col(static_cast<Eigen::Index>(j)) = dop.values.col(support[j]);
    L1Solution sub = l1_minimize(p, dop.moments, opts, warm_basis);
    L1Solution full = sub;
    full.w = Eigen::VectorXd::Zero(dop.inner.size());
    for (std::size_t j = 0; j < support.size(); ++j)
        full.w[support[j]] = sub.w[static_cast<Eigen::Index>(j)];
    return full;
}

/// l1-minimal weights when a nonnegative solution exists, else nullopt.
inline std::optional<L1Solution> l1_nonnegative_weights(const DOPBasis& dop, const SimplexOptions& opts = {},
                                                        const std::vector<int>* warm_basis = nullptr)
{
    const std::vector<int> support = dop.inner.positive_support();
    Eigen::MatrixXd p(dop.values.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t j = 0; j < support.size(); ++j)
        p.col(static_cast<Eigen::Index>(j)) = dop.values.col(support[j]);
    std::optional<L1Solution> sub = nonnegative_basic_solution(p, dop.moments, opts, warm_basis);
    if (!sub)
        return sub;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(dop.inner.size());
    for (std::size_t j = 0; j < support.size(); ++j)
        w[support[j]] = sub->w[static_cast<Eigen::Index>(j)];
    sub->w = std::move(w);
    return sub;
}

namespace detail
{

struct Attempt
{
    Eigen::VectorXd weights;
    StopReason failure = StopReason::none;
    int iterations = 0;
    double gram_residual = 0.0;
    bool reorthogonalized = false;
    std::vector<int> l1_basis; ///< simplex basis, reused to seed the next degree
};

/// Clamps weights in [-tol, 0) to 0; false if any weight is below -tol.
inline bool clamp_nonnegative(Eigen::VectorXd& w, double tol)
{
    for (Eigen::Index n = 0; n < w.size(); ++n)
    {
        if (w[n] < -tol)
            return false;
        if (w[n] < 0.0)
            w[n] = 0.0;
    }
    return true;
}

inline Attempt attempt_degree(Method method, const DiscreteInnerProduct& inner, const Domain& domain,
                              WeightFunction weight, int degree, double weight_integral_value,
                              const ConstructOptions& opts, const std::vector<int>* warm_basis = nullptr)
{
    Attempt a;
    DegreeSystem sys = formulate_system(inner, domain, weight, degree, opts);
    if (!sys.dop)
    {
        a.failure = sys.failure;
        return a;
    }
    a.gram_residual = sys.dop->gram_residual;
    a.reorthogonalized = sys.dop->reorthogonalized;
    if (method == Method::ls)
        a.weights = explicit_ls_weights(*sys.dop);
    else
    {
        // The l1 minimizer is nonnegative exactly when some nonnegative
        // solution exists, and then any basic nonnegative solution is one.
        std::optional<L1Solution> sol = l1_nonnegative_weights(*sys.dop, opts.simplex, warm_basis);
        if (!sol)
        {
            a.failure = StopReason::negative_weight;
            return a;
        }
        a.weights = std::move(sol->w);
        a.iterations = sol->iterations;
        a.l1_basis = std::move(sol->basis);
    }
    if (!clamp_nonnegative(a.weights, opts.nonneg_tol * weight_integral_value))
        a.failure = StopReason::negative_weight;
    return a;
}

inline CubatureFormula finish(const PointSet& points, Attempt&& a, int degree, Method method, const Domain& domain,
                              WeightFunction weight, int tried, StopReason stop)
{
    CubatureFormula cf{points, std::move(a.weights), degree, 0.0, method, domain, weight, {}};
    cf.kappa = kappa(cf.weights);
    cf.solver.iterations = a.iterations;
    cf.solver.nonzero_count = static_cast<int>((cf.weights.array() != 0.0).count());
    cf.solver.degrees_tried = tried;
    cf.solver.gram_residual = a.gram_residual;
    cf.solver.reorthogonalized = a.reorthogonalized;
    cf.solver.stop_reason = stop;
    return cf;
}

inline CubatureFormula construct(Method method, const PointSet& points, const Domain& domain, WeightFunction weight,
                                 int start_degree, const ConstructOptions& opts)
{
    require_supported(domain, weight);
    detail::require_in_domain(points, domain);
    const DiscreteInnerProduct inner = DiscreteInnerProduct::make(points, domain, weight);
    if (inner.positive_support().empty())
        throw ConstructionError("weight function vanishes at every data point");
    const double i1 = weight_integral(domain, weight);

    int tried = 0;
    // Descend from the start degree until a nonnegative formula is found;
    // degree 0 always succeeds.
    int degree = std::max(0, start_degree);
    Attempt accepted;
    for (;; --degree)
    {
        ++tried;
        accepted = attempt_degree(method, inner, domain, weight, degree, i1, opts);
        if (accepted.failure == StopReason::none)
            break;
        if (degree == 0)
            throw ConstructionError("no nonnegative degree-0 formula (numerical failure)");
    }
    if (degree < start_degree)
        return finish(points, std::move(accepted), degree, method, domain, weight, tried, accepted.failure);

    StopReason stop = StopReason::none;
    for (int d = degree + 1;; ++d)
    {
        if (opts.max_degree && d > *opts.max_degree)
        {
            stop = StopReason::degree_cap;
            break;
        }
        ++tried;
        // The DOPs of degree d extend those of degree d - 1, so the previous
        // optimal basis is a good phase-one start.
        Attempt next = attempt_degree(method, inner, domain, weight, d, i1, opts, &accepted.l1_basis);
        if (next.failure != StopReason::none)
        {
            stop = next.failure;
            break;
        }
        accepted = std::move(next);
        degree = d;
    }
    return finish(points, std::move(accepted), degree, method, domain, weight, tried, stop);
}

} // namespace detail

/// Nonnegative least-squares cubature formula with the highest degree reached
/// by ascending from d = 1 until the system is no longer unisolvent or a
/// weight turns negative.
inline CubatureFormula construct_ls(const PointSet& points, const Domain& domain, WeightFunction weight,
                                    const ConstructOptions& opts = {})
{
    return detail::construct(Method::ls, points, domain, weight, 0, opts);
}

/// Nonnegative l1 cubature formula. `start_degree` (typically the degree of
/// the LS formula on the same points) skips the lower part of the ascent.
inline CubatureFormula construct_l1(const PointSet& points, const Domain& domain, WeightFunction weight,
                                    std::optional<int> start_degree = std::nullopt,
                                    const ConstructOptions& opts = {})
{
    return detail::construct(Method::l1, points, domain, weight, start_degree.value_or(0), opts);
}

/// Raw (unclamped) LS weights at a fixed degree.
inline Eigen::VectorXd ls_weights_at_degree(const PointSet& points, const Domain& domain, WeightFunction weight,
                                            int degree, const ConstructOptions& opts = {})
{
    const DiscreteInnerProduct inner = DiscreteInnerProduct::make(points, domain, weight);
    DegreeSystem sys = formulate_system(inner, domain, weight, degree, opts);
    if (!sys.dop)
        throw ConstructionError("degree " + std::to_string(degree) + " system cannot be formulated: " +
                                std::string(to_string(sys.failure)));
    return explicit_ls_weights(*sys.dop);
}

/// max_k |C_N[e_k] - I[e_k]| / (1 + |I[e_k]|) over all monomials of degree <= cf.degree.
inline double exactness_defect(const CubatureFormula& cf)
{
    if (cf.degree < 0)
        return 0.0;
    const MonomialBasis basis = enumerate_multi_indices(cf.domain.dim, cf.degree);
    const RowMatrix e = eval_monomials(basis, cf.points);
    const Eigen::VectorXd approx = e * cf.weights;
    double worst = 0.0;
    for (int k = 0; k < basis.size(); ++k)
    {
        const double exact = monomial_moment(cf.domain, cf.weight, basis.indices[k]);
        worst = std::max(worst, std::abs(approx[k] - exact) / (1.0 + std::abs(exact)));
    }
    return worst;
}

struct NoisyData
{
    Eigen::VectorXd values;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
};

/// f_n + Z_n with Z_n i.i.d. uniform on [-epsilon, epsilon].
inline NoisyData add_noise(const Eigen::Ref<const Eigen::VectorXd>& values, double epsilon, std::uint64_t seed)
{
    if (!(epsilon >= 0.0))
        throw InputError("noise level must be >= 0");
    std::mt19937_64 gen(seed);
    NoisyData out{values, epsilon, seed};
    for (Eigen::Index n = 0; n < values.size(); ++n)
    {
        const double z = epsilon * (2.0 * uniform01(gen) - 1.0);
        out.values[n] += z;
    }
    return out;
}

inline nlohmann::json to_json(const CubatureFormula& cf)
{
    nlohmann::json j;
    j["method"] = to_string(cf.method);
    j["domain"] = to_string(cf.domain.kind);
    j["weight"] = to_string(cf.weight.kind);
    j["q"] = cf.domain.dim;
    j["d"] = cf.degree;
    j["K"] = cf.basis_size();
    j["N"] = cf.size();
    j["kappa"] = cf.kappa;
    nlohmann::json pts = nlohmann::json::array();
    for (int n = 0; n < cf.points.size(); ++n)
    {
        nlohmann::json row = nlohmann::json::array();
        for (int i = 0; i < cf.points.dim(); ++i)
            row.push_back(cf.points.point(n)[i]);
        pts.push_back(std::move(row));
    }
    j["points"] = std::move(pts);
    j["weights"] = std::vector<double>(cf.weights.data(), cf.weights.data() + cf.weights.size());
    j["provenance"] = cf.points.provenance().to_json();
    j["solver"] = {{"iterations", cf.solver.iterations},
                   {"nonzero_count", cf.solver.nonzero_count},
                   {"degrees_tried", cf.solver.degrees_tried},
                   {"gram_residual", cf.solver.gram_residual},
                   {"reorthogonalized", cf.solver.reorthogonalized},
                   {"stop_reason", to_string(cf.solver.stop_reason)}};
    return j;
}

inline CubatureFormula cubature_from_json(const nlohmann::json& j)
{
    try
    {
        CubatureFormula cf;
        cf.method = parse_method(j.at("method").get<std::string>());
        cf.domain = Domain::make(parse_domain_kind(j.at("domain").get<std::string>()), j.at("q").get<int>());
        cf.weight = WeightFunction{parse_weight_kind(j.at("weight").get<std::string>())};
        cf.degree = j.at("d").get<int>();
        const auto w = j.at("weights").get<std::vector<double>>();
        cf.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        Eigen::MatrixXd coords(cf.domain.dim, static_cast<Eigen::Index>(w.size()));
        if (j.contains("points"))
        {
            const auto& pts = j.at("points");
            if (pts.size() != w.size())
                throw InputError("CF JSON: points and weights differ in length");
            for (std::size_t n = 0; n < pts.size(); ++n)
                for (int i = 0; i < cf.domain.dim; ++i)
                    coords(i, static_cast<Eigen::Index>(n)) = pts[n].at(static_cast<std::size_t>(i)).get<double>();
        }
        Provenance p;
        p.family = "file";
        cf.points = PointSet(std::move(coords), p);
        cf.kappa = kappa(cf.weights);
        return cf;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw InputError(std::string("malformed cubature JSON: ") + e.what());
    }
}

} // namespace stablecub
