#pragma once

// Integration domains (cube [-1,1]^q and unit ball), their weight functions
// and closed-form monomial moments.

#include "stablecub/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace stablecub
{

enum class DomainKind
{
    cube,
    ball
};

struct Domain
{
    DomainKind kind = DomainKind::cube;
    int dim = 1;

    static Domain cube(int q) { return make(DomainKind::cube, q); }
    static Domain ball(int q) { return make(DomainKind::ball, q); }

    static Domain make(DomainKind kind, int q)
    {
        if (q < 1)
            throw InputError("domain dimension must be >= 1, got " + std::to_string(q));
        return Domain{kind, q};
    }

    friend bool operator==(const Domain&, const Domain&) = default;
};

enum class WeightKind
{
    constant,
    chebyshev2_product,
    sqrt_radius
};

struct WeightFunction
{
    WeightKind kind = WeightKind::constant;

    friend bool operator==(const WeightFunction&, const WeightFunction&) = default;
};

struct MultiIndex
{
    std::vector<int> exponents;

    int dim() const { return static_cast<int>(exponents.size()); }
    int total_degree() const { return std::accumulate(exponents.begin(), exponents.end(), 0); }

    bool has_odd_component() const
    {
        for (int e : exponents)
            if (e % 2 != 0)
                return true;
        return false;
    }

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
    friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;
};

inline std::string_view to_string(DomainKind k)
{
    return k == DomainKind::cube ? "cube" : "ball";
}

inline std::string_view to_string(WeightKind k)
{
    switch (k)
    {
    case WeightKind::constant: return "const";
    case WeightKind::chebyshev2_product: return "cheb2";
    case WeightKind::sqrt_radius: return "sqrt_radius";
    }
    return "?";
}

inline DomainKind parse_domain_kind(std::string_view s)
{
    if (s == "cube")
        return DomainKind::cube;
    if (s == "ball")
        return DomainKind::ball;
    throw InputError("unknown domain '" + std::string(s) + "' (expected cube|ball)");
}

inline WeightKind parse_weight_kind(std::string_view s)
{
    if (s == "const" || s == "constant")
        return WeightKind::constant;
    if (s == "cheb2" || s == "chebyshev2" || s == "chebyshev2_product")
        return WeightKind::chebyshev2_product;
    if (s == "sqrt_radius" || s == "sqrtr")
        return WeightKind::sqrt_radius;
    throw InputError("unknown weight '" + std::string(s) + "' (expected const|cheb2|sqrt_radius)");
}

inline bool is_supported(const Domain& domain, WeightFunction w)
{
    switch (w.kind)
    {
    case WeightKind::constant: return true;
    case WeightKind::chebyshev2_product: return domain.kind == DomainKind::cube;
    case WeightKind::sqrt_radius: return domain.kind == DomainKind::ball;
    }
    return false;
}

inline void require_supported(const Domain& domain, WeightFunction w)
{
    if (!is_supported(domain, w))
        throw InputError("weight '" + std::string(to_string(w.kind)) + "' is not defined on domain '" +
                         std::string(to_string(domain.kind)) + "'");
}

inline double volume(const Domain& domain)
{
    const double q = domain.dim;
    if (domain.kind == DomainKind::cube)
        return std::ldexp(1.0, domain.dim);
    return std::exp(0.5 * q * std::log(std::numbers::pi) - std::lgamma(0.5 * q + 1.0));
}

inline bool contains(const Domain& domain, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    if (x.size() != domain.dim)
        throw InputError("point dimension " + std::to_string(x.size()) + " does not match domain dimension " +
                         std::to_string(domain.dim));
    if (domain.kind == DomainKind::cube)
        return x.cwiseAbs().maxCoeff() <= 1.0;
    return x.squaredNorm() <= 1.0;
}

/// Weight function value at x; the (domain, weight) pairing is validated.
inline double weight_eval(const Domain& domain, WeightFunction w, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    require_supported(domain, w);
    switch (w.kind)
    {
    case WeightKind::constant: return 1.0;
    case WeightKind::chebyshev2_product:
    {
        double v = 1.0;
        for (Eigen::Index i = 0; i < x.size(); ++i)
            v *= std::sqrt(std::max(0.0, 1.0 - x[i] * x[i]));
        return v;
    }
    case WeightKind::sqrt_radius: return std::sqrt(x.norm());
    }
    return 0.0;
}

namespace detail
{

// 1-D moments on [-1,1].
inline double legendre_moment_1d(int k)
{
    return (k % 2 != 0) ? 0.0 : 2.0 / (k + 1);
}

inline double chebyshev2_moment_1d(int k)
{
    if (k % 2 != 0)
        return 0.0;
    double m = std::numbers::pi / 2;
    for (int j = 2; j <= k; j += 2)
        m *= static_cast<double>(j - 1) / (j + 2);
    return m;
}

} // namespace detail

/// Exact I[x^k] for the supported (domain, weight) pairs. Ball moments go
/// through log-gamma so large degrees do not overflow.
inline double monomial_moment(const Domain& domain, WeightFunction w, const MultiIndex& k)
{
    require_supported(domain, w);
    if (k.dim() != domain.dim)
        throw InputError("multi-index dimension does not match domain");

    if (domain.kind == DomainKind::cube)
    {
        double m = 1.0;
        for (int e : k.exponents)
            m *= (w.kind == WeightKind::constant) ? detail::legendre_moment_1d(e) : detail::chebyshev2_moment_1d(e);
        return m;
    }

    if (k.has_odd_component())
        return 0.0;
    double log_num = 0.0;
    double beta_sum = 0.0;
    for (int e : k.exponents)
    {
        const double beta = 0.5 * (e + 1);
        log_num += std::lgamma(beta);
        beta_sum += beta;
    }
    double denom = k.total_degree() + domain.dim;
    if (w.kind == WeightKind::sqrt_radius)
        denom += 0.5;
    return 2.0 / denom * std::exp(log_num - std::lgamma(beta_sum));
}

/// I[1] = integral of the weight function over the domain.
inline double weight_integral(const Domain& domain, WeightFunction w)
{
    return monomial_moment(domain, w, MultiIndex{std::vector<int>(domain.dim, 0)});
}

/// Thread-safe memo of monomial moment vectors keyed by (domain, weight, degree).
/// The stored vector follows the graded ordering of the monomial basis passed in.
class MomentCache
{
public:
    const std::vector<double>& get(const Domain& domain, WeightFunction w, int degree,
                                   const std::vector<MultiIndex>& indices)
    {
        const Key key{static_cast<int>(domain.kind), domain.dim, static_cast<int>(w.kind), degree};
        {
            std::shared_lock lock(mutex_);
            if (auto it = table_.find(key); it != table_.end())
                return *it->second;
        }
        auto values = std::make_unique<std::vector<double>>();
        values->reserve(indices.size());
        for (const auto& idx : indices)
            values->push_back(monomial_moment(domain, w, idx));
        std::unique_lock lock(mutex_);
        auto [it, inserted] = table_.try_emplace(key, std::move(values));
        return *it->second;
    }

    static MomentCache& global()
    {
        static MomentCache cache;
        return cache;
    }

private:
    using Key = std::tuple<int, int, int, int>;
    std::shared_mutex mutex_;
    std::map<Key, std::unique_ptr<std::vector<double>>> table_;
};

} // namespace stablecub
