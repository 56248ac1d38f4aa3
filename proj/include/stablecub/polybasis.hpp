#pragma once

// Graded monomial bases, the weighted discrete inner product and discrete
// orthonormal polynomials (DOPs) built by modified Gram-Schmidt, with the
// moments I[pi_k] carried along in the same recurrence.

#include "stablecub/domains.hpp"
#include "stablecub/errors.hpp"
#include "stablecub/pointsets.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

namespace stablecub
{

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// C(d+q, q) without overflow for the sizes used here.
inline long long binomial(int n, int k)
{
    if (k < 0 || k > n)
        return 0;
    k = std::min(k, n - k);
    long long r = 1;
    for (int i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return r;
}

inline long long basis_size(int q, int d)
{
    return d < 0 ? 0 : binomial(d + q, q);
}

struct MonomialBasis
{
    int dim = 1;
    int degree = 0;
    std::vector<MultiIndex> indices;

    int size() const { return static_cast<int>(indices.size()); }
};

namespace detail
{

// All exponent vectors of total degree t in lexicographically descending order,
// e.g. t = 2, q = 2: (2,0), (1,1), (0,2).
inline void append_degree(int q, int t, std::vector<MultiIndex>& out)
{
    std::vector<int> e(q, 0);
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == q - 1)
        {
            e[pos] = remaining;
            out.push_back(MultiIndex{e});
            return;
        }
        for (int v = remaining; v >= 0; --v)
        {
            e[pos] = v;
            self(self, pos + 1, remaining - v);
        }
    };
    rec(rec, 0, t);
}

} // namespace detail

/// Graded-lexicographic enumeration of all multi-indices with |alpha| <= d.
inline MonomialBasis enumerate_multi_indices(int q, int d)
{
    if (q < 1 || d < 0)
        throw InputError("enumerate_multi_indices needs q >= 1 and d >= 0");
    MonomialBasis b{q, d, {}};
    b.indices.reserve(static_cast<std::size_t>(basis_size(q, d)));
    for (int t = 0; t <= d; ++t)
        detail::append_degree(q, t, b.indices);
    return b;
}

/// K x N matrix of monomial values, entry (k, n) = x_n^{alpha_k}.
inline RowMatrix eval_monomials(const MonomialBasis& basis, const Eigen::MatrixXd& points)
{
    if (points.rows() != basis.dim)
        throw InputError("eval_monomials: point dimension does not match basis dimension");
    const Eigen::Index n_pts = points.cols();
    const int q = basis.dim;
    const int d = basis.degree;

    // powers[i](p, n) = x_n[i]^p
    std::vector<Eigen::MatrixXd> powers(q, Eigen::MatrixXd(d + 1, n_pts));
    for (int i = 0; i < q; ++i)
    {
        powers[i].row(0).setOnes();
        for (int p = 1; p <= d; ++p)
            powers[i].row(p) = powers[i].row(p - 1).cwiseProduct(points.row(i));
    }

    RowMatrix values(basis.size(), n_pts);
    for (int k = 0; k < basis.size(); ++k)
    {
        const auto& e = basis.indices[k].exponents;
        values.row(k) = powers[0].row(e[0]);
        for (int i = 1; i < q; ++i)
            if (e[i] != 0)
                values.row(k) = values.row(k).cwiseProduct(powers[i].row(e[i]));
    }
    return values;
}

inline RowMatrix eval_monomials(const MonomialBasis& basis, const PointSet& points)
{
    return eval_monomials(basis, points.coords());
}

/// [u, v]_N = sum_n r_n u(x_n) v(x_n) on a fixed point set.
struct DiscreteInnerProduct
{
    PointSet points;
    Eigen::VectorXd r;

    /// r_n = omega(x_n) |Omega| / N.
    static DiscreteInnerProduct make(const PointSet& points, const Domain& domain, WeightFunction w)
    {
        require_supported(domain, w);
        if (points.dim() != domain.dim)
            throw InputError("point dimension does not match domain dimension");
        const double scale = volume(domain) / points.size();
        Eigen::VectorXd r(points.size());
        for (int n = 0; n < points.size(); ++n)
            r[n] = weight_eval(domain, w, points.point(n)) * scale;
        return DiscreteInnerProduct{points, std::move(r)};
    }

    int size() const { return static_cast<int>(r.size()); }

    /// Indices n with r_n > 0 (the set X+).
    std::vector<int> positive_support() const
    {
        std::vector<int> idx;
        for (Eigen::Index n = 0; n < r.size(); ++n)
            if (r[n] > 0.0)
                idx.push_back(static_cast<int>(n));
        return idx;
    }
};

inline double discrete_inner_product(const DiscreteInnerProduct& inner, std::span<const double> u,
                                     std::span<const double> v)
{
    if (u.size() != static_cast<std::size_t>(inner.size()) || v.size() != u.size())
        throw InputError("discrete_inner_product: length mismatch (" + std::to_string(u.size()) + ", " +
                         std::to_string(v.size()) + ", r has " + std::to_string(inner.size()) + ")");
    double s = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n)
        s += inner.r[static_cast<Eigen::Index>(n)] * u[n] * v[n];
    return s;
}

struct DOPBasis
{
    MonomialBasis basis;
    DiscreteInnerProduct inner;
    RowMatrix coeffs;         ///< K x K lower triangular; pi_k = sum_j coeffs(k, j) e_j
    RowMatrix values;         ///< K x N, values(k, n) = pi_k(x_n)
    Eigen::VectorXd moments;  ///< I[pi_k]
    bool reorthogonalized = false;
    double gram_residual = 0.0; ///< max |[pi_k, pi_l]_N - delta_kl|

    int size() const { return basis.size(); }
};

/// max_{k,l} |(V R V^T - I)_{kl}|.
inline double gram_residual(const RowMatrix& values, const Eigen::VectorXd& r)
{
    const RowMatrix scaled = values * r.cwiseSqrt().asDiagonal();
    Eigen::MatrixXd g = scaled * scaled.transpose();
    g.diagonal().array() -= 1.0;
    return g.cwiseAbs().maxCoeff();
}

struct DopOptions
{
    double breakdown_tol = 1e-12;     ///< relative to ||e_k||_N
    double reorth_threshold = 1e-10;  ///< Gram residual that triggers a second pass
    double accept_threshold = 1e-8;   ///< Gram residual above this after reorthogonalization is a breakdown
};

namespace detail
{

inline void modified_gram_schmidt(RowMatrix& v, RowMatrix& c, Eigen::VectorXd& m, const Eigen::VectorXd& r,
                                  int passes, double breakdown_tol)
{
    const Eigen::Index K = v.rows();
    RowMatrix weighted(K, v.cols()); // weighted.row(l) = r .* pi_l, filled as rows finish
    for (Eigen::Index k = 0; k < K; ++k)
    {
        const double ref_norm = std::sqrt((v.row(k).array().square() * r.transpose().array()).sum());
        for (int pass = 0; pass < passes; ++pass)
        {
            for (Eigen::Index l = 0; l < k; ++l)
            {
                const double proj = v.row(k).dot(weighted.row(l));
                v.row(k) -= proj * v.row(l);
                c.row(k).head(l + 1) -= proj * c.row(l).head(l + 1);
                m[k] -= proj * m[l];
            }
        }
        const double nrm = std::sqrt((v.row(k).array().square() * r.transpose().array()).sum());
        if (!(nrm > breakdown_tol * ref_norm) || nrm == 0.0)
            throw BreakdownError("Gram-Schmidt breakdown at basis function " + std::to_string(k) +
                                     " (discrete norm " + std::to_string(nrm) + ")",
                                 static_cast<int>(k));
        v.row(k) /= nrm;
        c.row(k).head(k + 1) /= nrm;
        m[k] /= nrm;
        weighted.row(k) = v.row(k).cwiseProduct(r.transpose());
    }
}

} // namespace detail

/// Discrete orthonormal polynomials for `inner` spanning the monomials in
/// `basis`, by modified Gram-Schmidt. `monomial_moments[k]` must be I[e_k];
/// the returned `moments` are I[pi_k]. When the Gram residual after one sweep
/// exceeds opts.reorth_threshold, the basis is rebuilt with every projection
/// applied twice.
inline DOPBasis build_dop(const MonomialBasis& basis, const DiscreteInnerProduct& inner,
                          std::span<const double> monomial_moments, const DopOptions& opts = {})
{
    const int K = basis.size();
    if (static_cast<int>(monomial_moments.size()) != K)
        throw InputError("build_dop: expected " + std::to_string(K) + " monomial moments, got " +
                         std::to_string(monomial_moments.size()));
    if (inner.points.dim() != basis.dim)
        throw InputError("build_dop: point dimension does not match basis dimension");

    const RowMatrix e = eval_monomials(basis, inner.points);
    const Eigen::VectorXd mono = Eigen::Map<const Eigen::VectorXd>(monomial_moments.data(), K);

    DOPBasis dop{basis, inner, {}, {}, {}, false, 0.0};
    for (int passes = 1; passes <= 2; ++passes)
    {
        dop.values = e;
        dop.coeffs = RowMatrix::Identity(K, K);
        dop.moments = mono;
        detail::modified_gram_schmidt(dop.values, dop.coeffs, dop.moments, inner.r, passes, opts.breakdown_tol);
        dop.reorthogonalized = passes == 2;
        dop.gram_residual = gram_residual(dop.values, inner.r);
        if (dop.gram_residual <= opts.reorth_threshold)
            return dop;
    }
    if (dop.gram_residual > opts.accept_threshold)
        throw BreakdownError("discrete orthonormal basis lost orthogonality (Gram residual " +
                                 std::to_string(dop.gram_residual) + ")",
                             K - 1);
    return dop;
}

inline DOPBasis build_dop(const MonomialBasis& basis, const DiscreteInnerProduct& inner,
                          const std::vector<double>& monomial_moments, const DopOptions& opts = {})
{
    return build_dop(basis, inner, std::span<const double>(monomial_moments), opts);
}

} // namespace stablecub
