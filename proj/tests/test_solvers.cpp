#include "oracles.hpp"
#include "stablecub/cubature.hpp"
#include "stablecub/solvers.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace stablecub;

namespace
{
Eigen::MatrixXd mat(int rows, int cols, std::initializer_list<double> xs)
{
    Eigen::MatrixXd m(rows, cols);
    auto it = xs.begin();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = *it++;
    return m;
}

Eigen::VectorXd vec(std::initializer_list<double> xs)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs)
        v[i++] = x;
    return v;
}

struct RandomSystem
{
    Eigen::MatrixXd p;
    Eigen::VectorXd m;
    Eigen::VectorXd r;
};

// Random full-row-rank systems with K <= kmax rows and K < N <= nmax columns.
std::vector<RandomSystem> random_systems(int count, int kmax, int nmax, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<RandomSystem> out;
    while (static_cast<int>(out.size()) < count)
    {
        const int K = 1 + static_cast<int>(gen() % kmax);
        const int N = K + 1 + static_cast<int>(gen() % (nmax - K));
        RandomSystem s{Eigen::MatrixXd(K, N), Eigen::VectorXd(K), Eigen::VectorXd(N)};
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < N; ++j)
                s.p(i, j) = u(gen);
        for (int i = 0; i < K; ++i)
            s.m[i] = u(gen);
        for (int j = 0; j < N; ++j)
            s.r[j] = 0.1 + std::abs(u(gen));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.p);
        if (svd.singularValues().minCoeff() < 1e-3)
            continue;
        out.push_back(std::move(s));
    }
    return out;
}

// DOP exactness systems taken from actual point sets.
std::vector<DOPBasis> dop_systems()
{
    std::vector<DOPBasis> out;
    const WeightFunction constant{WeightKind::constant};
    const WeightFunction cheb2{WeightKind::chebyshev2_product};
    auto grab = [&](const PointSet& ps, const Domain& dom, WeightFunction w, int d) {
        const auto inner = DiscreteInnerProduct::make(ps, dom, w);
        auto sys = formulate_system(inner, dom, w, d);
        if (sys.dop)
            out.push_back(*sys.dop);
    };
    grab(halton(2, 100), Domain::cube(2), constant, 4);
    grab(halton(2, 400), Domain::cube(2), constant, 9);
    grab(equidistant_grid(2, 16), Domain::cube(2), constant, 8);
    grab(equidistant_grid(2, 12), Domain::cube(2), cheb2, 7);
    grab(restrict_to_ball(halton(2, 300)), Domain::ball(2), WeightFunction{WeightKind::sqrt_radius}, 6);
    grab(halton(3, 300), Domain::cube(3), constant, 4);
    return out;
}

Eigen::MatrixXd support_columns(const DOPBasis& dop)
{
    const auto sup = dop.inner.positive_support();
    Eigen::MatrixXd p(dop.values.rows(), static_cast<Eigen::Index>(sup.size()));
    for (std::size_t j = 0; j < sup.size(); ++j)
        p.col(static_cast<Eigen::Index>(j)) = dop.values.col(sup[j]);
    return p;
}
} // namespace

TEST(RankOf, Examples)
{
    EXPECT_EQ(rank_of(Eigen::MatrixXd::Identity(3, 3)).rank, 3);
    EXPECT_LT(rank_of(mat(3, 3, {1, 2, 3, 4, 5, 6, 1, 2, 3})).rank, 3);
    const RowMatrix v = eval_monomials(enumerate_multi_indices(1, 2), Eigen::MatrixXd(mat(1, 3, {-1, 0, 1})));
    EXPECT_EQ(rank_of(v).rank, 3);
}

TEST(RankOf, ReportFields)
{
    const Eigen::MatrixXd a = mat(2, 4, {1, 0, 0, 0, 0, 1e-3, 0, 0});
    const RankReport r = rank_of(a);
    EXPECT_EQ(r.rank, 2);
    ASSERT_EQ(r.pivot_values.size(), 2);
    EXPECT_GE(r.pivot_values[0], r.pivot_values[1]);
    EXPECT_NEAR(r.tolerance_used, 4 * std::numeric_limits<double>::epsilon() * 1.0, 1e-30);
    EXPECT_EQ(rank_of(Eigen::MatrixXd::Zero(3, 5)).rank, 0);
}

TEST(RankOf, BoundedByDimensions)
{
    for (const auto& s : random_systems(20, 6, 12, 3))
    {
        const int rk = rank_of(s.p).rank;
        EXPECT_GE(rk, 0);
        EXPECT_LE(rk, std::min(s.p.rows(), s.p.cols()));
    }
}

TEST(MinNormWeightedLs, Examples)
{
    const Eigen::VectorXd a = min_norm_weighted_ls(mat(1, 2, {1, 1}), vec({2}), vec({1, 1}));
    EXPECT_NEAR(a[0], 1.0, 1e-15);
    EXPECT_NEAR(a[1], 1.0, 1e-15);
    const Eigen::VectorXd b = min_norm_weighted_ls(mat(1, 2, {1, 1}), vec({2}), vec({3, 1}));
    EXPECT_NEAR(b[0], 1.5, 1e-15);
    EXPECT_NEAR(b[1], 0.5, 1e-15);

    // three-point DOP system on [-1, 1]: pi_1 = 1/sqrt2, pi_2 = sqrt3/2 x
    const double s2 = 1.0 / std::sqrt(2.0), s3 = std::sqrt(3.0) / 2.0;
    const Eigen::VectorXd c = min_norm_weighted_ls(mat(2, 3, {s2, s2, s2, -s3, 0, s3}), vec({std::sqrt(2.0), 0}),
                                                   vec({2.0 / 3, 2.0 / 3, 2.0 / 3}));
    for (int n = 0; n < 3; ++n)
        EXPECT_NEAR(c[n], 2.0 / 3.0, 1e-15);
}

TEST(MinNormWeightedLs, ZeroWeightComponentsFixedToZero)
{
    const Eigen::VectorXd w = min_norm_weighted_ls(mat(1, 3, {1, 1, 1}), vec({2}), vec({1, 0, 1}));
    EXPECT_EQ(w[1], 0.0);
    EXPECT_NEAR(w[0], 1.0, 1e-15);
    EXPECT_NEAR(w[2], 1.0, 1e-15);
}

TEST(MinNormWeightedLs, RankDeficientThrows)
{
    EXPECT_THROW(min_norm_weighted_ls(mat(2, 2, {1, 1, 2, 2}), vec({1, 2}), vec({1, 1})), RankDeficientError);
    EXPECT_THROW(min_norm_weighted_ls(mat(2, 3, {1, 1, 1, 0, 1, 2}), vec({1, 2}), vec({0, 0, 1})),
                 RankDeficientError);
}

TEST(MinNormWeightedLs, MatchesExplicitPseudoinverse)
{
    for (const auto& s : random_systems(50, 6, 20, 11))
    {
        const Eigen::VectorXd w = min_norm_weighted_ls(s.p, s.m, s.r);
        const Eigen::VectorXd ref = oracle::weighted_min_norm_explicit(s.p, s.m, s.r);
        EXPECT_LE((w - ref).norm(), 1e-9 * ref.norm());
    }
}

TEST(MinNormWeightedLs, OptimalityCertificate)
{
    // R^{-1} w lies in the row space of P
    for (const auto& s : random_systems(30, 6, 20, 12))
    {
        const Eigen::VectorXd w = min_norm_weighted_ls(s.p, s.m, s.r);
        EXPECT_LE((s.p * w - s.m).lpNorm<Eigen::Infinity>(), 1e-12);
        const Eigen::VectorXd z = w.cwiseQuotient(s.r);
        const Eigen::VectorXd y = s.p.transpose().colPivHouseholderQr().solve(z);
        EXPECT_LE((s.p.transpose() * y - z).norm(), 1e-8 * (1.0 + z.norm()));
    }
}

TEST(MinNormWeightedLs, FastPathAgreesWithFactorization)
{
    for (const auto& dop : dop_systems())
    {
        const Eigen::VectorXd fast = min_norm_weighted_ls(dop.values, dop.moments, dop.inner.r);
        // undo the orthonormality so the general path is taken
        const Eigen::MatrixXd mix = Eigen::MatrixXd::Identity(dop.size(), dop.size()) +
                                    0.1 * Eigen::MatrixXd::Ones(dop.size(), dop.size()).triangularView<Eigen::StrictlyLower>().toDenseMatrix();
        const Eigen::VectorXd general = min_norm_weighted_ls(mix * dop.values, mix * dop.moments, dop.inner.r);
        EXPECT_LE((fast - general).lpNorm<Eigen::Infinity>(), 1e-10 * (1.0 + fast.lpNorm<Eigen::Infinity>()));
        EXPECT_LE((fast - explicit_ls_weights(dop)).lpNorm<Eigen::Infinity>(), 1e-14);
    }
}

TEST(L1Minimize, Examples)
{
    const L1Solution a = l1_minimize(mat(2, 3, {1, 0, 1, 0, 1, 1}), vec({1, 1}));
    EXPECT_NEAR(a.w[0], 0.0, 1e-15);
    EXPECT_NEAR(a.w[1], 0.0, 1e-15);
    EXPECT_NEAR(a.w[2], 1.0, 1e-15);
    EXPECT_NEAR(a.objective, 1.0, 1e-15);
    EXPECT_EQ(a.nonzero_count, 1);

    const L1Solution b = l1_minimize(Eigen::MatrixXd::Identity(2, 2), vec({2, 0}));
    EXPECT_NEAR(b.w[0], 2.0, 1e-15);
    EXPECT_NEAR(b.w[1], 0.0, 1e-15);

    const L1Solution c = l1_minimize(mat(2, 3, {1, 0, 1, 0, 1, 1}), vec({2, 0}));
    EXPECT_NEAR(c.objective, 2.0, 1e-15);
    EXPECT_NEAR(c.w[0], 2.0, 1e-15);
}

TEST(L1Minimize, NegativeWeightsWhenNeeded)
{
    // w1 + w2 = 0, w1 - w2 = 2 forces w = (1, -1)
    const L1Solution s = l1_minimize(mat(2, 2, {1, 1, 1, -1}), vec({0, 2}));
    EXPECT_NEAR(s.w[0], 1.0, 1e-15);
    EXPECT_NEAR(s.w[1], -1.0, 1e-15);
    EXPECT_NEAR(s.objective, 2.0, 1e-15);
}

TEST(L1Minimize, InfeasibleSystemThrows)
{
    EXPECT_THROW(l1_minimize(mat(2, 2, {1, 1, 1, 1}), vec({1, 2})), ConstructionError);
    EXPECT_THROW(l1_minimize(mat(1, 2, {1, 1}), vec({1, 2})), InputError);
}

TEST(L1Minimize, MatchesVertexEnumeration)
{
    for (const auto& s : random_systems(60, 4, 8, 21))
    {
        const L1Solution sol = l1_minimize(s.p, s.m);
        const double ref = oracle::l1_by_vertex_enumeration(s.p, s.m);
        EXPECT_NEAR(sol.objective, ref, 1e-9);
        EXPECT_NEAR(sol.objective, sol.w.lpNorm<1>(), 1e-12);
        EXPECT_LE(sol.nonzero_count, s.p.rows());
        EXPECT_LE((s.p * sol.w - s.m).lpNorm<Eigen::Infinity>(), 1e-9 * (1.0 + s.m.lpNorm<Eigen::Infinity>()));
    }
}

TEST(L1Minimize, NeverWorseThanLeastSquares)
{
    for (const auto& s : random_systems(40, 6, 30, 31))
    {
        const L1Solution l1 = l1_minimize(s.p, s.m);
        const Eigen::VectorXd ls = min_norm_weighted_ls(s.p, s.m, s.r);
        EXPECT_LE(l1.objective, ls.lpNorm<1>() + 1e-9);
    }
    for (const auto& dop : dop_systems())
    {
        const L1Solution l1 = l1_weights(dop);
        EXPECT_LE(l1.objective, explicit_ls_weights(dop).lpNorm<1>() + 1e-9);
        EXPECT_LE(l1.nonzero_count, dop.size());
        EXPECT_LE((dop.values * l1.w - dop.moments).lpNorm<Eigen::Infinity>(),
                  1e-9 * (1.0 + dop.moments.lpNorm<Eigen::Infinity>()));
    }
}

TEST(L1Minimize, ObjectiveIndependentOfPivotRules)
{
    SimplexOptions early_bland;
    early_bland.degenerate_run_for_bland = 5;
    SimplexOptions unscaled;
    unscaled.scaled_pricing = false;
    for (const auto& dop : dop_systems())
    {
        const double a = l1_weights(dop).objective;
        EXPECT_NEAR(l1_weights(dop, early_bland).objective, a, 1e-9 * (1.0 + a));
        EXPECT_NEAR(l1_weights(dop, unscaled).objective, a, 1e-9 * (1.0 + a));
    }
    // Bland's rule from the first pivot
    SimplexOptions bland;
    bland.degenerate_run_for_bland = 0;
    for (const auto& s : random_systems(40, 4, 8, 41))
        EXPECT_NEAR(l1_minimize(s.p, s.m, bland).objective, oracle::l1_by_vertex_enumeration(s.p, s.m), 1e-9);
}

TEST(L1Minimize, WarmStartFromPrefixSystem)
{
    const WeightFunction constant{WeightKind::constant};
    const auto inner = DiscreteInnerProduct::make(halton(2, 300), Domain::cube(2), constant);
    const auto lo = formulate_system(inner, Domain::cube(2), constant, 6);
    const auto hi = formulate_system(inner, Domain::cube(2), constant, 7);
    ASSERT_TRUE(lo.dop && hi.dop);
    const L1Solution first = l1_weights(*lo.dop);
    const L1Solution cold = l1_weights(*hi.dop);
    const L1Solution warm = l1_weights(*hi.dop, {}, &first.basis);
    EXPECT_NEAR(warm.objective, cold.objective, 1e-9 * (1.0 + cold.objective));
    EXPECT_LE(warm.nonzero_count, hi.dop->size());
    // a nonsense warm basis is ignored rather than trusted
    const std::vector<int> junk{0, 0, 1};
    EXPECT_NEAR(l1_weights(*hi.dop, {}, &junk).objective, cold.objective, 1e-9 * (1.0 + cold.objective));
}

TEST(NonnegativeBasicSolution, FeasibleAndInfeasible)
{
    EXPECT_FALSE(nonnegative_basic_solution(mat(1, 2, {1, 1}), vec({-1})));
    const auto s = nonnegative_basic_solution(mat(2, 3, {1, 1, 1, -1, 0, 1}), vec({2, 0}));
    ASSERT_TRUE(s);
    EXPECT_GE(s->w.minCoeff(), 0.0);
    EXPECT_NEAR(s->w.sum(), 2.0, 1e-15);
    EXPECT_LE(s->nonzero_count, 2);
}

TEST(NonnegativeBasicSolution, EqualsL1OptimumOnExactnessSystems)
{
    for (const auto& dop : dop_systems())
    {
        const Eigen::MatrixXd p = support_columns(dop);
        const auto nn = nonnegative_basic_solution(p, dop.moments);
        const L1Solution full = l1_minimize(p, dop.moments);
        // pi_1 = 1 / ||1||_N and m_1 = I[1] / ||1||_N
        const double i1 = dop.moments[0] / dop.values(0, dop.inner.positive_support()[0]);
        if (nn)
        {
            EXPECT_GE(nn->w.minCoeff(), -1e-12);
            EXPECT_NEAR(nn->objective, full.objective, 1e-9 * (1.0 + full.objective));
            EXPECT_NEAR(nn->objective, i1, 1e-9 * i1);
        }
        else
        {
            // no nonnegative solution: the true l1 optimum must exceed I[1]
            EXPECT_GT(full.objective, i1 * (1.0 + 1e-12));
        }
    }
}
