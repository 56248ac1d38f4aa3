#pragma once

// Dense kernels used by the cubature constructions: numerical rank,
// weighted minimum-norm solutions of underdetermined systems and
// equality-constrained l1 minimization.

#include "stablecub/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace stablecub
{

struct RankReport
{
    int rank = 0;
    Eigen::VectorXd pivot_values; ///< |R_ii| of the column-pivoted QR, nonincreasing
    double tolerance_used = 0.0;
};

/// Numerical rank of a K x N matrix from a column-pivoted Householder QR.
/// tolerance = max(K, N) * eps * (largest pivot).
inline RankReport rank_of(const Eigen::Ref<const Eigen::MatrixXd>& a)
{
    RankReport report;
    if (a.rows() == 0 || a.cols() == 0)
        return report;
    // Factor whichever orientation is tall; rank is the same.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    if (a.rows() >= a.cols())
        qr.compute(a);
    else
        qr.compute(a.transpose());
    const Eigen::Index p = std::min(a.rows(), a.cols());
    report.pivot_values = qr.matrixR().diagonal().head(p).cwiseAbs();
    const double largest = report.pivot_values.size() ? report.pivot_values[0] : 0.0;
    report.tolerance_used = static_cast<double>(std::max(a.rows(), a.cols())) *
                            std::numeric_limits<double>::epsilon() * largest;
    for (Eigen::Index i = 0; i < p; ++i)
        if (report.pivot_values[i] > report.tolerance_used)
            ++report.rank;
    return report;
}

/// argmin ||R^{-1/2} w||_2 subject to P w = m, with R = diag(r). Components
/// with r_n = 0 are fixed to 0. If the rows of P are already orthonormal
/// under R (a DOP value matrix), w = R P^T m; otherwise the minimizer is
/// obtained from a QR factorization of R^{1/2} P^T restricted to r_n > 0.
inline Eigen::VectorXd min_norm_weighted_ls(const Eigen::Ref<const Eigen::MatrixXd>& p,
                                            const Eigen::Ref<const Eigen::VectorXd>& m,
                                            const Eigen::Ref<const Eigen::VectorXd>& r)
{
    const Eigen::Index K = p.rows();
    const Eigen::Index N = p.cols();
    if (m.size() != K || r.size() != N)
        throw InputError("min_norm_weighted_ls: dimension mismatch");
    if ((r.array() < 0.0).any())
        throw InputError("min_norm_weighted_ls: negative entry in r");

    std::vector<Eigen::Index> support;
    for (Eigen::Index n = 0; n < N; ++n)
        if (r[n] > 0.0)
            support.push_back(n);
    const auto n_pos = static_cast<Eigen::Index>(support.size());
    if (n_pos < K)
        throw RankDeficientError("min_norm_weighted_ls: fewer positive weights than rows");

    // A = R^{1/2} P^T on the support, N+ x K.
    Eigen::MatrixXd a(n_pos, K);
    for (Eigen::Index j = 0; j < n_pos; ++j)
        a.row(j) = std::sqrt(r[support[j]]) * p.col(support[j]).transpose();

    Eigen::VectorXd w = Eigen::VectorXd::Zero(N);
    Eigen::MatrixXd gram = a.transpose() * a;
    gram.diagonal().array() -= 1.0;
    if (gram.cwiseAbs().maxCoeff() <= 1e-10)
    {
        for (Eigen::Index j = 0; j < n_pos; ++j)
            w[support[j]] = r[support[j]] * p.col(support[j]).dot(m);
        return w;
    }

    // A Pi = Q T. Constraint A^T z = m becomes T^T y = Pi^T m with z = Q y.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < K)
        throw RankDeficientError("min_norm_weighted_ls: system matrix has rank " + std::to_string(qr.rank()) +
                                 " < " + std::to_string(K));
    const Eigen::MatrixXd t = qr.matrixR().topLeftCorner(K, K).template triangularView<Eigen::Upper>();
    const Eigen::VectorXd pm = qr.colsPermutation().transpose() * m;
    const Eigen::VectorXd y = t.transpose().template triangularView<Eigen::Lower>().solve(pm);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n_pos);
    z.head(K) = y;
    z = qr.householderQ() * z;
    for (Eigen::Index j = 0; j < n_pos; ++j)
        w[support[j]] = std::sqrt(r[support[j]]) * z[j];
    return w;
}

struct L1Solution
{
    Eigen::VectorXd w;
    double objective = 0.0;
    int nonzero_count = 0;
    int iterations = 0;
    std::vector<int> basis; ///< structural columns of the final basis (n for +e_n, N + n for -e_n)
};

struct SimplexOptions
{
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-7;      ///< relative to the largest entry of the pivot column
    double feasibility_tol = 1e-9;
    int refactor_interval = 32;
    int degenerate_run_for_bland = 50; ///< consecutive degenerate pivots before Bland's rule takes over
    bool scaled_pricing = true;        ///< rank reduced costs relative to the column norm
};

namespace detail
{

/// Revised primal simplex on  min c^T x  s.t.  A x = b, x >= 0  for the split
/// l1 problem: structural columns 0..N-1 are +P, N..2N-1 are -P, and
/// 2N..2N+K-1 are phase-one artificials. With `nonnegative_only` the -P
/// columns are never priced and only phase one runs, which finds a basic
/// point of {w >= 0 : P w = m}.
///
/// The basis is kept as an LU factorization plus a short eta file and is
/// refactored every `refactor_interval` pivots. Pricing is Dantzig's rule with
/// a Harris two-pass ratio test; after a run of degenerate pivots both choices
/// switch to Bland's smallest-index rule until the objective moves again,
/// which rules out cycling.
class SplitL1Simplex
{
public:
    SplitL1Simplex(const Eigen::Ref<const Eigen::MatrixXd>& p, const Eigen::Ref<const Eigen::VectorXd>& m,
                   const SimplexOptions& opts, const std::vector<int>* warm = nullptr,
                   bool nonnegative_only = false)
        : opts_(opts), K_(p.rows()), N_(p.cols()), p_(p), b_(m), nonneg_only_(nonnegative_only)
    {
        cap_ = 50 * (N_ + K_);
        inv_col_norm_ = Eigen::VectorXd::Ones(N_);
        if (opts_.scaled_pricing)
            for (Eigen::Index j = 0; j < N_; ++j)
            {
                const double nrm = p_.col(j).norm();
                inv_col_norm_[j] = nrm > 0.0 ? 1.0 / nrm : 1.0;
            }
        if (!(warm && warm_start(*warm)))
            cold_start();
    }

    L1Solution solve()
    {
        run_phase(true);
        const double infeas = artificial_sum();
        if (infeas > opts_.feasibility_tol * (1.0 + b_.lpNorm<Eigen::Infinity>()))
            throw InfeasibleError("l1_minimize: constraints are infeasible (phase-one residual " +
                                  std::to_string(infeas) + ")");
        if (!nonneg_only_)
            run_phase(false);
        return extract();
    }

private:
    struct Eta
    {
        Eigen::Index row;
        Eigen::VectorXd alpha;
    };

    Eigen::Index artificial(Eigen::Index i) const { return 2 * N_ + i; }
    bool is_artificial(Eigen::Index j) const { return j >= 2 * N_; }

    Eigen::VectorXd column(Eigen::Index j) const
    {
        if (j < N_)
            return p_.col(j);
        if (j < 2 * N_)
            return -p_.col(j - N_);
        return art_sign_[j - 2 * N_] * Eigen::VectorXd::Unit(K_, j - 2 * N_);
    }

    void set_basis(const std::vector<Eigen::Index>& cols)
    {
        basis_ = cols;
        in_basis_.assign(2 * N_ + K_, -1);
        for (Eigen::Index i = 0; i < K_; ++i)
            in_basis_[basis_[i]] = static_cast<int>(i);
    }

    void cold_start()
    {
        art_sign_.resize(K_);
        std::vector<Eigen::Index> cols(K_);
        for (Eigen::Index i = 0; i < K_; ++i)
        {
            art_sign_[i] = b_[i] < 0.0 ? -1.0 : 1.0;
            cols[i] = artificial(i);
        }
        set_basis(cols);
        refactor();
    }

    // Starts from given structural columns (typically the optimal basis of a
    // system with fewer rows) completed by artificials on the rows those
    // columns do not cover. Gives up if the columns are dependent or the
    // resulting basic solution is not feasible.
    bool warm_start(const std::vector<int>& warm)
    {
        const Eigen::Index s = static_cast<Eigen::Index>(warm.size());
        if (s == 0 || s > K_)
            return false;
        Eigen::MatrixXd cols(K_, s);
        for (Eigen::Index k = 0; k < s; ++k)
        {
            if (warm[k] < 0 || warm[k] >= 2 * N_)
                return false;
            cols.col(k) = column(warm[k]);
        }
        // Prefer the leading rows (the rows the warm basis was optimal for);
        // otherwise cover whichever rows full pivoting selects.
        std::vector<bool> covered(K_, false);
        Eigen::FullPivLU<Eigen::MatrixXd> lead(cols.topRows(s));
        if (lead.isInvertible())
            std::fill(covered.begin(), covered.begin() + s, true);
        else
        {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(cols);
            if (lu.rank() < s)
                return false;
            const auto& perm = lu.permutationP().indices();
            for (Eigen::Index i = 0; i < K_; ++i)
                if (perm[i] < s)
                    covered[i] = true;
        }
        art_sign_ = Eigen::VectorXd::Ones(K_);
        std::vector<Eigen::Index> basis(warm.begin(), warm.end());
        for (Eigen::Index i = 0; i < K_; ++i)
            if (!covered[i])
                basis.push_back(artificial(i));
        set_basis(basis);
        refactor(false);
        for (Eigen::Index i = 0; i < K_; ++i)
        {
            if (!is_artificial(basis_[i]) || xb_[i] >= 0.0)
                continue;
            art_sign_[basis_[i] - 2 * N_] = -1.0;
        }
        refactor(false);
        const double tol = opts_.feasibility_tol * (1.0 + b_.lpNorm<Eigen::Infinity>());
        if (!xb_.allFinite() || xb_.minCoeff() < -tol)
            return false;
        xb_ = xb_.cwiseMax(0.0);
        return true;
    }

    double cost(Eigen::Index j, bool phase_one) const
    {
        if (phase_one)
            return is_artificial(j) ? 1.0 : 0.0;
        return is_artificial(j) ? 0.0 : 1.0;
    }

    double artificial_sum() const
    {
        double s = 0.0;
        for (Eigen::Index i = 0; i < K_; ++i)
            if (is_artificial(basis_[i]))
                s += std::max(0.0, xb_[i]);
        return s;
    }

    void refactor(bool clamp = true)
    {
        Eigen::MatrixXd bmat(K_, K_);
        for (Eigen::Index i = 0; i < K_; ++i)
            bmat.col(i) = column(basis_[i]);
        lu_.compute(bmat);
        etas_.clear();
        xb_ = lu_.solve(b_);
        xb_ += lu_.solve(b_ - bmat * xb_);
        if (clamp)
            xb_ = xb_.cwiseMax(0.0);
    }

    // B^{-1} a
    Eigen::VectorXd ftran(const Eigen::VectorXd& a) const
    {
        Eigen::VectorXd x = lu_.solve(a);
        for (const Eta& e : etas_)
        {
            const double xr = x[e.row] / e.alpha[e.row];
            x -= xr * e.alpha;
            x[e.row] = xr;
        }
        return x;
    }

    // B^{-T} c
    Eigen::VectorXd btran(Eigen::VectorXd c) const
    {
        for (auto it = etas_.rbegin(); it != etas_.rend(); ++it)
        {
            const Eigen::Index r = it->row;
            const double others = it->alpha.dot(c) - it->alpha[r] * c[r];
            c[r] = (c[r] - others) / it->alpha[r];
        }
        return lu_.transpose().solve(c);
    }

    // Entering column: most negative reduced cost, or smallest index with a
    // negative reduced cost in Bland mode. -1 at optimality.
    Eigen::Index entering(bool phase_one) const
    {
        Eigen::VectorXd cb(K_);
        for (Eigen::Index i = 0; i < K_; ++i)
            cb[i] = cost(basis_[i], phase_one);
        const Eigen::VectorXd y = btran(cb);
        const Eigen::VectorXd z = p_.transpose() * y; // y^T a_j for the +P columns
        const double structural_cost = phase_one ? 0.0 : 1.0;
        Eigen::Index best = -1;
        double best_score = 0.0;
        const Eigen::Index last = nonneg_only_ ? N_ : 2 * N_;
        for (Eigen::Index j = 0; j < last; ++j)
        {
            if (in_basis_[j] >= 0)
                continue;
            const double d = j < N_ ? structural_cost - z[j] : structural_cost + z[j - N_];
            if (d >= -opts_.optimality_tol)
                continue;
            if (bland_)
                return j;
            const double score = -d * inv_col_norm_[j < N_ ? j : j - N_];
            if (score > best_score)
            {
                best = j;
                best_score = score;
            }
        }
        return best; // artificials never re-enter
    }

    Eigen::Index leaving(const Eigen::VectorXd& alpha, bool phase_one) const
    {
        const double piv_tol = opts_.pivot_tol * std::max(1.0, alpha.lpNorm<Eigen::Infinity>());
        Eigen::Index leave = -1;

        if (!phase_one)
        {
            // Artificials still basic (at zero) leave first.
            double best = 0.0;
            for (Eigen::Index i = 0; i < K_; ++i)
                if (is_artificial(basis_[i]) && std::abs(alpha[i]) > std::max(piv_tol, best))
                {
                    best = std::abs(alpha[i]);
                    leave = i;
                }
            if (leave >= 0)
                return leave;
        }

        if (bland_)
        {
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < K_; ++i)
            {
                if (alpha[i] <= piv_tol)
                    continue;
                const double ratio = xb_[i] / alpha[i];
                const double tie = 1e-12 * (1.0 + std::abs(best));
                if (leave < 0 || ratio < best - tie || (ratio <= best + tie && basis_[i] < basis_[leave]))
                {
                    best = std::min(best, ratio);
                    leave = i;
                }
            }
            return leave;
        }

        // Harris: bound the step with relaxed feasibility, then take the
        // largest pivot among the rows that block within that bound.
        double bound = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < K_; ++i)
            if (alpha[i] > piv_tol)
                bound = std::min(bound, (xb_[i] + opts_.feasibility_tol) / alpha[i]);
        double best_alpha = 0.0;
        for (Eigen::Index i = 0; i < K_; ++i)
            if (alpha[i] > piv_tol && xb_[i] / alpha[i] <= bound && alpha[i] > best_alpha)
            {
                best_alpha = alpha[i];
                leave = i;
            }
        return leave;
    }

    void run_phase(bool phase_one)
    {
        bland_ = false;
        int degenerate_run = 0;
        for (;;)
        {
            if (static_cast<int>(etas_.size()) >= opts_.refactor_interval)
                refactor();
            const Eigen::Index q = entering(phase_one);
            if (q < 0)
            {
                if (!etas_.empty())
                {
                    // Confirm optimality on a fresh factorization.
                    refactor();
                    if (entering(phase_one) >= 0)
                        continue;
                }
                return;
            }
            if (iterations_ >= cap_)
                throw IterationLimitError("l1_minimize: iteration cap " + std::to_string(cap_) + " exceeded");

            const Eigen::VectorXd alpha = ftran(column(q));
            const Eigen::Index r = leaving(alpha, phase_one);
            if (r < 0)
            {
                if (!etas_.empty())
                {
                    refactor();
                    continue;
                }
                throw ConstructionError("l1_minimize: unbounded direction");
            }
            const double theta = std::max(0.0, xb_[r] / alpha[r]);
            if (is_artificial(basis_[r]) && !phase_one)
                pivot(q, r, alpha, 0.0);
            else
                pivot(q, r, alpha, theta);
            ++iterations_;

            if (theta <= 1e-14)
                ++degenerate_run;
            else
                degenerate_run = 0;
            bland_ = degenerate_run >= opts_.degenerate_run_for_bland;
        }
    }

    void pivot(Eigen::Index q, Eigen::Index r, const Eigen::VectorXd& alpha, double theta)
    {
        xb_ -= theta * alpha;
        xb_[r] = theta;
        for (Eigen::Index i = 0; i < K_; ++i)
            if (xb_[i] < 0.0)
                xb_[i] = 0.0;
        etas_.push_back(Eta{r, alpha});
        in_basis_[basis_[r]] = -1;
        basis_[r] = q;
        in_basis_[q] = static_cast<int>(r);
    }

    L1Solution extract()
    {
        refactor();
        L1Solution sol;
        sol.w = Eigen::VectorXd::Zero(N_);
        const double zero_level = 1e-14 * (1.0 + b_.lpNorm<Eigen::Infinity>());
        for (Eigen::Index i = 0; i < K_; ++i)
        {
            const Eigen::Index j = basis_[i];
            const double x = std::abs(xb_[i]) <= zero_level ? 0.0 : xb_[i];
            if (j < N_)
                sol.w[j] += x;
            else if (j < 2 * N_)
                sol.w[j - N_] -= x;
        }
        sol.objective = sol.w.lpNorm<1>();
        sol.nonzero_count = static_cast<int>((sol.w.array() != 0.0).count());
        sol.iterations = iterations_;
        for (Eigen::Index j : basis_)
            if (!is_artificial(j))
                sol.basis.push_back(static_cast<int>(j));
        return sol;
    }

    SimplexOptions opts_;
    Eigen::Index K_;
    Eigen::Index N_;
    Eigen::MatrixXd p_;
    Eigen::VectorXd b_;
    Eigen::VectorXd art_sign_;
    Eigen::VectorXd inv_col_norm_;
    std::vector<Eigen::Index> basis_;
    std::vector<int> in_basis_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    std::vector<Eta> etas_;
    Eigen::VectorXd xb_;
    long long cap_ = 0;
    int iterations_ = 0;
    bool nonneg_only_ = false;
    bool bland_ = false;
};

} // namespace detail

/// min ||w||_1 subject to P w = m, via the split w = u - v (u, v >= 0) and a
/// two-phase revised primal simplex. The result is a basic optimal solution,
/// so it has at most K nonzeros. Which optimal vertex is returned when the
/// minimizer is not unique depends only on the deterministic pivoting rules.
/// `warm_basis` (structural column indices, e.g. L1Solution::basis of a system
/// whose rows are a prefix of these) seeds phase one; it is ignored if it does
/// not give a feasible starting basis.
inline L1Solution l1_minimize(const Eigen::Ref<const Eigen::MatrixXd>& p, const Eigen::Ref<const Eigen::VectorXd>& m,
                              const SimplexOptions& opts = {}, const std::vector<int>* warm_basis = nullptr)
{
    if (m.size() != p.rows())
        throw InputError("l1_minimize: dimension mismatch");
    if (p.rows() == 0)
        return L1Solution{Eigen::VectorXd::Zero(p.cols()), 0.0, 0, 0, {}};
    L1Solution sol = detail::SplitL1Simplex(p, m, opts, warm_basis).solve();
    const double resid = (p * sol.w - m).lpNorm<Eigen::Infinity>();
    if (resid > 1e-9 * (1.0 + m.lpNorm<Eigen::Infinity>()))
        throw ConstructionError("l1_minimize: final residual " + std::to_string(resid) + " exceeds tolerance");
    return sol;
}

/// A basic solution of P w = m with w >= 0, or nullopt if there is none.
/// When the constant function lies in the row space of P, every feasible w
/// has the same sum and so the result is also an l1-minimal solution; the
/// cubature constructions rely on this to decide each degree with phase one
/// alone.
inline std::optional<L1Solution> nonnegative_basic_solution(const Eigen::Ref<const Eigen::MatrixXd>& p,
                                                            const Eigen::Ref<const Eigen::VectorXd>& m,
                                                            const SimplexOptions& opts = {},
                                                            const std::vector<int>* warm_basis = nullptr)
{
    if (m.size() != p.rows())
        throw InputError("nonnegative_basic_solution: dimension mismatch");
    try
    {
        L1Solution sol = detail::SplitL1Simplex(p, m, opts, warm_basis, true).solve();
        const double resid = (p * sol.w - m).lpNorm<Eigen::Infinity>();
        if (resid > 1e-9 * (1.0 + m.lpNorm<Eigen::Infinity>()))
            throw ConstructionError("nonnegative_basic_solution: final residual " + std::to_string(resid) +
                                    " exceeds tolerance");
        return sol;
    }
    catch (const InfeasibleError&)
    {
        return std::nullopt;
    }
}

} // namespace stablecub
