// Builds nonnegative cubature formulas on 400 Halton points in the unit disk
// and compares them with plain quasi-Monte Carlo on a smooth integrand.

#include "stablecub/stablecub.hpp"

#include <cmath>
#include <cstdio>

int main()
{
    using namespace stablecub;

    const Domain disk = Domain::ball(2);
    const WeightFunction w{WeightKind::constant};
    const PointSet pts = restrict_to_ball(halton(2, 400));

    const CubatureFormula ls = construct_ls(pts, disk, w);
    const CubatureFormula l1 = construct_l1(pts, disk, w, ls.degree);
    const CubatureFormula mc = mc_weights(pts, disk, w);

    // int_{|x|<=1} exp(x + y) dx dy = 2 pi I_1(sqrt 2) / sqrt 2
    auto f = [](const Eigen::VectorXd& x) { return std::exp(x[0] + x[1]); };
    const double exact = 2.0 * std::acos(-1.0) * std::cyl_bessel_i(1.0, std::sqrt(2.0)) / std::sqrt(2.0);
    const Eigen::VectorXd values = sample(pts, f);

    std::printf("%d points in the disk\n", pts.size());
    for (const CubatureFormula* cf : {&ls, &l1, &mc})
        std::printf("%-3s  degree %2d  nonzero weights %3d  kappa %.15f  error %.3e\n",
                    std::string(to_string(cf->method)).c_str(), cf->degree, cf->solver.nonzero_count, cf->kappa,
                    std::abs(apply(*cf, values) - exact));
    return 0;
}
