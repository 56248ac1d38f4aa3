#pragma once

// Point families: equidistant tensor grids, uniform random samples and Halton
// sequences on [-1,1]^q, restriction to the unit ball, and CSV persistence.

#include "stablecub/domains.hpp"
#include "stablecub/errors.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace stablecub
{

/// Name of the generator behind every seeded draw in this library.
inline constexpr const char* prng_name = "mt19937_64";

/// Uniform double in [0,1) from the top 53 bits of a 64-bit Mersenne Twister
/// draw. Does not go through std::uniform_real_distribution, whose output is
/// implementation-defined.
inline double uniform01(std::mt19937_64& gen)
{
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

struct Provenance
{
    std::string family; // equidistant | uniform | halton | gauss_legendre | file
    std::optional<std::uint64_t> seed;
    std::string prng;
    int grid_n = 0;
    std::string source;
    bool ball_restricted = false;
    std::size_t unrestricted_count = 0;

    nlohmann::json to_json() const
    {
        nlohmann::json j;
        j["family"] = family;
        if (seed)
        {
            j["seed"] = *seed;
            j["prng"] = prng;
        }
        if (grid_n > 0)
            j["grid_n"] = grid_n;
        if (!source.empty())
            j["source"] = source;
        j["ball_restricted"] = ball_restricted;
        if (ball_restricted)
            j["unrestricted_count"] = unrestricted_count;
        return j;
    }
};

/// N points in R^q stored column-wise (q x N).
class PointSet
{
public:
    PointSet() = default;
    PointSet(Eigen::MatrixXd coords, Provenance provenance)
        : coords_(std::move(coords)), provenance_(std::move(provenance))
    {
    }

    int dim() const { return static_cast<int>(coords_.rows()); }
    int size() const { return static_cast<int>(coords_.cols()); }
    const Eigen::MatrixXd& coords() const { return coords_; }
    auto point(int n) const { return coords_.col(n); }
    const Provenance& provenance() const { return provenance_; }

private:
    Eigen::MatrixXd coords_;
    Provenance provenance_;
};

/// Index of the first point that repeats an earlier one, if any.
inline std::optional<int> find_duplicate(const Eigen::MatrixXd& coords)
{
    const int n = static_cast<int>(coords.cols());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto less = [&](int a, int b) {
        for (Eigen::Index i = 0; i < coords.rows(); ++i)
            if (coords(i, a) != coords(i, b))
                return coords(i, a) < coords(i, b);
        return a < b;
    };
    std::sort(order.begin(), order.end(), less);
    std::optional<int> dup;
    for (int i = 1; i < n; ++i)
    {
        if ((coords.col(order[i]).array() == coords.col(order[i - 1]).array()).all())
        {
            const int later = std::max(order[i], order[i - 1]);
            if (!dup || later < *dup)
                dup = later;
        }
    }
    return dup;
}

inline PointSet equidistant_grid(int q, int n)
{
    if (q < 1 || n < 1)
        throw InputError("equidistant grid needs q >= 1 and n >= 1");
    std::vector<double> axis(n);
    for (int i = 0; i < n; ++i)
        axis[i] = (n == 1) ? 0.0 : -1.0 + 2.0 * i / (n - 1);

    long long total = 1;
    for (int i = 0; i < q; ++i)
        total *= n;
    Eigen::MatrixXd coords(q, total);
    std::vector<int> digit(q, 0);
    for (long long col = 0; col < total; ++col)
    {
        for (int i = 0; i < q; ++i)
            coords(i, col) = axis[digit[i]];
        for (int i = 0; i < q && ++digit[i] == n; ++i)
            digit[i] = 0;
    }
    Provenance p;
    p.family = "equidistant";
    p.grid_n = n;
    return PointSet(std::move(coords), p);
}

inline constexpr std::array<int, 16> halton_bases = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

inline double radical_inverse(std::uint64_t index, int base)
{
    double inv_base = 1.0 / base;
    double scale = inv_base;
    double result = 0.0;
    while (index > 0)
    {
        result += scale * static_cast<double>(index % base);
        index /= base;
        scale *= inv_base;
    }
    return result;
}

/// Halton points with indices 1..N (no scrambling, no leaping), mapped to [-1,1]^q.
inline PointSet halton(int q, int count)
{
    if (q < 1 || q > static_cast<int>(halton_bases.size()))
        throw InputError("halton supports 1 <= q <= 16, got q = " + std::to_string(q));
    if (count < 1)
        throw InputError("halton needs N >= 1");
    Eigen::MatrixXd coords(q, count);
    for (int n = 0; n < count; ++n)
        for (int i = 0; i < q; ++i)
            coords(i, n) = 2.0 * radical_inverse(static_cast<std::uint64_t>(n) + 1, halton_bases[i]) - 1.0;
    Provenance p;
    p.family = "halton";
    return PointSet(std::move(coords), p);
}

inline PointSet uniform_random(int q, int count, std::uint64_t seed)
{
    if (q < 1 || count < 1)
        throw InputError("uniform_random needs q >= 1 and N >= 1");
    std::mt19937_64 gen(seed);
    Eigen::MatrixXd coords(q, count);
    for (int n = 0; n < count; ++n)
        for (int i = 0; i < q; ++i)
            coords(i, n) = 2.0 * uniform01(gen) - 1.0;
    Provenance p;
    p.family = "uniform";
    p.seed = seed;
    p.prng = prng_name;
    return PointSet(std::move(coords), p);
}

/// Points with Euclidean norm <= 1, in input order.
inline PointSet restrict_to_ball(const PointSet& ps)
{
    std::vector<int> keep;
    for (int n = 0; n < ps.size(); ++n)
        if (ps.point(n).squaredNorm() <= 1.0)
            keep.push_back(n);
    if (keep.empty())
        throw InputError("no points inside the unit ball");
    Eigen::MatrixXd coords(ps.dim(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
        coords.col(static_cast<Eigen::Index>(j)) = ps.point(keep[j]);
    Provenance p = ps.provenance();
    if (!p.ball_restricted)
        p.unrestricted_count = static_cast<std::size_t>(ps.size());
    p.ball_restricted = true;
    return PointSet(std::move(coords), p);
}

/// Points of the given family on [-1,1]^q. For the equidistant family `n` is
/// the per-axis count; for halton/uniform the set has n^q points, so sweeps
/// over n are comparable across families.
inline PointSet generate_family(const std::string& family, int q, int n, std::uint64_t seed = 0)
{
    long long total = 1;
    for (int i = 0; i < q; ++i)
        total *= n;
    if (family == "equid" || family == "equidistant")
        return equidistant_grid(q, n);
    if (family == "halton")
        return halton(q, static_cast<int>(total));
    if (family == "uniform")
        return uniform_random(q, static_cast<int>(total), seed);
    throw InputError("unknown point family '" + family + "' (expected equid|uniform|halton)");
}

/// Generated family restricted to the domain (identity on the cube).
inline PointSet points_for_domain(const Domain& domain, const std::string& family, int n, std::uint64_t seed = 0)
{
    PointSet ps = generate_family(family, domain.dim, n, seed);
    return domain.kind == DomainKind::ball ? restrict_to_ball(ps) : ps;
}

inline std::string format_real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_points_csv(std::ostream& os, const PointSet& ps)
{
    for (int n = 0; n < ps.size(); ++n)
    {
        for (int i = 0; i < ps.dim(); ++i)
        {
            if (i)
                os << ',';
            os << format_real(ps.point(n)[i]);
        }
        os << '\n';
    }
}

inline void save_points(const PointSet& ps, const std::string& path)
{
    std::ofstream os(path);
    if (!os)
        throw InputError("cannot open '" + path + "' for writing");
    write_points_csv(os, ps);
}

namespace detail
{

inline std::vector<std::string> split_csv_row(const std::string& line)
{
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        fields.push_back(field);
    if (!line.empty() && line.back() == ',')
        fields.emplace_back();
    return fields;
}

inline std::optional<double> parse_real(std::string s)
{
    auto first = s.find_first_not_of(" \t\r");
    auto last = s.find_last_not_of(" \t\r");
    if (first == std::string::npos)
        return std::nullopt;
    s = s.substr(first, last - first + 1);
    if (!s.empty() && s.front() == '+')
        s.erase(0, 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

} // namespace detail

/// Parses one-point-per-row CSV; the first row may be a header. Rejects ragged
/// rows, non-numeric or non-finite fields and repeated points.
inline PointSet read_points_csv(std::istream& is, const std::string& source = "<stream>")
{
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    int arity = -1;
    while (std::getline(is, line))
    {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#')
            continue;
        auto fields = detail::split_csv_row(line);
        std::vector<double> row;
        bool numeric = true;
        for (const auto& f : fields)
        {
            auto v = detail::parse_real(f);
            if (!v || !std::isfinite(*v))
            {
                numeric = false;
                break;
            }
            row.push_back(*v);
        }
        if (!numeric)
        {
            if (rows.empty() && arity < 0)
            {
                arity = static_cast<int>(fields.size()); // header
                continue;
            }
            throw InputError(source + ":" + std::to_string(line_no) + ": non-numeric field");
        }
        if (arity < 0)
            arity = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != arity)
            throw InputError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(arity) +
                             " fields, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw InputError(source + ": no points");
    Eigen::MatrixXd coords(arity, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t n = 0; n < rows.size(); ++n)
        for (int i = 0; i < arity; ++i)
            coords(i, static_cast<Eigen::Index>(n)) = rows[n][i];
    if (auto dup = find_duplicate(coords))
        throw InputError(source + ": duplicate point at index " + std::to_string(*dup));
    Provenance p;
    p.family = "file";
    p.source = source;
    return PointSet(std::move(coords), p);
}

inline PointSet load_points(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw InputError("cannot open '" + path + "'");
    return read_points_csv(is, path);
}

} // namespace stablecub
