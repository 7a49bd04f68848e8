#include "sepeval/stats.hpp"

#include "sepeval/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sepeval {

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t start = 0; start < order.size();) {
        std::size_t end = start + 1;
        while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
        const double rank = 0.5 * static_cast<double>(start + 1 + end);  // mean of start+1 .. end
        for (std::size_t k = start; k < end; ++k) ranks[order[k]] = rank;
        start = end;
    }
    return ranks;
}

double student_t_sf(double t, double df) {
    if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
    const boost::math::students_t dist(df);
    return boost::math::cdf(boost::math::complement(dist, t));
}

ConoverFriedman conover_friedman(const Eigen::MatrixXd& scores) {
    const auto b = scores.rows();
    const auto k = scores.cols();
    if (b < 2 || k < 2) throw ConfigError("Conover-Friedman test needs at least 2 blocks and 2 groups");

    ConoverFriedman out;
    out.rank_sums.assign(static_cast<std::size_t>(k), 0.0);
    double a1 = 0.0;
    std::vector<double> row(static_cast<std::size_t>(k));
    for (Eigen::Index r = 0; r < b; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) row[c] = scores(r, c);
        const auto ranks = average_ranks(row);
        for (Eigen::Index c = 0; c < k; ++c) {
            out.rank_sums[c] += ranks[c];
            a1 += ranks[c] * ranks[c];
        }
    }

    const double bd = static_cast<double>(b), kd = static_cast<double>(k);
    const double c1 = bd * kd * (kd + 1.0) * (kd + 1.0) / 4.0;
    double sum_r2 = 0.0;
    for (double r : out.rank_sums) sum_r2 += r * r;
    out.friedman = a1 > c1 ? (kd - 1.0) * (sum_r2 - bd * c1) / (a1 - c1) : 0.0;
    out.degrees_of_freedom = (bd - 1.0) * (kd - 1.0);

    // b A1 - sum R^2 is an exact combination of half-integers; clamp rounding.
    const double pooled = std::max(0.0, bd * a1 - sum_r2);
    const double scale = std::sqrt(2.0 * pooled / out.degrees_of_freedom);

    out.p_values = Eigen::MatrixXd::Ones(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = i + 1; j < k; ++j) {
            const double diff = std::abs(out.rank_sums[i] - out.rank_sums[j]);
            double p;
            if (diff == 0.0)
                p = 1.0;
            else if (scale <= 0.0)
                p = 0.0;
            else
                p = std::min(1.0, 2.0 * student_t_sf(diff / scale, out.degrees_of_freedom));
            out.p_values(i, j) = out.p_values(j, i) = p;
        }
    }
    return out;
}

}  // namespace sepeval
