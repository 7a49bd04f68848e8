#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace sepeval {

/// Median of the values; NaN for an empty input. Even counts average the
/// two middle elements.
double median(std::vector<double> values);

/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

struct ConoverFriedman {
    /// Rank sums R_j over blocks, one per group.
    std::vector<double> rank_sums;
    /// Friedman statistic T1 (tie-corrected).
    double friedman = 0.0;
    /// Two-sided pairwise p-values, symmetric with unit diagonal.
    Eigen::MatrixXd p_values;
    double degrees_of_freedom = 0.0;
};

/// Friedman ranking within each block (row) followed by Conover's pairwise
/// comparison of rank sums:
///   t = |R_i - R_j| / sqrt(2 (b A1 - sum R^2) / ((b - 1)(k - 1)))
/// with A1 the sum of squared ranks, b blocks, k groups and (b-1)(k-1)
/// degrees of freedom. No multiple-comparison adjustment is applied.
/// A zero pooled variance means every block ranks the groups identically:
/// pairs with equal rank sums get p = 1, all others p = 0.
ConoverFriedman conover_friedman(const Eigen::MatrixXd& blocks_by_groups);

/// Upper tail P(T > t) of Student's t distribution.
double student_t_sf(double t, double df);

}  // namespace sepeval
