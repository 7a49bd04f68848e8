#pragma once

// Straightforward serial versions of the parallel kernels. They trade speed
// for obviousness and exist to check the OpenMP/FFT paths in tests and to
// serve as the baseline in bench/.

#include "sepeval/bss_eval.hpp"
#include "sepeval/masks.hpp"

#include <Eigen/Core>

#include <span>

namespace sepeval::reference {

ScalarMask ibm_mask(const SourceImages& sources, int order);
ScalarMask irm_mask(const SourceImages& sources, double alpha);
/// Explicit inverse per bin, no fused solve.
MatrixMask mwf_mask(const SpatialModel& model, const MwfOptions& options = {});

/// Gram matrix from time-domain lagged products, O(A^2 L N).
Eigen::MatrixXd gram_matrix(std::span<const AudioSignal> references, std::size_t filter_len);
Eigen::MatrixXd cross_correlations(std::span<const AudioSignal> references, const AudioSignal& estimate,
                                   std::size_t filter_len);

/// Filtered sum computed by direct convolution, (N + L - 1) x I.
Eigen::MatrixXd project(std::span<const AudioSignal> references, const ProjectionFilters& filters, bool joint);

Eigen::MatrixXd framewise_energies(const Decomposition& d, std::size_t window, std::size_t hop);

}  // namespace sepeval::reference
