#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace sepeval {

using cplx = std::complex<double>;

/// Storage for buffers that Eigen maps. Eigen chooses scalar or packet code
/// from the runtime alignment of a map, and plain std::vector alignment
/// varies with the allocating thread, so unaligned buffers would make results
/// depend on which thread allocated them.
template <class T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

/// Real-to-complex transform pair of a fixed length n, producing the
/// n/2 + 1 non-negative frequency bins. Both directions are unnormalized:
/// inverse(forward(x)) == n * x. Instances are immutable and may be shared
/// across threads.
class RealFft {
public:
    explicit RealFft(std::size_t n);

    std::size_t size() const { return n_; }
    std::size_t bins() const { return n_ / 2 + 1; }

    void forward(std::span<const double> in, std::span<cplx> out) const;
    /// `in` is left untouched.
    void inverse(std::span<const cplx> in, std::span<double> out) const;

    struct Plans;  // opaque FFTW plan pair, shared between instances of one length

private:
    std::size_t n_;
    std::shared_ptr<const Plans> plans_;
};

/// Smallest integer >= n whose only prime factors are 2, 3 and 5.
std::size_t next_fast_length(std::size_t n);

}  // namespace sepeval
