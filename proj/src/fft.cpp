#include "sepeval/fft.hpp"

#include "sepeval/error.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace sepeval {

struct RealFft::Plans {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
    ~Plans();
};

namespace {

// FFTW's planner is not re-entrant; execution of an existing plan is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::map<std::size_t, std::weak_ptr<const RealFft::Plans>>& plan_cache() {
    static std::map<std::size_t, std::weak_ptr<const RealFft::Plans>> cache;
    return cache;
}

}  // namespace

RealFft::Plans::~Plans() {
    std::lock_guard lock(planner_mutex());
    if (r2c) fftw_destroy_plan(r2c);
    if (c2r) fftw_destroy_plan(c2r);
}

RealFft::RealFft(std::size_t n) : n_(n) {
    if (n == 0) throw ConfigError("FFT length must be positive");
    {
        std::lock_guard lock(planner_mutex());
        auto& cache = plan_cache();
        if (auto it = cache.find(n); it != cache.end()) plans_ = it->second.lock();
    }
    if (plans_) return;

    auto plans = std::shared_ptr<Plans>(new Plans);
    {
        std::lock_guard lock(planner_mutex());
        std::vector<double> real(n);
        std::vector<cplx> spec(n / 2 + 1);
        auto* c = reinterpret_cast<fftw_complex*>(spec.data());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        plans->r2c = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.data(), c, flags);
        plans->c2r = fftw_plan_dft_c2r_1d(static_cast<int>(n), c, real.data(), flags);
        if (!plans->r2c || !plans->c2r) throw Error("FFTW failed to plan length " + std::to_string(n));
        plan_cache()[n] = plans;
    }
    plans_ = std::move(plans);
}

void RealFft::forward(std::span<const double> in, std::span<cplx> out) const {
    if (in.size() != n_ || out.size() != bins()) throw ShapeError("RealFft::forward: buffer size mismatch");
    // r2c never writes to its input.
    fftw_execute_dft_r2c(plans_->r2c, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const cplx> in, std::span<double> out) const {
    if (in.size() != bins() || out.size() != n_) throw ShapeError("RealFft::inverse: buffer size mismatch");
    // c2r may clobber its input.
    std::vector<cplx> scratch(in.begin(), in.end());
    fftw_execute_dft_c2r(plans_->c2r, reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
}

std::size_t next_fast_length(std::size_t n) {
    if (n <= 1) return 1;
    std::size_t best = SIZE_MAX;
    for (std::size_t p5 = 1; p5 < best; p5 *= 5) {
        for (std::size_t p35 = p5; p35 < best; p35 *= 3) {
            std::size_t v = p35;
            while (v < n) v *= 2;
            if (v < best) best = v;
            if (p35 >= n) break;
        }
        if (p5 >= n) break;
    }
    return best;
}

}  // namespace sepeval
