#pragma once

#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include <fftw3.h>

namespace fase::detail {

// Cached FFTW complex<->complex plans per (dim, n_side). Plans use
// FFTW_ESTIMATE so planning is deterministic. Not thread-safe; the library
// runs transforms single-threaded.
class FftEngine {
public:
    FftEngine(int dim, int n_side) {
        size_ = 1;
        for (int i = 0; i < dim; ++i) size_ *= static_cast<std::size_t>(n_side);
        in_ = fftw_alloc_complex(size_);
        out_ = fftw_alloc_complex(size_);
        std::vector<int> dims(static_cast<std::size_t>(dim), n_side);
        fwd_ = fftw_plan_dft(dim, dims.data(), in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft(dim, dims.data(), in_, out_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }

    ~FftEngine() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(in_);
        fftw_free(out_);
    }

    FftEngine(const FftEngine&) = delete;
    FftEngine& operator=(const FftEngine&) = delete;

    static FftEngine& get(int dim, int n_side) {
        static std::map<std::pair<int, int>, std::unique_ptr<FftEngine>> cache;
        auto& slot = cache[{dim, n_side}];
        if (!slot) slot = std::make_unique<FftEngine>(dim, n_side);
        return *slot;
    }

    std::size_t size() const { return size_; }

    // Unnormalized transforms: forward uses e^{-2pi i <k,p>/N}, inverse
    // e^{+2pi i <k,p>/N}; callers apply 1/N^d where needed.
    void forward(const std::complex<double>* in, std::complex<double>* out) {
        std::memcpy(in_, in, size_ * sizeof(fftw_complex));
        fftw_execute(fwd_);
        std::memcpy(out, out_, size_ * sizeof(fftw_complex));
    }

    void inverse(const std::complex<double>* in, std::complex<double>* out) {
        std::memcpy(in_, in, size_ * sizeof(fftw_complex));
        fftw_execute(bwd_);
        std::memcpy(out, out_, size_ * sizeof(fftw_complex));
    }

private:
    std::size_t size_ = 0;
    fftw_complex* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan fwd_{};
    fftw_plan bwd_{};
};

inline void fft_forward_real(int dim, int n_side, std::span<const double> input,
                             std::vector<std::complex<double>>& bins) {
    auto& engine = FftEngine::get(dim, n_side);
    std::vector<std::complex<double>> tmp(engine.size());
    for (std::size_t i = 0; i < engine.size(); ++i) tmp[i] = input[i];
    bins.resize(engine.size());
    engine.forward(tmp.data(), bins.data());
}

inline void fft_inverse(int dim, int n_side, const std::vector<std::complex<double>>& bins,
                        std::vector<std::complex<double>>& out) {
    auto& engine = FftEngine::get(dim, n_side);
    out.resize(engine.size());
    engine.inverse(bins.data(), out.data());
}

}  // namespace fase::detail
