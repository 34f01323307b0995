#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fase/fft.hpp"
#include "fase/grid.hpp"
#include "fase/rng.hpp"
#include "fase/spectrum.hpp"

namespace fase {

// Continuous power spectrum P(xi) on [-1/2, 1/2]^d; nonnegative and
// symmetric. rect_lowpass and rational are the closed-form families used in
// simulation; tabulated wraps grid-sampled values.
class AnalyticSpectrum {
public:
    enum class Kind { rect_lowpass, rational, tabulated };

    // amplitude * rect(cutoff_scale * |xi|), rect supported on [-1/2, 1/2]
    static AnalyticSpectrum rect_lowpass(double amplitude, double cutoff_scale) {
        if (amplitude < 0.0)
            throw std::invalid_argument("AnalyticSpectrum: amplitude must be nonnegative");
        if (cutoff_scale < 0.0)
            throw std::invalid_argument("AnalyticSpectrum: cutoff scale must be nonnegative");
        AnalyticSpectrum s;
        s.kind_ = Kind::rect_lowpass;
        s.a_ = amplitude;
        s.b_ = cutoff_scale;
        return s;
    }

    // 1 / (1 + scale * |xi|)
    static AnalyticSpectrum rational(double scale) {
        if (scale < 0.0) throw std::invalid_argument("AnalyticSpectrum: scale must be nonnegative");
        AnalyticSpectrum s;
        s.kind_ = Kind::rational;
        s.b_ = scale;
        return s;
    }

    static AnalyticSpectrum tabulated(GridPtr grid, Eigen::VectorXd half_values) {
        if (!grid) throw std::invalid_argument("AnalyticSpectrum: null grid");
        if (static_cast<std::size_t>(half_values.size()) != grid->half_size())
            throw std::invalid_argument("AnalyticSpectrum: table size does not match half domain");
        for (Eigen::Index i = 0; i < half_values.size(); ++i)
            if (!(half_values[i] >= 0.0))
                throw std::invalid_argument("AnalyticSpectrum: negative table value");
        AnalyticSpectrum s;
        s.kind_ = Kind::tabulated;
        s.grid_ = std::move(grid);
        s.table_ = std::move(half_values);
        return s;
    }

    double operator()(std::span<const double> xi) const {
        switch (kind_) {
            case Kind::rect_lowpass:
                return b_ * norm2(xi) <= 0.5 ? a_ : 0.0;
            case Kind::rational:
                return 1.0 / (1.0 + b_ * norm2(xi));
            case Kind::tabulated: {
                // nearest grid frequency; only grid points are used in practice
                FreqVec k(xi.size());
                const int n = grid_->n_side();
                const int lo = -((n + 1) / 2) + 1;
                for (std::size_t i = 0; i < xi.size(); ++i) {
                    int v = static_cast<int>(std::lround(xi[i] * n));
                    while (v > n / 2) v -= n;
                    while (v < lo) v += n;
                    k[i] = v;
                }
                return table_[static_cast<Eigen::Index>(grid_->half_index(k).index)];
            }
        }
        throw std::logic_error("AnalyticSpectrum: unknown kind");
    }

    // P(k/N) for a half-domain point of `grid`
    double at_half_point(const FreqGrid& grid, std::size_t half_idx) const {
        const auto xi = grid.frequency(half_idx);
        return (*this)(xi);
    }

    // sample onto a grid's half domain
    Eigen::VectorXd sample_half(const FreqGrid& grid) const {
        Eigen::VectorXd vals(static_cast<Eigen::Index>(grid.half_size()));
        for (std::size_t i = 0; i < grid.half_size(); ++i)
            vals[static_cast<Eigen::Index>(i)] = at_half_point(grid, i);
        return vals;
    }

    Kind kind() const { return kind_; }
    double amplitude() const { return a_; }
    double scale() const { return b_; }
    const Eigen::VectorXd& table() const { return table_; }

private:
    static double norm2(std::span<const double> xi) {
        double s = 0.0;
        for (double v : xi) s += v * v;
        return std::sqrt(s);
    }

    Kind kind_ = Kind::rational;
    double a_ = 0.0;
    double b_ = 0.0;
    GridPtr grid_;
    Eigen::VectorXd table_;
};

// Law of one mixing coefficient a_l. Needs Var(a^2) in closed form for the
// population covariance.
struct CoeffLaw {
    enum class Kind { standard_normal, constant };

    Kind kind = Kind::standard_normal;
    double value = 0.0;  // for constant

    static CoeffLaw standard_normal() { return CoeffLaw{Kind::standard_normal, 0.0}; }
    static CoeffLaw constant(double v) { return CoeffLaw{Kind::constant, v}; }

    double sample(Rng& rng) const {
        switch (kind) {
            case Kind::standard_normal:
                return rng.gaussian();
            case Kind::constant:
                return value;
        }
        throw std::logic_error("CoeffLaw: unknown kind");
    }

    // Var(a^2); for N(0,1) this is E a^4 - (E a^2)^2 = 3 - 1 = 2.
    double var_of_square() const {
        switch (kind) {
            case Kind::standard_normal:
                return 2.0;
            case Kind::constant:
                return 0.0;
        }
        throw std::invalid_argument("CoeffLaw: unknown coefficient law");
    }
};

// X = sum_l a_l Z_l with independent sources Z_l and independent random
// coefficients a_l.
struct FactorModel {
    std::vector<AnalyticSpectrum> sources;
    std::vector<CoeffLaw> coeff_laws;  // one per source

    int rank() const { return static_cast<int>(sources.size()); }

    void validate() const {
        if (sources.empty()) throw std::invalid_argument("FactorModel: needs at least one source");
        if (coeff_laws.size() != sources.size())
            throw std::invalid_argument("FactorModel: one coefficient law per source required");
    }

    static FactorModel with_normal_coeffs(std::vector<AnalyticSpectrum> sources) {
        FactorModel m;
        m.coeff_laws.assign(sources.size(), CoeffLaw::standard_normal());
        m.sources = std::move(sources);
        return m;
    }
};

// n real fields of size N^d in row-major layout (axis 0 slowest), plus the
// realized mixing coefficients when produced by the factor-model sampler.
struct SignalStack {
    int dim = 0;
    int n_side = 0;
    std::size_t count = 0;
    std::vector<double> samples;          // count * N^d
    std::optional<Eigen::MatrixXd> coeffs;  // count x r

    std::size_t field_size() const {
        std::size_t f = 1;
        for (int i = 0; i < dim; ++i) f *= static_cast<std::size_t>(n_side);
        return f;
    }

    std::span<const double> signal(std::size_t s) const {
        const std::size_t f = field_size();
        return {samples.data() + s * f, f};
    }

    std::span<double> signal(std::size_t s) {
        const std::size_t f = field_size();
        return {samples.data() + s * f, f};
    }
};

// Finitely supported convolution kernel psi.
struct KernelTap {
    FreqVec offset;
    double value = 0.0;
};

struct Kernel {
    std::vector<KernelTap> taps;

    static Kernel identity(int dim) {
        Kernel k;
        k.taps.push_back({FreqVec(static_cast<std::size_t>(dim), 0), 1.0});
        return k;
    }
};

// i.i.d. standard normal samples; each signal draws from substream
// (seed, s, lane 0) so output is independent of generation order.
inline SignalStack sample_white_noise(const GridPtr& grid, std::size_t count,
                                      std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_white_noise: count must be >= 1");
    SignalStack stack;
    stack.dim = grid->dim();
    stack.n_side = grid->n_side();
    stack.count = count;
    stack.samples.resize(count * grid->full_size());
    for (std::size_t s = 0; s < count; ++s) {
        Rng rng(substream(seed, s, 0));
        auto field = stack.signal(s);
        for (double& v : field) v = rng.gaussian();
    }
    return stack;
}

// Circular convolution of each signal with psi; the finite-domain surrogate
// for the linear-field definition.
inline SignalStack convolve_kernel(const SignalStack& noise, const Kernel& kernel) {
    const int d = noise.dim;
    const int n = noise.n_side;
    for (const auto& tap : kernel.taps) {
        if (static_cast<int>(tap.offset.size()) != d)
            throw std::invalid_argument("convolve_kernel: tap dimension mismatch");
        for (int o : tap.offset)
            if (o <= -n || o >= n)
                throw std::invalid_argument("convolve_kernel: kernel larger than domain");
    }

    SignalStack out;
    out.dim = d;
    out.n_side = n;
    out.count = noise.count;
    out.samples.assign(noise.samples.size(), 0.0);

    const std::size_t fsize = noise.field_size();
    std::vector<int> pos(static_cast<std::size_t>(d));
    for (std::size_t s = 0; s < noise.count; ++s) {
        auto in = noise.signal(s);
        auto result = out.signal(s);
        for (std::size_t p = 0; p < fsize; ++p) {
            std::size_t rem = p;
            for (int a = d - 1; a >= 0; --a) {
                pos[static_cast<std::size_t>(a)] = static_cast<int>(rem % static_cast<std::size_t>(n));
                rem /= static_cast<std::size_t>(n);
            }
            double acc = 0.0;
            for (const auto& tap : kernel.taps) {
                std::size_t src = 0;
                for (int a = 0; a < d; ++a) {
                    int q = pos[static_cast<std::size_t>(a)] - tap.offset[static_cast<std::size_t>(a)];
                    q = ((q % n) + n) % n;
                    src = src * static_cast<std::size_t>(n) + static_cast<std::size_t>(q);
                }
                acc += tap.value * in[src];
            }
            result[p] = acc;
        }
    }
    return out;
}

namespace detail {

// Circulant spectral synthesis of one real field: Hermitian-symmetric
// complex Gaussian Fourier coefficients with E|F[k]|^2 = N^d P(k/N), so the
// expected periodogram equals P(k/N) exactly at every grid frequency.
// Self-negating frequencies get a real coefficient with the full variance.
inline void synthesize_one(const FreqGrid& grid, const Eigen::VectorXd& half_power, Rng& rng,
                           std::span<double> out) {
    const double total = static_cast<double>(grid.full_size());
    std::vector<std::complex<double>> bins(grid.full_size(), {0.0, 0.0});
    for (std::size_t i = 0; i < grid.half_size(); ++i) {
        const double sigma2 = total * half_power[static_cast<Eigen::Index>(i)];
        if (grid.half_point_self_negating(i)) {
            bins[grid.bin_of_half(i)] = std::sqrt(sigma2) * rng.gaussian();
        } else {
            const double sd = std::sqrt(sigma2 / 2.0);
            const std::complex<double> f{sd * rng.gaussian(), sd * rng.gaussian()};
            bins[grid.bin_of_half(i)] = f;
            bins[grid.neg_bin_of_half(i)] = std::conj(f);
        }
    }
    std::vector<std::complex<double>> field;
    fft_inverse(grid.dim(), grid.n_side(), bins, field);
    const double norm = 1.0 / total;
    for (std::size_t p = 0; p < grid.full_size(); ++p) out[p] = field[p].real() * norm;
}

inline Eigen::VectorXd checked_half_power(const FreqGrid& grid, const AnalyticSpectrum& spectrum) {
    Eigen::VectorXd power = spectrum.sample_half(grid);
    for (Eigen::Index i = 0; i < power.size(); ++i)
        if (!(power[i] >= 0.0))
            throw std::invalid_argument("synthesize_field: negative spectrum value");
    return power;
}

}  // namespace detail

// Stationary Gaussian field with the prescribed spectrum; signal s uses
// substream (seed, s, lane 1), matching the factor-model sampler's first
// source so the single-source degenerate model collapses exactly.
inline SignalStack synthesize_field(const GridPtr& grid, const AnalyticSpectrum& spectrum,
                                    std::size_t count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("synthesize_field: count must be >= 1");
    const Eigen::VectorXd power = detail::checked_half_power(*grid, spectrum);

    SignalStack stack;
    stack.dim = grid->dim();
    stack.n_side = grid->n_side();
    stack.count = count;
    stack.samples.resize(count * grid->full_size());
    for (std::size_t s = 0; s < count; ++s) {
        Rng rng(substream(seed, s, 1));
        detail::synthesize_one(*grid, power, rng, stack.signal(s));
    }
    return stack;
}

// X_s = sum_l a_{s,l} Z_{s,l}: coefficients from substream (seed, s, 0),
// source l field from substream (seed, s, l+1). Realized coefficients are
// stored in the result.
inline SignalStack sample_factor_model(const GridPtr& grid, const FactorModel& model,
                                       std::size_t count, std::uint64_t seed) {
    model.validate();
    if (count < 1) throw std::invalid_argument("sample_factor_model: count must be >= 1");
    const int r = model.rank();

    std::vector<Eigen::VectorXd> powers;
    powers.reserve(static_cast<std::size_t>(r));
    for (const auto& src : model.sources) powers.push_back(detail::checked_half_power(*grid, src));

    SignalStack stack;
    stack.dim = grid->dim();
    stack.n_side = grid->n_side();
    stack.count = count;
    stack.samples.assign(count * grid->full_size(), 0.0);
    stack.coeffs.emplace(count, r);

    std::vector<double> source_field(grid->full_size());
    for (std::size_t s = 0; s < count; ++s) {
        Rng coeff_rng(substream(seed, s, 0));
        auto field = stack.signal(s);
        for (int l = 0; l < r; ++l) {
            const double a = model.coeff_laws[static_cast<std::size_t>(l)].sample(coeff_rng);
            (*stack.coeffs)(static_cast<Eigen::Index>(s), l) = a;
            Rng source_rng(substream(seed, s, static_cast<std::uint64_t>(l) + 1));
            detail::synthesize_one(*grid, powers[static_cast<std::size_t>(l)], source_rng,
                                   source_field);
            for (std::size_t p = 0; p < grid->full_size(); ++p) field[p] += a * source_field[p];
        }
    }
    return stack;
}

// Conditional spectrum sum_l a_l^2 P_{Z_l}(k/N) on the half domain — the
// per-signal ground truth.
inline SpectrumVector conditional_spectrum(const FactorModel& model, std::span<const double> coeffs,
                                           const GridPtr& grid) {
    model.validate();
    if (coeffs.size() != model.sources.size())
        throw std::invalid_argument("conditional_spectrum: coefficient count mismatch");

    Eigen::VectorXd vals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid->half_size()));
    for (std::size_t l = 0; l < model.sources.size(); ++l)
        vals += (coeffs[l] * coeffs[l]) * model.sources[l].sample_half(*grid);
    return SpectrumVector{grid, std::move(vals)};
}

// Cov[P_{X|a}(xi1), P_{X|a}(xi2)] = sum_l Var(a_l^2) P_{Z_l}(xi1) P_{Z_l}(xi2)
// sampled on the half domain; rank <= r by construction.
inline Eigen::MatrixXd population_covariance(const FactorModel& model, const FreqGrid& grid) {
    model.validate();
    const auto m = static_cast<Eigen::Index>(grid.half_size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t l = 0; l < model.sources.size(); ++l) {
        const double var_sq = model.coeff_laws[l].var_of_square();
        const Eigen::VectorXd p = model.sources[l].sample_half(grid);
        cov.noalias() += var_sq * p * p.transpose();
    }
    return cov;
}

}  // namespace fase
